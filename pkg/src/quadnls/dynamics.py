"""Right-hand sides of the truncated mode system in two equivalent frames."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .spectral import SpectralState, _pair_tables, mode_numbers

REGIME_TOL = 1e-10


class RegimeViolation(ValueError):
    """Raised when ``Re u_0`` drifts away from zero in the rotating-frame form."""


class SystemForm(Enum):
    ROTATING = "rotating"
    LAB = "lab"


_flat_cache = {}


def _flat_pairs(K):
    # Valid (k, l) pairs grouped by k in ascending order, l ascending within each group.
    tab = _flat_cache.get(K)
    if tab is None:
        gather, mask, kl = _pair_tables(K)
        rows, cols = np.nonzero(mask)
        starts = np.searchsorted(rows, np.arange(2 * K + 1))
        tab = (cols, gather[rows, cols], kl[rows, cols], starts)
        _flat_cache[K] = tab
    return tab


def rhs_rotating_array(t, u):
    """Time derivative of the rotating-frame coefficient array ``u`` (length 2K+1).

    ``du_k/dt = -i sum_l conj(u_l) u_{k+l} exp(-2 i k l t)`` for ``k != 0`` and
    ``d(Im u_0)/dt = -(Im u_0)^2 - nu`` with ``Re u_0`` frozen at zero.
    """
    K = (u.size - 1) // 2
    if abs(u[K].real) > REGIME_TOL:
        raise RegimeViolation(f"|Re u_0| = {abs(u[K].real):.3e} exceeds {REGIME_TOL:g}")
    li, kli, kl, starts = _flat_pairs(K)
    terms = np.conj(u[li]) * u[kli] * np.exp(-2j * t * kl)
    du = -1j * np.add.reduceat(terms, starts)
    mu = u[K].imag
    p = u.real**2 + u.imag**2
    nu = p[:K].sum() + p[K + 1:].sum()
    du[K] = 1j * (-(mu * mu) - nu)
    return du


def rhs_lab_array(t, uhat):
    """Lab-frame derivative ``d uhat_k/dt = -i k^2 uhat_k - i (|u|^2)^(k)``.

    The convolution is a direct correlation sum restricted to ``|k| <= K``.
    """
    K = (uhat.size - 1) // 2
    k = mode_numbers(K)
    # np.correlate(a, a, "full")[2K + k] = sum_l a[l + k] conj(a[l])
    quad = np.correlate(uhat, uhat, mode="full")[K : 3 * K + 1]
    return -1j * k**2 * uhat - 1j * quad


def rhs_rotating(state):
    return rhs_rotating_array(state.t, state.coeffs)


def rhs_lab(lab_coeffs, t):
    return rhs_lab_array(t, np.asarray(lab_coeffs, dtype=complex))


def rhs(form, t, y):
    if form is SystemForm.ROTATING:
        return rhs_rotating_array(t, y)
    return rhs_lab_array(t, y)


def lab_rhs_to_rotating(lab_coeffs, lab_deriv, t):
    """Map a lab-frame derivative to the rotating frame by the chain rule.

    With ``u_k = uhat_k e^{i k^2 t}``: ``du_k/dt = (duhat_k/dt + i k^2 uhat_k) e^{i k^2 t}``.
    """
    lab = np.asarray(lab_coeffs, dtype=complex)
    K = (lab.size - 1) // 2
    k = mode_numbers(K)
    return (np.asarray(lab_deriv) + 1j * k**2 * lab) * np.exp(1j * k**2 * t)


def state_vector(state, form):
    if form is SystemForm.ROTATING:
        return np.array(state.coeffs)
    k = state.modes
    return state.coeffs * np.exp(-1j * k**2 * state.t)


def vector_state(y, t, form):
    K = (y.size - 1) // 2
    if form is SystemForm.ROTATING:
        return SpectralState(t, K, y)
    k = mode_numbers(K)
    return SpectralState(t, K, y * np.exp(1j * k**2 * t))
