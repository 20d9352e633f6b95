"""Fourier state of the truncated periodic problem i u_t + u_xx = |u|^2.

Coefficients are stored in the rotating frame, u_k(t) = uhat(t, k) exp(i k^2 t),
as a complex array indexed by ``k + K`` for ``k = -K..K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class GridTooCoarse(ValueError):
    pass


def _freeze(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralState:
    """Rotating-frame coefficients ``u_k`` at time ``t`` with truncation ``K``."""

    t: float
    K: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError(f"truncation K must be a positive integer, got {self.K}")
        c = np.array(self.coeffs, dtype=complex)
        if c.shape != (2 * self.K + 1,):
            raise ValueError(f"expected {2 * self.K + 1} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient in state")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "coeffs", _freeze(c))

    @classmethod
    def zeros(cls, K, t=0.0):
        return cls(t, K, np.zeros(2 * K + 1, dtype=complex))

    @classmethod
    def from_modes(cls, modes, K, t=0.0):
        """Build from a mapping ``{k: u_k}``; absent modes are zero."""
        c = np.zeros(2 * K + 1, dtype=complex)
        for k, v in dict(modes).items():
            if abs(k) > K:
                raise ValueError(f"mode {k} outside truncation K={K}")
            c[k + K] = v
        return cls(t, K, c)

    @property
    def modes(self):
        return mode_numbers(self.K)

    def __getitem__(self, k):
        if abs(k) > self.K:
            return 0j
        return complex(self.coeffs[k + self.K])

    def as_dict(self):
        return {int(k): complex(v) for k, v in zip(self.modes, self.coeffs)}

    @property
    def u0(self):
        return complex(self.coeffs[self.K])


@dataclass(frozen=True)
class Diagnostics:
    t: float
    mu: float
    re_u0: float
    nu: float
    nu_K: float
    r_K: float
    l2_norm: float


@dataclass(frozen=True)
class PhysicalField:
    """Samples of ``u`` on the uniform grid ``x_j = 2 pi j / M``."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("a field needs at least two grid samples")
        object.__setattr__(self, "samples", _freeze(s))

    @property
    def M(self):
        return self.samples.size

    @property
    def x(self):
        return 2 * np.pi * np.arange(self.M) / self.M


def default_grid_size(K):
    return 4 * (2 * K + 1)


_mode_cache = {}


def mode_numbers(K):
    """Read-only array ``[-K, ..., K]``, cached per truncation."""
    k = _mode_cache.get(K)
    if k is None:
        k = _freeze(np.arange(-K, K + 1))
        _mode_cache[K] = k
    return k


def _phases(K, t):
    k = mode_numbers(K)
    return np.exp(1j * k**2 * t)


def to_lab_frame(state):
    """Lab-frame coefficients ``uhat(t, k) = u_k(t) exp(-i k^2 t)``."""
    return state.coeffs * np.conj(_phases(state.K, state.t))


def from_lab_frame(lab_coeffs, t):
    lab = np.asarray(lab_coeffs, dtype=complex)
    K = (lab.size - 1) // 2
    return SpectralState(t, K, lab * _phases(K, t))


def synthesize(state, M=None):
    """Evaluate ``u(t, x_j) = sum_k uhat(t, k) exp(i k x_j)`` on an M-point grid."""
    K = state.K
    M = default_grid_size(K) if M is None else int(M)
    if M < 2 * K + 1:
        raise GridTooCoarse(f"M={M} cannot resolve 2K+1={2 * K + 1} modes")
    spec = np.zeros(M, dtype=complex)
    k = state.modes
    spec[k % M] = to_lab_frame(state)
    return PhysicalField(np.fft.ifft(spec) * M)


def analyze(field, K, t=0.0):
    """Recover rotating-frame coefficients from grid samples by rectangle-rule quadrature."""
    M = field.M
    if M < 2 * K + 1:
        raise GridTooCoarse(f"M={M} cannot resolve 2K+1={2 * K + 1} modes")
    spec = np.fft.fft(field.samples) / M
    return from_lab_frame(spec[mode_numbers(K) % M], t)


_pair_cache = {}


def _pair_tables(K):
    # For output mode k (row) and summation index l (column): gather index of
    # u_{k+l}, validity mask for |k+l| <= K, and the product k*l.
    tab = _pair_cache.get(K)
    if tab is None:
        k = np.arange(-K, K + 1)[:, None]
        l = np.arange(-K, K + 1)[None, :]
        kl = k + l
        mask = np.abs(kl) <= K
        gather = np.where(mask, kl + K, 0)
        tab = (gather, mask, (k * l).astype(float))
        _pair_cache[K] = tab
    return tab


def nonlinearity_modes(state):
    """Rotating-frame projection of ``|u|^2``.

    Returns, for each ``|k| <= K``, ``sum_l conj(u_l) u_{k+l} exp(-2 i k l t)``
    with both ``l`` and ``k + l`` inside the truncation. This equals
    ``exp(i k^2 t)`` times the lab-frame Fourier coefficient of ``|u|^2``.
    """
    gather, mask, kl = _pair_tables(state.K)
    u = state.coeffs
    terms = np.conj(u)[None, :] * u[gather] * np.exp(-2j * kl * state.t)
    return np.where(mask, terms, 0).sum(axis=1)


def remainder(state, K_partial=None):
    """``R_K = Im sum_{0<|k|<=K_partial} sum_{l != 0} conj(u_k u_l) u_{k+l} e^{-2ikl t}``."""
    K = state.K
    Kp = K if K_partial is None else K_partial
    gather, mask, kl = _pair_tables(K)
    u = state.coeffs
    k = mode_numbers(K)
    rows = (np.abs(k) <= Kp) & (k != 0)
    cols = k != 0
    terms = np.conj(u)[:, None] * np.conj(u)[None, :] * u[gather] * np.exp(-2j * kl * state.t)
    sel = mask & rows[:, None] & cols[None, :]
    return float(np.imag(np.where(sel, terms, 0).sum()))


def remainder_shells(coeffs, t):
    """``R_{K'}`` for every ``K' = 1..K`` and for a batch of coefficient rows.

    ``coeffs`` has shape ``(N, 2K+1)`` (rotating frame) and ``t`` shape ``(N,)``;
    returns an ``(N, K)`` array whose column ``K'-1`` is ``R_{K'}``.
    """
    U = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    t = np.broadcast_to(np.asarray(t, dtype=float), U.shape[:1])
    K = (U.shape[1] - 1) // 2
    gather, mask, kl = _pair_tables(K)
    k = mode_numbers(K)
    sel = mask & (k != 0)[:, None] & (k != 0)[None, :]
    Uc = np.conj(U)
    terms = Uc[:, :, None] * Uc[:, None, :] * U[:, gather] * np.exp(-2j * kl[None] * t[:, None, None])
    rows = np.imag(np.where(sel[None], terms, 0).sum(axis=2))
    shells = rows[:, K + 1:] + rows[:, K - 1::-1]
    return np.cumsum(shells, axis=1)


def oscillation_energy(state, K_partial=None):
    """``nu_K``: sum of ``|u_k|^2`` over ``0 < |k| <= K_partial`` (all nonzero modes by default)."""
    K = state.K
    Kp = K if K_partial is None else K_partial
    p = state.coeffs.real**2 + state.coeffs.imag**2
    if Kp == K:
        return float(p[:K].sum() + p[K + 1:].sum())
    k = mode_numbers(K)
    return float(p[(k != 0) & (np.abs(k) <= Kp)].sum())


def oscillation_rows(coeffs):
    """``nu`` for each row of an ``(N, 2K+1)`` coefficient array."""
    U = np.atleast_2d(coeffs)
    K = (U.shape[1] - 1) // 2
    p = U.real**2 + U.imag**2
    return p[:, :K].sum(axis=1) + p[:, K + 1:].sum(axis=1)


def l2_norm(state):
    return float(np.sqrt(np.sum(np.abs(state.coeffs) ** 2)))


def diagnostics(state, K_partial=None):
    Kp = state.K if K_partial is None else int(K_partial)
    if not 0 < Kp <= state.K:
        raise ValueError(f"K_partial must lie in (0, {state.K}], got {Kp}")
    u0 = state.u0
    return Diagnostics(
        t=state.t,
        mu=u0.imag,
        re_u0=u0.real,
        nu=oscillation_energy(state),
        nu_K=oscillation_energy(state, Kp),
        r_K=remainder(state, Kp),
        l2_norm=l2_norm(state),
    )
