import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from quadnls.spectral import (
    GridTooCoarse,
    PhysicalField,
    SpectralState,
    analyze,
    diagnostics,
    from_lab_frame,
    nonlinearity_modes,
    oscillation_energy,
    remainder,
    remainder_shells,
    synthesize,
    to_lab_frame,
)

from conftest import random_state


def complex_coeffs(K, bound=1.0):
    parts = hnp.arrays(float, 2 * (2 * K + 1), elements=st.floats(-bound, bound))
    return parts.map(lambda a: a[: 2 * K + 1] + 1j * a[2 * K + 1 :])


def brute_remainder(state, Kp):
    # Independent triple loop over the mode indices.
    K, t = state.K, state.t
    total = 0j
    for k in range(-Kp, Kp + 1):
        if k == 0:
            continue
        for l in range(-K, K + 1):
            if l == 0 or abs(k + l) > K:
                continue
            total += (np.conj(state[k]) * np.conj(state[l]) * state[k + l]
                      * np.exp(-2j * k * l * t))
    return total.imag


# --------------------------------------------------------------------------- state type

def test_state_validates_length_and_finiteness():
    with pytest.raises(ValueError):
        SpectralState(0.0, 2, np.zeros(4))
    with pytest.raises(ValueError):
        SpectralState(0.0, 1, [0, np.nan, 0])
    with pytest.raises(ValueError):
        SpectralState(0.0, 0, [0])
    with pytest.raises(ValueError):
        SpectralState.from_modes({3: 1.0}, 2)


def test_state_is_read_only_and_indexed_by_mode():
    s = SpectralState.from_modes({-1: 2.0, 0: 1j}, 2)
    assert s[-1] == 2 and s.u0 == 1j and s[5] == 0
    with pytest.raises(ValueError):
        s.coeffs[0] = 1.0
    assert s.as_dict() == {-2: 0j, -1: 2 + 0j, 0: 1j, 1: 0j, 2: 0j}


# --------------------------------------------------------------------------- frames

def test_lab_frame_identity_at_zero_time(rng):
    s = random_state(rng, 5)
    assert np.array_equal(to_lab_frame(s), s.coeffs)


def test_lab_frame_phase_at_pi():
    s = SpectralState.from_modes({1: 1.0}, 2, t=math.pi)
    lab = to_lab_frame(s)
    assert abs(lab[3] - (-1)) < 1e-15


@given(complex_coeffs(4, 10.0), st.floats(-50, 50))
def test_lab_frame_round_trip(c, t):
    s = SpectralState(t, 4, c)
    back = from_lab_frame(to_lab_frame(s), t)
    assert np.max(np.abs(back.coeffs - s.coeffs)) <= 1e-15 * max(1.0, np.abs(c).max())


# --------------------------------------------------------------------------- grid transforms

def test_synthesize_constant_mode():
    f = synthesize(SpectralState.from_modes({0: 0.7j}, 3))
    assert np.allclose(f.samples, 0.7j, atol=1e-15, rtol=0)


def test_synthesize_single_mode():
    f = synthesize(SpectralState.from_modes({1: 1.0}, 2), M=8)
    assert np.max(np.abs(f.samples - np.exp(1j * f.x))) < 1e-15
    assert f.M == 8 and abs(f.x[1] - 2 * math.pi / 8) < 1e-15


def test_grid_too_coarse():
    s = SpectralState.zeros(4)
    with pytest.raises(GridTooCoarse):
        synthesize(s, M=8)
    with pytest.raises(GridTooCoarse):
        analyze(PhysicalField(np.zeros(8)), 4)


def test_analyze_examples():
    x = 2 * np.pi * np.arange(16) / 16
    assert np.allclose(analyze(PhysicalField(np.full(16, 1j)), 3).coeffs,
                       [0, 0, 0, 1j, 0, 0, 0], atol=1e-15)
    s = analyze(PhysicalField(np.exp(1j * x)), 3)
    assert abs(s[1] - 1) < 1e-15 and np.sum(np.abs(s.coeffs)) - 1 < 1e-14


def test_round_trip_random_K8_M32(rng):
    for _ in range(20):
        s = random_state(rng, 8, t=rng.uniform(0, 5))
        back = analyze(synthesize(s, 32), 8, s.t)
        assert np.max(np.abs(back.coeffs - s.coeffs)) <= 1e-14


@settings(max_examples=50)
@given(complex_coeffs(3), st.integers(7, 40), st.floats(0, 10))
def test_round_trip_any_admissible_grid(c, M, t):
    s = SpectralState(t, 3, c)
    assert np.max(np.abs(analyze(synthesize(s, M), 3, t).coeffs - c)) <= 1e-14


# --------------------------------------------------------------------------- nonlinearity

def test_nonlinearity_constant():
    N = nonlinearity_modes(SpectralState.from_modes({0: 1.5j}, 3))
    assert abs(N[3] - 2.25) < 1e-15
    assert np.all(np.delete(N, 3) == 0)


def test_nonlinearity_single_mode():
    a = 0.3 - 0.4j
    N = nonlinearity_modes(SpectralState.from_modes({1: a}, 3, t=0.7))
    assert abs(N[3] - abs(a) ** 2) < 1e-16
    assert abs(N[2]) == 0 and abs(N[4]) == 0


def test_nonlinearity_matches_grid_quadrature(rng):
    K, M = 4, 64
    for _ in range(10):
        s = random_state(rng, K, t=rng.uniform(0, 3))
        u = synthesize(s, M)
        x = u.x
        k = s.modes
        lab = np.array([np.mean(np.abs(u.samples) ** 2 * np.exp(-1j * kk * x)) for kk in k])
        oracle = lab * np.exp(1j * k**2 * s.t)
        assert np.max(np.abs(nonlinearity_modes(s) - oracle)) <= 1e-12


@given(complex_coeffs(3), st.floats(0, 10))
def test_nonlinearity_reality_symmetry(c, t):
    # |u|^2 is real, so its lab coefficients satisfy L_{-k} = conj(L_k).
    s = SpectralState(t, 3, c)
    N = nonlinearity_modes(s)
    k = s.modes
    assert np.allclose(N, np.conj(N[::-1]) * np.exp(2j * k**2 * t), atol=1e-13)
    assert abs(N[3].imag) < 1e-13 and N[3].real >= -1e-13


# --------------------------------------------------------------------------- diagnostics

def test_diagnostics_constant_state():
    d = diagnostics(SpectralState.from_modes({0: 1j}, 4), 4)
    assert (d.mu, d.re_u0, d.nu, d.nu_K, d.r_K, d.l2_norm) == (1.0, 0.0, 0.0, 0.0, 0.0, 1.0)


def test_diagnostics_pair():
    eps = 0.05
    d = diagnostics(SpectralState.from_modes({0: 1j, 1: eps, -1: eps}, 4), 4)
    assert abs(d.nu - 2 * eps**2) < 1e-17
    assert d.nu_K == d.nu


def test_diagnostics_rejects_bad_partial():
    with pytest.raises(ValueError):
        diagnostics(SpectralState.zeros(2), 3)


def test_remainder_matches_triple_loop(rng):
    for K in (2, 4, 6):
        for _ in range(5):
            s = random_state(rng, K, t=rng.uniform(0, 4))
            for Kp in range(1, K + 1):
                assert abs(remainder(s, Kp) - brute_remainder(s, Kp)) <= 1e-13


def test_remainder_shells_match_single_evaluations(rng):
    K = 5
    states = [random_state(rng, K, t=rng.uniform(0, 2)) for _ in range(6)]
    shells = remainder_shells(np.array([s.coeffs for s in states]), [s.t for s in states])
    for row, s in zip(shells, states):
        assert np.allclose(row, [remainder(s, Kp) for Kp in range(1, K + 1)], atol=1e-14, rtol=0)


@given(complex_coeffs(4), st.integers(1, 4), st.floats(0, 5))
def test_diagnostics_invariants(c, Kp, t):
    s = SpectralState(t, 4, c)
    d = diagnostics(s, Kp)
    assert d.nu >= 0 and d.nu_K >= 0 and d.nu_K <= d.nu + 1e-15
    assert abs(d.l2_norm**2 - (d.nu + abs(s.u0) ** 2)) <= 1e-12 * max(1, d.l2_norm**2)
    assert oscillation_energy(s) == d.nu
