import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st
from scipy.integrate import solve_ivp

from quadnls.analysis import (
    FactorReading,
    LemmaConstants,
    PastBlowup,
    QuadratureTooCoarse,
    Regime,
    blowup_multiplier,
    blowup_time,
    candidate_constants,
    classify,
    explicit_solution,
    monitor_smallness,
    quadrilinear_sum_shifted,
    quadrilinear_sum_triple,
    random_regime_state,
    remainder_bound_check,
    riccati_bound,
    smallness_lhs,
    sum_constants_check,
    trilinear_sum,
    verify_decomposition,
)
from quadnls.dynamics import RegimeViolation, SystemForm
from quadnls.integrate import IntegratorConfig, integrate
from quadnls.spectral import SpectralState

ROT = SystemForm.ROTATING


def const(c, K=3):
    return SpectralState.from_modes({0: c}, K)


# --------------------------------------------------------------------------- classifier

@pytest.mark.parametrize("data, regime", [
    ({0: 2j}, Regime.GLOBAL_CONSTANT),
    ({0: 1j}, Regime.GLOBAL_CONSTANT),
    ({0: 0}, Regime.GLOBAL_CONSTANT),
    ({0: -1j}, Regime.BLOWUP_NEGATIVE_IM),
    ({0: 1}, Regime.BLOWUP_NONZERO_RE),
    ({0: 1 + 1j}, Regime.BLOWUP_NONZERO_RE),
    ({1: 1}, Regime.BLOWUP_ZERO_MEAN),
    ({0: 1e-3j, 1: 1e-2}, Regime.BLOWUP_OSCILLATORY),
    ({0: 1 - 1j, 2: 0.5}, Regime.BLOWUP_NEGATIVE_IM),
])
def test_classifier_regimes(data, regime):
    assert classify(SpectralState.from_modes(data, 3)).regime is regime


def test_real_constant_gets_valid_multiplier():
    v = classify(const(1.0))
    assert v.alpha.real > 0 and (v.alpha * 1.0).imag < 0
    assert v.predicted_blowup_upper is not None and v.predicted_blowup_upper > 0


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_multiplier_property(re, im):
    c = complex(re, im)
    assume(abs(c) > 1e-6)
    assume(im < 0 or abs(re) > 1e-6 * abs(c))
    v = classify(const(c))
    assert v.alpha is not None
    assert abs(abs(v.alpha) - 1) < 1e-12
    assert v.alpha.real > 0 and (v.alpha * c).imag < 0
    M0 = -(v.alpha * c).imag
    assert abs(v.predicted_blowup_upper - riccati_bound(M0, v.alpha.real)) < 1e-12


def test_multiplier_undefined_on_positive_axis():
    assert blowup_multiplier(0) is None
    assert blowup_multiplier(2j) is None
    assert blowup_multiplier(-2j) == 1


def test_negative_constant_bound_is_exact():
    # For c = -i mu the multiplier is 1 and the Riccati bound equals the true blow-up time.
    for mu in (0.5, 1.0, 4.0):
        v = classify(const(-1j * mu))
        assert abs(v.predicted_blowup_upper - blowup_time(2, -mu)) < 1e-14


def test_alpha_present_only_for_mean_regimes(rng):
    for _ in range(50):
        c = rng.normal(size=7) + 1j * rng.normal(size=7)
        v = classify(SpectralState(0.0, 3, c))
        has = v.regime in (Regime.BLOWUP_NEGATIVE_IM, Regime.BLOWUP_NONZERO_RE)
        assert (v.alpha is not None) == has


# --------------------------------------------------------------------------- explicit solutions

def test_explicit_examples():
    assert abs(explicit_solution(2, 1.0, 1.0) - 0.5j) < 1e-16
    assert explicit_solution(2, 0.0, 7.0) == 0
    assert blowup_time(2, -1.0) == 1.0 and blowup_time(2, 1.0) == math.inf
    with pytest.raises(PastBlowup):
        explicit_solution(2, -1.0, 1.0)
    with pytest.raises(ValueError):
        explicit_solution(1.0, 1.0, 1.0)


@pytest.mark.parametrize("p", [2.0, 3.0, 2.5])
@pytest.mark.parametrize("mu0", [0.7, -0.7])
def test_explicit_solution_solves_ode(p, mu0):
    # i u_t = |u|^p for spatially constant u, checked by central differences.
    T = blowup_time(p, mu0)
    h = 1e-5
    for t in np.linspace(0.0, min(2.0, 0.9 * T), 7)[1:]:
        u = explicit_solution(p, mu0, t)
        du = (explicit_solution(p, mu0, t + h) - explicit_solution(p, mu0, t - h)) / (2 * h)
        assert abs(1j * du - abs(u) ** p) <= 1e-7 * max(1.0, abs(u) ** p)
    assert abs(explicit_solution(p, mu0, 0.0) - 1j * mu0) < 1e-15


def test_p3_blowup_time():
    assert abs(blowup_time(3, -1.0) - 0.5) < 1e-15
    assert abs(blowup_time(3, -2.0) - 0.125) < 1e-15


# --------------------------------------------------------------------------- Riccati bound

def test_riccati_examples():
    assert riccati_bound(1, 1) == 1
    assert riccati_bound(2, 1) == 0.5
    assert abs(riccati_bound(1, 2, 3) - 0.25) < 1e-15
    with pytest.raises(ValueError):
        riccati_bound(0, 1)
    with pytest.raises(ValueError):
        riccati_bound(1, 1, 1)


def test_riccati_p3_against_ode_solver():
    big = 1e6

    def hit(t, m):
        return m[0] - big
    hit.terminal = True

    sol = solve_ivp(lambda t, m: 2 * m**3, (0, 1), [1.0], events=hit, rtol=1e-12, atol=1e-12)
    t_big = sol.t_events[0][0]
    # the equality solution reaches M = big at bound - big^-2 / 4
    assert abs(t_big - (riccati_bound(1, 2, 3) - big**-2 / 4)) < 1e-9


# --------------------------------------------------------------------------- summation estimates

def brute_trilinear(a, b, c):
    K = (len(a) - 1) // 2
    seq = lambda x, j: x[j + K] if 0 < abs(j) <= K else 0.0  # noqa: E731
    return sum(seq(a, k) * seq(b, l) * seq(c, k + l) / abs(k * l)
               for k in range(-K, K + 1) for l in range(-K, K + 1)
               if k and l and k + l)


def brute_shifted(a, b, c, d):
    K = (len(a) - 1) // 2
    seq = lambda x, j: x[j + K] if 0 < abs(j) <= K else 0.0  # noqa: E731
    total = 0.0
    for k in range(-2 * K, 2 * K + 1):
        for l in range(-K, K + 1):
            for m in range(-K, K + 1):
                if k and l and m and l + k and m + k:
                    total += seq(a, m) * seq(b, m + k) * seq(c, l) * seq(d, l + k) / abs(k * l)
    return total


def brute_triple(a, b, c, d):
    K = (len(a) - 1) // 2
    seq = lambda x, j: x[j + K] if 0 < abs(j) <= K else 0.0  # noqa: E731
    total = 0.0
    for k in range(-K, K + 1):
        for l in range(-K, K + 1):
            for m in range(-K, K + 1):
                if k and l and m and m + k + l:
                    total += seq(a, k) * seq(b, l) * seq(c, m) * seq(d, m + k + l) / abs(k * l)
    return total


def test_sums_match_brute_force(rng):
    for K in (1, 3, 5):
        for _ in range(3):
            a, b, c, d = (rng.random(2 * K + 1) for _ in range(4))
            assert abs(trilinear_sum(a, b, c) - brute_trilinear(a, b, c)) < 1e-12
            assert abs(quadrilinear_sum_shifted(a, b, c, d) - brute_shifted(a, b, c, d)) < 1e-12
            assert abs(quadrilinear_sum_triple(a, b, c, d) - brute_triple(a, b, c, d)) < 1e-12


def test_sums_vanish_on_zero_sequences():
    z = np.zeros(9)
    assert trilinear_sum(z, z, z) == 0
    assert quadrilinear_sum_shifted(z, z, z, z) == 0
    assert quadrilinear_sum_triple(z, z, z, z) == 0


def test_partial_sum_K10():
    rep = sum_constants_check(10, trials=4)
    assert abs(rep.partial_sum - 1.5497677311665408) < 1e-15
    assert abs(math.pi**2 / 6 - rep.partial_sum) < 0.1 and rep.tail_ok


def test_estimates_hold_on_random_sequences():
    rep = sum_constants_check(16, trials=100, seed=3)
    assert rep.ok and all(m >= 0 for m in rep.margins)
    with pytest.raises(ValueError):
        sum_constants_check(5)


# --------------------------------------------------------------------------- remainder constants

def test_candidate_constants_values():
    c = candidate_constants()
    assert abs(c.A - math.pi / (2 * math.sqrt(3))) < 1e-15
    assert abs(c.B - 4 * math.pi / math.sqrt(3)) < 1e-14
    with pytest.raises(ValueError):
        LemmaConstants(0, 1)


def test_bound_trivial_on_zero_and_constant_data():
    consts = LemmaConstants(1.0, 1.0)
    for state in (SpectralState.zeros(3), const(0.5j)):
        traj = integrate(state, ROT, IntegratorConfig(max_time=2.0))
        check = remainder_bound_check(traj, consts)
        assert check.holds and np.all(check.lhs == 0) and check.worst_ratio == 0


def test_derived_constants_hold_on_fresh_ensemble(derived_constants):
    assert derived_constants.A > 0 and derived_constants.B > 0
    assert "trials" in derived_constants.provenance
    rng = np.random.default_rng(99)
    cfg = IntegratorConfig(rel_tol=1e-9, abs_tol=1e-13, max_time=10, stop_at_mu_zero=True)
    for _ in range(10):
        state = random_regime_state(rng, 3, 10 ** rng.uniform(-3, -0.5), 10 ** rng.uniform(-5, -1))
        assert remainder_bound_check(integrate(state, ROT, cfg), derived_constants).holds


# --------------------------------------------------------------------------- smallness

def test_smallness_constant_data(derived_constants):
    traj = integrate(const(0.01j), ROT, IntegratorConfig(max_time=5))
    rep = monitor_smallness(traj, derived_constants)
    assert rep.running_sup_nu == 0 and rep.sup_bound_ok and rep.nu0 == 0


def test_smallness_large_data_not_satisfied():
    consts = candidate_constants()
    assert smallness_lhs(10, 0.0, consts) > 0.5
    traj = integrate(const(10j), ROT, IntegratorConfig(max_time=1))
    rep = monitor_smallness(traj, consts)
    assert not rep.satisfied


def test_smallness_small_pair(derived_constants):
    eps = math.sqrt(1e-3 / 2)
    state = SpectralState.from_modes({0: 1e-3j, 1: eps, -1: eps}, 8)
    traj = integrate(state, ROT, IntegratorConfig(max_time=100, stop_at_mu_zero=True))
    rep = monitor_smallness(traj, derived_constants)
    assert rep.satisfied == (rep.smallness_lhs < 0.5) and rep.satisfied
    assert rep.running_sup_nu <= 2 * rep.nu0 and rep.delta > 0


def test_smallness_regime_checked():
    traj = integrate(const(1 + 1j), SystemForm.LAB, IntegratorConfig(max_time=0.1))
    with pytest.raises(RegimeViolation):
        monitor_smallness(traj, candidate_constants())


# --------------------------------------------------------------------------- decomposition

def decomposition_run(seed, K=2, t=0.1, mu0=0.2, nu0=0.05):
    state = random_regime_state(np.random.default_rng(seed), K, mu0, nu0)
    cfg = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_time=t)
    return integrate(state, ROT, cfg)


def test_decomposition_zero_and_constant():
    for state in (SpectralState.zeros(2), const(0.3j, 2)):
        traj = integrate(state, ROT, IntegratorConfig(max_time=0.1))
        for rep in verify_decomposition(traj).values():
            assert rep.lhs == 0 and rep.rhs == 0 and rep.residual == 0


@pytest.mark.parametrize("seed", range(5))
def test_decomposition_consistent_reading(seed):
    reports = verify_decomposition(decomposition_run(seed), t=0.1)
    good = reports[FactorReading.MU2_PLUS_NU]
    assert good.residual <= 1e-6 and good.K == 2 and good.panels == 64
    # the other reading is reported too; on this data it is clearly worse
    assert reports[FactorReading.MU2_PLUS_NU2].residual > 100 * good.residual


def test_decomposition_refinement_order():
    traj = decomposition_run(7, mu0=0.3, nu0=0.2, t=0.3)
    res = [verify_decomposition(traj, panels=n, target=1.0)[FactorReading.MU2_PLUS_NU].residual
           for n in (8, 16, 32)]
    rates = [math.log2(res[i] / res[i + 1]) for i in range(2)]
    assert min(rates) >= 3.0


def test_decomposition_partial_shells():
    traj = decomposition_run(1, K=3)
    for Kp in (1, 2, 3):
        assert verify_decomposition(traj, K=Kp)[FactorReading.MU2_PLUS_NU].residual <= 1e-6


def test_decomposition_errors():
    traj = decomposition_run(2, mu0=0.5, nu0=0.5, t=0.5)
    with pytest.raises(QuadratureTooCoarse):
        verify_decomposition(traj, panels=4, target=1e-14)
    with pytest.raises(ValueError):
        verify_decomposition(traj, panels=6)
    with pytest.raises(ValueError):
        verify_decomposition(traj, K=5)
    lab = integrate(const(1 + 1j, 2), SystemForm.LAB, IntegratorConfig(max_time=0.1))
    with pytest.raises(RegimeViolation):
        verify_decomposition(lab)
