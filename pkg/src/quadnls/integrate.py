"""Adaptive Dormand-Prince 5(4) time stepping with blow-up and mu-zero events."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .dynamics import SystemForm, rhs, state_vector, vector_state
from .spectral import diagnostics, mode_numbers, oscillation_energy, oscillation_rows, remainder_shells

# Dormand-Prince tableau; the 7th stage is the FSAL evaluation at the new point.
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# Continuous extension: y(t + theta h) = y + h K^T P [theta, theta^2, theta^3, theta^4]
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])
ORDER = 5

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_PI_ALPHA = 0.7 / ORDER
_PI_BETA = 0.4 / ORDER
_MIN_STEP = 1e-14
_TINY = 1e-12


class StepUnderflow(RuntimeError):
    """Step size collapsed before the blow-up threshold was reached (suspected blow-up)."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


class InvariantViolation(RuntimeError):
    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 1.0
    blowup_threshold: float = 1e8
    max_time: float = 10.0
    stop_at_mu_zero: bool = False

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "blowup_threshold", "max_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 1e-14 or self.abs_tol < 1e-14:
            raise ValueError("tolerances below 1e-14 are not supported")


class EventKind(Enum):
    MU_ZERO_CROSSING = "MuZeroCrossing"
    BLOWUP = "Blowup"
    MAX_TIME_REACHED = "MaxTimeReached"


@dataclass(frozen=True)
class Event:
    kind: EventKind
    time: float
    detail: str = ""
    bracket: tuple = None
    nu: float = None

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        if self.bracket is not None:
            object.__setattr__(self, "bracket", tuple(float(b) for b in self.bracket))
        if self.nu is not None:
            object.__setattr__(self, "nu", float(self.nu))


class Sample:
    """One stored point of a trajectory; diagnostics are computed from ``state`` on first access."""

    __slots__ = ("t", "state", "k_partial", "_diagnostics")

    def __init__(self, t, state, k_partial=None):
        self.t = t
        self.state = state
        self.k_partial = k_partial
        self._diagnostics = None

    @property
    def diagnostics(self):
        if self._diagnostics is None:
            self._diagnostics = diagnostics(self.state, self.k_partial)
        return self._diagnostics

    def __repr__(self):
        return f"Sample(t={self.t!r}, K={self.state.K})"


@dataclass
class _Segment:
    t: float
    h: float
    y: np.ndarray
    Q: np.ndarray

    def __call__(self, t):
        theta = (t - self.t) / self.h
        return self.y + self.h * (self.Q @ np.array([theta, theta**2, theta**3, theta**4]))


@dataclass
class TrajectoryRecord:
    samples: list
    events: list = field(default_factory=list)
    form: SystemForm = SystemForm.ROTATING
    segments: list = field(default_factory=list, repr=False)
    k_partial: int = None

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    @property
    def coeffs(self):
        """Stacked rotating-frame coefficients of all samples, shape ``(n_samples, 2K+1)``."""
        return np.array([s.state.coeffs for s in self.samples])

    def series(self, name):
        """Diagnostic ``name`` at every sample, evaluated from the stored states."""
        U = self.coeffs
        K = (U.shape[1] - 1) // 2
        Kp = K if self.k_partial is None else self.k_partial
        power = U.real**2 + U.imag**2
        if name == "t":
            return self.times
        if name == "mu":
            return U[:, K].imag
        if name == "re_u0":
            return U[:, K].real
        if name == "nu":
            return oscillation_rows(U)
        if name == "nu_K":
            k = mode_numbers(K)
            return power[:, (k != 0) & (np.abs(k) <= Kp)].sum(axis=1)
        if name == "r_K":
            return remainder_shells(U, self.times)[:, Kp - 1]
        if name == "l2_norm":
            return np.sqrt(power.sum(axis=1))
        raise KeyError(name)

    @property
    def final(self):
        return self.samples[-1]

    @property
    def t_start(self):
        return self.samples[0].t

    @property
    def t_end(self):
        return self.samples[-1].t

    def event(self, kind):
        for ev in self.events:
            if ev.kind is kind:
                return ev
        return None

    def state_at(self, t):
        """Rotating-frame state at time ``t`` from the dense output."""
        if not self.segments:
            raise ValueError("trajectory carries no dense output")
        if not self.t_start <= t <= self.t_end:
            raise ValueError(f"t={t} outside [{self.t_start}, {self.t_end}]")
        starts = [seg.t for seg in self.segments]
        i = max(bisect.bisect_right(starts, t) - 1, 0)
        return vector_state(self.segments[i](t), t, self.form)

    def diagnostics_at(self, t):
        return diagnostics(self.state_at(t), self.k_partial)

    def _stacked(self):
        cache = getattr(self, "_stack_cache", None)
        if cache is None or cache[0] != len(self.segments):
            T = np.array([seg.t for seg in self.segments])
            H = np.array([seg.h for seg in self.segments])
            Y = np.array([seg.y for seg in self.segments])
            Q = np.array([seg.Q for seg in self.segments])
            cache = (len(self.segments), T, H, Y, Q)
            self._stack_cache = cache
        return cache[1:]

    def coeffs_at(self, times):
        """Rotating-frame coefficient rows at each of ``times`` (vectorised dense output)."""
        if not self.segments:
            raise ValueError("trajectory carries no dense output")
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if times.min() < self.t_start or times.max() > self.t_end:
            raise ValueError("requested times fall outside the trajectory")
        T, H, Y, Q = self._stacked()
        idx = np.clip(np.searchsorted(T, times, side="right") - 1, 0, T.size - 1)
        theta = (times - T[idx]) / H[idx]
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=1)
        out = Y[idx] + H[idx, None] * np.einsum("snj,sj->sn", Q[idx], powers)
        if self.form is SystemForm.LAB:
            out = out * np.exp(1j * mode_numbers(Y.shape[1] // 2)[None, :] ** 2 * times[:, None])
        return out

    def gauss_nodes(self, t_stop=None, order=4):
        """Per-step Gauss-Legendre nodes on ``[t_start, t_stop]``.

        Returns ``(tau, weights, coeffs, step)`` where ``step[j]`` is the index of the
        accepted step that node ``j`` belongs to.
        """
        T, H, _, _ = self._stacked()
        t_stop = self.t_end if t_stop is None else t_stop
        x, w = np.polynomial.legendre.leggauss(order)
        x = 0.5 * (x + 1)
        ends = np.minimum(T + H, t_stop)
        live = ends > T
        a, b = T[live], ends[live]
        tau = (a[:, None] + (b - a)[:, None] * x[None, :]).ravel()
        weights = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
        step = np.repeat(np.nonzero(live)[0], order)
        return tau, weights, self.coeffs_at(tau), step


def _initial_step(f, t, y, f0, config, direction_span):
    scale = config.abs_tol + config.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span, config.max_step)
    f1 = f(t + h0, y + h0 * f0)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / ORDER)
    return min(100 * h0, h1, direction_span, config.max_step)


def _mu(y):
    return y[(y.size - 1) // 2].imag


def _bisect_mu_zero(seg, t_lo, t_hi, width):
    lo, hi = t_lo, t_hi
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if _mu(seg(mid)) > 0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def integrate(initial, form=SystemForm.ROTATING, config=None, k_partial=None):
    """Integrate the truncated mode system from ``initial`` until blow-up or ``config.max_time``.

    Returns a :class:`TrajectoryRecord` holding every accepted step (with freshly
    computed diagnostics), the dense output, and the detected events.
    """
    config = IntegratorConfig() if config is None else config
    form = SystemForm(form)
    t = initial.t
    t_end = config.max_time
    if t_end <= t:
        raise ValueError(f"max_time={t_end} must exceed the initial time {t}")

    def f(tt, yy):
        return rhs(form, tt, yy)

    y = state_vector(initial, form)
    n = y.size
    K_mid = (n - 1) // 2
    traj = TrajectoryRecord([Sample(t, initial, k_partial)], form=form, k_partial=k_partial)
    start_u0 = abs(y[K_mid])
    start_nu = oscillation_energy(initial)
    check_t1 = start_u0 >= _TINY or start_nu >= _TINY

    fy = f(t, y)
    h = _initial_step(f, t, y, fy, config, t_end - t)
    err_prev = 1e-4
    rejected = False
    stages = np.empty((7, n), dtype=complex)

    while True:
        if h < _MIN_STEP * max(1.0, abs(t)):
            raise StepUnderflow(
                f"step size {h:.3e} collapsed at t={t:.15g} with max|u_k|={np.abs(y).max():.3e}; "
                "suspected blow-up", traj)
        last = t + h >= t_end
        if last:
            h = t_end - t
        stages[0] = fy
        finite = True
        with np.errstate(over="ignore", invalid="ignore"):
            for i in range(1, 6):
                stages[i] = f(t + _C[i] * h, y + h * (_A[i] @ stages[:i]))
            y_new = y + h * (_B @ stages[:6])
            f_new = f(t + h, y_new)
            stages[6] = f_new
            err = h * (_E @ stages)
            finite = np.all(np.isfinite(y_new)) and np.all(np.isfinite(err))
        if finite:
            scale = config.abs_tol + config.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err_norm = np.sqrt(np.mean(np.abs(err / scale) ** 2))
        else:
            err_norm = np.inf

        if err_norm > 1.0:
            factor = _MIN_FACTOR if not np.isfinite(err_norm) else max(
                _MIN_FACTOR, _SAFETY * err_norm ** (-1 / ORDER))
            h *= factor
            rejected = True
            continue

        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err_norm ** (-_PI_ALPHA) * err_prev**_PI_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        if rejected:
            factor = min(1.0, factor)
        err_prev = max(err_norm, 1e-4)
        rejected = False

        t_new = float(t_end if last else t + h)
        seg = _Segment(t, h, y.copy(), stages.T @ _P)
        traj.segments.append(seg)
        state = vector_state(y_new, t_new, form)
        mu_old, mu_new = _mu(y), _mu(y_new)
        traj.samples.append(Sample(t_new, state, k_partial))

        if mu_new > mu_old + 10 * (config.abs_tol + config.rel_tol * abs(mu_old)):
            raise InvariantViolation(
                f"mu increased from {mu_old!r} to {mu_new!r} at t={t_new}", traj)
        if check_t1 and abs(y_new[K_mid]) < _TINY and oscillation_energy(state) < _TINY:
            raise InvariantViolation(
                f"u_0 and nu vanished simultaneously at t={t_new} from nonzero data", traj)

        if mu_old > 0 >= mu_new:
            width = config.rel_tol * max(1.0, abs(t_new))
            lo, hi = _bisect_mu_zero(seg, t, t_new, width)
            t0 = 0.5 * (lo + hi)
            nu0 = oscillation_energy(vector_state(seg(t0), t0, form))
            traj.events.append(Event(EventKind.MU_ZERO_CROSSING, t0,
                                     f"mu changes sign in [{lo!r}, {hi!r}]", (lo, hi), nu0))
            if config.stop_at_mu_zero:
                return traj

        peak = np.abs(y_new).max()
        if peak >= config.blowup_threshold:
            traj.events.append(Event(
                EventKind.BLOWUP, t_new,
                f"max|u_k| = {peak:.6e} crossed threshold {config.blowup_threshold:g}; "
                "time is a lower bound for the blow-up time"))
            return traj
        if last:
            traj.events.append(Event(EventKind.MAX_TIME_REACHED, t_new))
            return traj

        t, y, fy = t_new, y_new, f_new
        h = min(h * factor, config.max_step)


def locate_mu_zero(traj):
    """First time ``T0`` where ``mu`` reaches zero, with ``nu(T0)``; ``None`` if mu stays positive.

    Uses the recorded crossing event when the integrator found one, bisection on
    the dense output when available, and linear interpolation between samples otherwise.
    """
    ev = traj.event(EventKind.MU_ZERO_CROSSING)
    if ev is not None:
        return ev.time, ev.nu
    mu = traj.series("mu")
    idx = np.nonzero((mu[:-1] > 0) & (mu[1:] <= 0))[0]
    if idx.size == 0:
        return None
    i = idx[0]
    t0, t1 = traj.samples[i].t, traj.samples[i + 1].t
    if traj.segments:
        width = 1e-14 * max(1.0, abs(t1))
        lo, hi = t0, t1
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if traj.state_at(mid).u0.imag > 0:
                lo = mid
            else:
                hi = mid
        T0 = 0.5 * (lo + hi)
        return T0, oscillation_energy(traj.state_at(T0))
    T0 = t0 + mu[i] * (t1 - t0) / (mu[i] - mu[i + 1])
    nu = traj.series("nu")
    w = (T0 - t0) / (t1 - t0)
    return T0, float((1 - w) * nu[i] + w * nu[i + 1])
