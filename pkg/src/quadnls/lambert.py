"""Principal-branch Lambert W and the comparison barrier built from it.

The barrier solves the separable equation

    f'(s) = -2 (mu0 - s) f(s) / ((mu0 - s)^2 + f(s)),   f(0) = f0,

in closed form as f(s) = (mu0 - s)^2 / W(C1 (mu0 - s)^2) with
C1 = exp(mu0^2 / f0) / f0, and g(s) = exp(3 B (mu0 - s)) f(s).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import REGIME_TOL, RegimeViolation
from .integrate import locate_mu_zero

_MAX_ITER = 50
_LOG_MAX = math.log(np.finfo(float).max)


class NoConvergence(ArithmeticError):
    pass


class BarrierOverflow(OverflowError):
    pass


class NoZeroCrossing(RuntimeError):
    pass


def lambert_w0(x):
    """Principal branch W0 on ``x >= 0`` by Halley iteration.

    Seeds with ``x - x^2 + 1.5 x^3`` for small arguments, ``log1p(x)`` up to ``e``
    and the asymptotic ``L1 - L2 + L2/L1`` (``L1 = log x``, ``L2 = log L1``) beyond.
    Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0) or np.any(np.isinf(x)):
        raise ValueError("lambert_w0 is defined here for finite x >= 0 only")
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    w = np.log1p(x)
    small = x < 0.25
    w[small] = x[small] * (1 - x[small] * (1 - 1.5 * x[small]))
    big = x > math.e
    L1 = np.log(x[big])
    L2 = np.log(L1)
    w[big] = L1 - L2 + L2 / L1

    for _ in range(_MAX_ITER):
        ew = np.exp(w)
        resid = w * ew - x
        wp1 = w + 1
        dw = resid / (ew * wp1 - (w + 2) * resid / (2 * wp1))
        w = w - dw
        if np.all(np.abs(dw) <= 4 * np.finfo(float).eps * np.abs(w)):
            break
    else:
        raise NoConvergence(f"Halley iteration did not settle in {_MAX_ITER} steps")
    return float(w[0]) if scalar else w


def _log_c1(mu0, f0):
    return mu0 * mu0 / f0 - math.log(f0)


def barrier_constant(mu0, f0):
    """``C1 = exp(mu0^2 / f0) / f0``; raises :class:`BarrierOverflow` when not representable."""
    if _log_c1(mu0, f0) + 2 * math.log(max(mu0, 1e-300)) >= _LOG_MAX:
        floor = mu0 * mu0 / (_LOG_MAX - 2 * math.log(max(mu0, 1e-300)) + math.log(f0))
        raise BarrierOverflow(
            f"exp(mu0^2/f0) overflows for mu0={mu0:g}, f0={f0:g}; "
            f"f0 must be at least about {floor:.3e}")
    return math.exp(mu0 * mu0 / f0) / f0


def barrier_f(s, mu0, f0):
    """Evaluate f(s) on ``0 <= s <= mu0``; the endpoint uses the limit ``f0 exp(-mu0^2/f0)``."""
    s = np.asarray(s, dtype=float)
    C1 = barrier_constant(mu0, f0)
    d = mu0 - s
    out = np.empty_like(d)
    end = d <= 0
    out[end] = f0 * math.exp(-mu0 * mu0 / f0)
    dd = d[~end] ** 2
    out[~end] = dd / lambert_w0(C1 * dd)
    return out


def barrier_g(s, mu0, f0, B):
    s = np.asarray(s, dtype=float)
    return np.exp(3 * B * (mu0 - s)) * barrier_f(s, mu0, f0)


def barrier_rhs(s, f, mu0):
    """Right side of the barrier equation, ``-2 (mu0 - s) f / ((mu0 - s)^2 + f)``."""
    d = mu0 - np.asarray(s, dtype=float)
    return -2 * d * f / (d * d + f)


@dataclass(frozen=True)
class ComparisonCurve:
    mu0: float
    f0: float
    B: float
    C1: float
    s: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    @property
    def samples(self):
        return list(zip(self.s.tolist(), self.f.tolist(), self.g.tolist()))

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.s, self.f, self.g]), delimiter=",",
                   header="s,f,g", comments="", fmt="%.17g")


def barrier_curve(mu0, f0, B, n_samples=65):
    if not (mu0 > 0 and f0 > 0 and B > 0):
        raise ValueError("mu0, f0 and B must be positive")
    if n_samples < 16:
        raise ValueError("n_samples must be at least 16")
    s = np.linspace(0.0, mu0, n_samples)
    f = barrier_f(s, mu0, f0)
    g = np.exp(3 * B * (mu0 - s)) * f
    return ComparisonCurve(mu0, f0, B, barrier_constant(mu0, f0), s, f, g)


@dataclass(frozen=True)
class BarrierCheck:
    ode_residual: float
    g_min_slack: float
    ode_ok: bool
    g_ok: bool

    @property
    def ok(self):
        return self.ode_ok and self.g_ok


def verify_barrier_ode(curve, fd_step=None, ode_tol=1e-6, g_slack=1e-8):
    """Compare central differences of f and g against the barrier equation on interior samples.

    ``ode_residual`` is the largest ``|f'_fd - rhs|``; ``g_min_slack`` is the smallest
    value of ``rhs_g + 3 B g + g_slack - g'_fd`` where ``rhs_g`` uses g in place of f.
    """
    if curve.s.size < 64:
        raise ValueError("verify_barrier_ode needs at least 64 samples")
    mu0, f0, B = curve.mu0, curve.f0, curve.B
    h = mu0 * 1e-5 if fd_step is None else fd_step
    s = curve.s[1:-1]
    fp = (barrier_f(s + h, mu0, f0) - barrier_f(s - h, mu0, f0)) / (2 * h)
    residual = float(np.max(np.abs(fp - barrier_rhs(s, curve.f[1:-1], mu0))))
    gp = (barrier_g(s + h, mu0, f0, B) - barrier_g(s - h, mu0, f0, B)) / (2 * h)
    g = curve.g[1:-1]
    bound = barrier_rhs(s, g, mu0) - 3 * B * g + g_slack
    slack = float(np.min(bound - gp))
    return BarrierCheck(residual, slack, residual <= ode_tol, slack >= 0)


@dataclass(frozen=True)
class ComparisonReport:
    T0: float
    nu_T0: float
    f0: float
    g_at_mu0: float
    pointwise_ok: bool
    min_margin: float
    terminal_ok: bool
    integral_slack: float
    s: np.ndarray = field(repr=False)
    V: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)

    @property
    def ok(self):
        return self.pointwise_ok and self.terminal_ok


def comparison_lower_bound(traj, consts, delta, safety=0.9):
    """Check ``nu(t) >= g(mu0 - mu(t))`` up to the first zero of mu and ``nu(T0) >= g(mu0)``.

    ``f0`` is taken as ``safety * exp(-3 B mu0) * delta``. ``integral_slack`` is the
    smallest margin in ``V(s) >= delta - int_0^s [2 (mu0-r) V / ((mu0-r)^2 + V) + 3 B V] dr``
    along the trajectory (reported, not enforced).
    """
    first = traj.samples[0].diagnostics
    if abs(first.re_u0) > REGIME_TOL or not first.mu > 0:
        raise RegimeViolation("comparison needs Re u_0 = 0 and mu0 > 0 initially")
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    hit = locate_mu_zero(traj)
    if hit is None:
        raise NoZeroCrossing("mu stays positive on the whole trajectory")
    T0, nu_T0 = hit
    mu0, B = first.mu, consts.B
    f0 = safety * math.exp(-3 * B * mu0) * delta

    t = traj.times
    keep = t < T0
    s = np.append(mu0 - traj.series("mu")[keep], mu0)
    V = np.append(traj.series("nu")[keep], nu_T0)
    if np.any(np.diff(s) < 0):
        raise RegimeViolation("s = mu0 - mu(t) is not monotone along the trajectory")
    s = np.clip(s, 0.0, mu0)
    g = barrier_g(s, mu0, f0, B)
    margin = V - g

    d = mu0 - s
    integrand = 2 * d * V / (d * d + V) + 3 * B * V
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(s))])
    integral_slack = float(np.min(V - (delta - cum)))

    return ComparisonReport(
        T0=T0, nu_T0=nu_T0, f0=f0, g_at_mu0=float(g[-1]),
        pointwise_ok=bool(np.all(margin >= 0)), min_margin=float(margin.min()),
        terminal_ok=bool(nu_T0 >= g[-1] and nu_T0 > 0), integral_slack=integral_slack,
        s=s, V=V, g=g)
