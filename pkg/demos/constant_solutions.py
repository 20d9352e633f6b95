"""Spatially constant data: the zero mode obeys mu' = -mu^2 exactly.

u(0) = i decays like i/(1+t); u(0) = -i runs off to infinity at t = 1.
"""
import numpy as np

from quadnls.analysis import blowup_time, explicit_solution
from quadnls.dynamics import SystemForm
from quadnls.integrate import EventKind, IntegratorConfig, integrate
from quadnls.spectral import SpectralState

state = SpectralState.from_modes({0: 1j}, K=4)
traj = integrate(state, SystemForm.ROTATING, IntegratorConfig(rel_tol=1e-10, max_time=10))

t = traj.times
err = np.abs(traj.coeffs[:, 4] - np.array([explicit_solution(2, 1.0, s) for s in t]))
print(f"u(0) = i: {len(t) - 1} steps to t = 10, max |u_0 - i/(1+t)| = {err.max():.2e}")
print(f"  mu(10) = {traj.final.diagnostics.mu:.12f}   (1/11 = {1 / 11:.12f})")

# The blow-up event time is a lower bound; it creeps up to 1 as the threshold grows.
print(f"\nu(0) = -i, exact blow-up time {blowup_time(2, -1.0)}")
for threshold in (1e4, 1e6, 1e8):
    traj = integrate(SpectralState.from_modes({0: -1j}, 4), SystemForm.ROTATING,
                     IntegratorConfig(blowup_threshold=threshold))
    ev = traj.event(EventKind.BLOWUP)
    print(f"  threshold {threshold:.0e}: |u_0| crossed it at t = {ev.time:.10f}")

# Other exponents: i u_t = |u|^p with u = i y gives y' = -|y|^p.
for p in (2, 3, 4):
    print(f"p = {p}: u(0) = -i blows up at t = {blowup_time(p, -1.0):.4f}, "
          f"u(0) = i gives u(1) = {explicit_solution(p, 1.0, 1.0):.6f}")
