"""Small data with Im u_0 > 0 still blows up once oscillation is present.

mu starts at 1e-3 and would decay forever on its own, but nu = sum_{k != 0} |u_k|^2
drags it through zero. At that moment nu is still bounded below by the
Lambert-W barrier, and from there on the zero mode runs away.
"""
import math

from quadnls.analysis import derive_constants, monitor_smallness
from quadnls.dynamics import SystemForm
from quadnls.integrate import EventKind, IntegratorConfig, integrate
from quadnls.lambert import comparison_lower_bound
from quadnls.spectral import SpectralState

mu0 = nu0 = 1e-3
eps = math.sqrt(nu0 / 2)
state = SpectralState.from_modes({0: 1j * mu0, 1: eps, -1: eps}, K=8)

consts = derive_constants()
print(f"constants A = {consts.A:.4f}, B = {consts.B:.4f}")
print(f"  ({consts.provenance})")

traj = integrate(state, SystemForm.ROTATING,
                 IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14, max_time=1000))
cross = traj.event(EventKind.MU_ZERO_CROSSING)
blow = traj.event(EventKind.BLOWUP)
print(f"\nmu reaches zero at T0 = {cross.time:.6f} with nu(T0) = {cross.nu:.6e}")
print(f"max|u_k| passes 1e8 at t = {blow.time:.4f}")

small = monitor_smallness(traj, consts)
print(f"\nsmallness left side {small.smallness_lhs:.3f} (< 1/2: {small.satisfied})")
print(f"sup nu before T0 = {small.running_sup_nu:.6e} <= 2 nu0 = {2 * nu0:.1e}")
print(f"delta = {small.delta:.4e}")

cmp = comparison_lower_bound(traj, consts, small.delta)
print(f"\nbarrier f0 = {cmp.f0:.4e}, g(mu0) = {cmp.g_at_mu0:.4e}")
print(f"nu(T0) - g(mu0) = {cmp.nu_T0 - cmp.g_at_mu0:.4e}   pointwise ok: {cmp.pointwise_ok}")
