"""int_0^t R_K equals its integration-by-parts expansion, up to quadrature error.

Two readings of one factor are evaluated; only mu^2 + nu makes the identity close.
"""
import numpy as np

from quadnls.analysis import FactorReading, random_regime_state, verify_decomposition
from quadnls.dynamics import SystemForm
from quadnls.integrate import IntegratorConfig, integrate

rng = np.random.default_rng(0)
state = random_regime_state(rng, K=2, mu0=0.2, nu0=0.1)
traj = integrate(state, SystemForm.ROTATING,
                 IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14, max_time=0.3))

print("panels   residual(mu^2+nu)   residual(mu^2+nu^2)")
for panels in (8, 16, 32, 64, 128):
    reps = verify_decomposition(traj, t=0.3, panels=panels, target=1.0)
    print(f"{panels:6d}   {reps[FactorReading.MU2_PLUS_NU].residual:17.3e}"
          f"   {reps[FactorReading.MU2_PLUS_NU2].residual:19.3e}")

rep = verify_decomposition(traj, t=0.3)[FactorReading.MU2_PLUS_NU]
print(f"\nint R_K = {rep.lhs:.12e}\nexpansion = {rep.rhs:.12e}")
