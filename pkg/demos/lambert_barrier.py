"""The comparison barrier f(s) = (mu0 - s)^2 / W(C1 (mu0 - s)^2)."""
import math
import sys

import numpy as np

from quadnls.lambert import barrier_curve, lambert_w0, verify_barrier_ode

for sigma in (0.1, 1, 5, 20):
    print(f"W({sigma} e^{sigma}) - {sigma} = {lambert_w0(sigma * math.exp(sigma)) - sigma:.1e}")

x = np.logspace(-12, 12, 7)
print("x      ", np.array2string(x, precision=1))
print("W(x)   ", np.array2string(lambert_w0(x), precision=4))

mu0, f0, B = 0.1, 0.01, 1.0
curve = barrier_curve(mu0, f0, B, n_samples=129)
check = verify_barrier_ode(curve)
print(f"\nmu0 = {mu0}, f0 = {f0}, B = {B}, C1 = {curve.C1:.4f}")
print(f"f(0) = {curve.f[0]}, f(mu0) = {curve.f[-1]:.7f} (f0/e = {f0 / math.e:.7f})")
print(f"ODE residual {check.ode_residual:.1e}, g-inequality slack {check.g_min_slack:.1e}")

if len(sys.argv) > 1:
    curve.to_csv(sys.argv[1])
    print("wrote", sys.argv[1])
