"""Which initial data blow up, and how the classifier decides."""
import numpy as np

from quadnls.analysis import classify
from quadnls.spectral import SpectralState, analyze, PhysicalField

K = 4
cases = {
    "i": {0: 1j},
    "0": {0: 0},
    "-i": {0: -1j},
    "1": {0: 1},
    "1 + i": {0: 1 + 1j},
    "e^{ix}": {1: 1},
    "0.01 e^{ix} + 0.001 i": {0: 1e-3j, 1: 1e-2},
}
for name, modes in cases.items():
    v = classify(SpectralState.from_modes(modes, K))
    extra = ""
    if v.alpha is not None:
        extra = f"  alpha = {v.alpha:.4f}, blow-up by t <= {v.predicted_blowup_upper:.4f}"
    print(f"{name:>24} -> {v.regime.value}{extra}")

# Grid data goes through the same path once projected on the modes.
x = 2 * np.pi * np.arange(32) / 32
field = PhysicalField(0.1j + 0.05 * np.cos(2 * x))
print("\n0.1 i + 0.05 cos 2x ->", classify(analyze(field, K)).regime.value)
