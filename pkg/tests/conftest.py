import numpy as np
import pytest

from quadnls.analysis import derive_constants
from quadnls.spectral import SpectralState


def random_state(rng, K, scale=1.0, t=0.0, regime=False):
    c = scale * (rng.normal(size=2 * K + 1) + 1j * rng.normal(size=2 * K + 1))
    if regime:
        c[K] = 1j * abs(c[K].imag)
    return SpectralState(t, K, c)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def derived_constants():
    return derive_constants(seed=0)


# One line per acceptance criterion, printed in the terminal summary.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
