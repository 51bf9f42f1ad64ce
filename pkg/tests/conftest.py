import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from focusnls.basis import build_basis
from focusnls.potential import PotentialSpec

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_basis():
    """Two Hermite levels (three x modes) and an 8-point z grid."""
    return build_basis(2, M_z=8, L_z=8.0)


@pytest.fixture(scope="session")
def basis16():
    return build_basis(2, M_z=16, L_z=12.0)


@pytest.fixture(scope="session")
def attractive():
    return PotentialSpec.attractive_gaussian(0.8, 1.0, 0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def gaussian_z(grid, width=1.0, k0=0.0):
    """Unit-norm Fourier coefficients of a Gaussian wave packet."""
    c = grid.from_samples(np.exp(-0.5 * (grid.nodes / width) ** 2 + 1j * k0 * grid.nodes))
    return c / np.linalg.norm(c)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
