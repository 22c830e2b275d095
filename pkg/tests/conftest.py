import numpy as np
import pytest

from multibubble.configuration import compute_constants
from multibubble.interaction import PointConfig

# nu from the radial eigenvalue ODE (see test_spectral); frozen so dynamics tests
# do not pay for the shooting solve.
NU = 0.618076878427928


@pytest.fixture(scope="session")
def pair():
    cfg = PointConfig.pair(1.0)
    return cfg, compute_constants(cfg)


@pytest.fixture(scope="session")
def triangle():
    cfg = PointConfig.equilateral(1.0)
    return cfg, compute_constants(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


# one verdict line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
