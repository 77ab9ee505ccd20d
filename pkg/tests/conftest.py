import numpy as np
import pytest

from dziobek.geometry import PlanarConfiguration
from dziobek.solver import continuation_sweep, oracle_trapezoid, solve_dziobek


@pytest.fixture
def unit_square():
    return PlanarConfiguration([[0, 0], [1, 0], [1, 1], [0, 1]], [1, 1, 1, 1])


@pytest.fixture
def centered_square(unit_square):
    return unit_square.centered()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def oracle_half():
    return oracle_trapezoid(0.5)


@pytest.fixture(scope="session")
def dziobek_half():
    return solve_dziobek(0.5)


@pytest.fixture(scope="session")
def acceptance_sweep():
    return continuation_sweep(1.0, 0.1, 19)


# one verdict line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
