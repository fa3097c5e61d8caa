import numpy as np
import pytest

from qls.contour_geometry import energy_contour
from qls.state_space import Spectrum

SQ = np.sqrt


@pytest.fixture
def spec321():
    return Spectrum([3.0, 2.0, 1.0])


@pytest.fixture
def c2(spec321):
    return energy_contour(spec321, 2.0)


@pytest.fixture
def c25(spec321):
    return energy_contour(spec321, 2.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
