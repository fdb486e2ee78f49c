import numpy as np
import pytest

from shallowwave.core import Bathymetry, Grid1D, SimulationParams

ACCEPTANCE_LINES = {}


def record_criterion(number: int, title: str, passed: bool, detail: str):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"criterion {number:2d} [{status}] {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def params():
    return SimulationParams(epsilon=0.1, mu=0.1)


@pytest.fixture
def pgrid():
    return Grid1D(128, 20.0)


@pytest.fixture
def flat(pgrid):
    return Bathymetry.flat_bottom(pgrid)


def mode_coefficient(u, m):
    """Complex amplitude of Fourier mode m (u = Re(c exp(i k_m x)))."""
    return 2 * np.fft.fft(u)[m] / u.size
