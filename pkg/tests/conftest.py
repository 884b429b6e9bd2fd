import pytest

from ringecho.core import build_comb_array, make_time_grid
from ringecho.propagation import gaussian_pulse

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_comb():
    """Nine-line comb, cheap enough for brute-force checks."""
    return build_comb_array(9, 0.5, 0.01, 0.3)


@pytest.fixture
def small_grid(small_comb):
    return make_time_grid(4.0, 2, 0.5, spec=small_comb, support=(-8.0, 8.0))


@pytest.fixture
def small_pulse(small_grid):
    return gaussian_pulse(small_grid)
