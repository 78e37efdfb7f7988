import numpy as np
import pytest

from telegraph_interface.model import Grid, TwoLineDensity


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(grid: Grid, rng) -> TwoLineDensity:
    return TwoLineDensity(grid, rng.uniform(0.0, 1.0, (2, grid.n_cells)))


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
