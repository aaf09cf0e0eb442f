import numpy as np
import pytest

from choquard_gap.cli import build_setup
from choquard_gap.config import build_config, default_raw
from choquard_gap.grid import make_grid


@pytest.fixture(scope="session")
def standard():
    """Shifted separable cosine potential, N=3, M=4, s=8, gap centered at 0."""
    return build_setup(build_config(default_raw()))


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(3, 2, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("acceptance_runs")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
