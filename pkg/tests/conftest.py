import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spatial_reuse.channel import ChannelModel  # noqa: E402
from spatial_reuse.geometry import build_grid, build_random  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return build_grid(seed=1)


@pytest.fixture(scope="session")
def grid_model(grid):
    return ChannelModel.from_deployment(grid)


@pytest.fixture(scope="session")
def pair():
    return build_random(n_wns=2, seed=7)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
