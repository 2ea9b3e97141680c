import sys

import numpy as np
import pytest

from pointsym.jetdata import estimate_jet
from pointsym.pdegen import GridSpec, generate


@pytest.fixture(scope="session")
def burgers_jets():
    """Two Burgers trajectories on the default grid, order-2 jets."""
    return estimate_jet(generate("burgers", GridSpec(), 10, 2, seed=0), 2, time_accuracy=4)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = mod.summary_lines() if mod else []
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
