import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stnmf import DipsSpec, generate_dips, to_skew

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def four_node():
    """Two groups of two, every edge from group 0 to group 1."""
    lg = generate_dips(DipsSpec((2, 2), ((0, 1), (0, 0))), 0)
    T = to_skew(lg.graph)
    c = 1 / np.sqrt(2)
    U = np.array([[c, 0], [c, 0], [0, c], [0, c]])
    S = np.array([[0.0, 2.0], [-2.0, 0.0]])
    return T, U, S


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
