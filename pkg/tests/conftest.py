"""Shared fixtures: small spaces with their operators and geometry profiles."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from heatbesov.space import fit_geometry, grid_space, path_space, single_point_space
from heatbesov.spectral import build_graph_laplacian

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


class Setup:
    """A space bundled with its Laplacian and fitted geometry."""

    def __init__(self, space):
        self.space = space
        self.op = build_graph_laplacian(space)
        self.geom = fit_geometry(space)


@pytest.fixture(scope="session")
def path3():
    return Setup(path_space(3, measure="unit"))


@pytest.fixture(scope="session")
def path4():
    return Setup(path_space(4, spacing=0.3))


@pytest.fixture(scope="session")
def path64():
    return Setup(path_space(64, spacing=1 / 63))


@pytest.fixture(scope="session")
def grid8():
    return Setup(grid_space(8, spacing=1 / 7))


@pytest.fixture(scope="session")
def point():
    return Setup(single_point_space(2.0))


@pytest.fixture(scope="session")
def far_pair():
    """Two points at distance 1.5: every ball of radius <= 1 is a singleton."""
    return Setup(path_space(2, spacing=1.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
