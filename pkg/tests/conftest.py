from pathlib import Path

import pytest

from cordes_lab.grid import RadialGrid
from cordes_lab.operator_core import ProblemParams
from cordes_lab.radial_solver import solve_radial

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def grid():
    return RadialGrid()


@pytest.fixture(scope="session")
def coarse_grid():
    return RadialGrid(per_octave=32)


@pytest.fixture(scope="session")
def profiles():
    cache = {}

    def get(N, gamma, p):
        key = (N, float(gamma), float(p))
        if key not in cache:
            cache[key] = solve_radial(ProblemParams(N, gamma, p))
        return cache[key]

    return get


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
