import warnings

import numpy as np
import pytest

from quasigeo import shapes
from quasigeo.geodesic import all_pairs

warnings.filterwarnings("ignore", message=".*TBB.*")


@pytest.fixture(scope="session")
def tetra():
    return shapes.tetrahedron()


@pytest.fixture(scope="session")
def bumpy():
    """Small irregular closed mesh: no symmetries, no Dijkstra ties."""
    return shapes.perturbed(shapes.icosphere(1), 0.03, seed=7, name="bumpy")


@pytest.fixture(scope="session")
def bumpy_matrix(bumpy):
    return all_pairs(bumpy)


@pytest.fixture(scope="session")
def jitter_strip():
    return shapes.grid_strip(6, 3, 3.0, 1.5, jitter=0.25, seed=3)


@pytest.fixture(scope="session")
def jitter_strip_matrix(jitter_strip):
    return all_pairs(jitter_strip)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    RESULTS = getattr(mod, "RESULTS", None)
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
