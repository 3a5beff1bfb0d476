"""
Shared pytest configuration for the divcol test suite.
"""

import os
import sys

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import HealthCheck, settings

# Add src to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

settings.register_profile(
    "ci",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run acceptance-scale (slow and nightly) tests")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: acceptance-scale run taking minutes")
    config.addinivalue_line("markers", "nightly: 16^3 three-dimensional runs")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("DIVCOL_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="needs --runslow or DIVCOL_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords or "nightly" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def interpolate():
    """Greville interpolant of a scalar function in a tensor space."""
    from divcol.spaces import evaluation_matrix, greville_grid

    def build(space, f):
        grid = greville_grid(space)
        matrix = evaluation_matrix(space, grid.points, (0,) * space.ndim).tocsc()
        return spla.spsolve(matrix, np.asarray(f(grid.points), dtype=float))

    return build


def directional_jacobian_error(callback, x, direction, step=1e-4):
    """Relative mismatch between J v and a central difference of the residual."""
    _, jacobian = callback(x)
    exact = jacobian @ direction
    up = callback(x + step * direction, want_jacobian=False)
    down = callback(x - step * direction, want_jacobian=False)
    fd = (up - down) / (2 * step)
    return float(np.max(np.abs(exact - fd)) / max(1.0, np.max(np.abs(exact))))


@pytest.fixture
def jacobian_error():
    return directional_jacobian_error
