import numpy as np
import pytest

from poisson_safety import GridDims, WorldBounds, default_models


@pytest.fixture(scope="session")
def arm7():
    return default_models()["arm7"]


@pytest.fixture(scope="session")
def planar2():
    return default_models()["planar2"]


@pytest.fixture
def unit_bounds():
    return WorldBounds(np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))


@pytest.fixture
def workspace_bounds():
    return WorldBounds(np.array([-1.0, -1.0, 0.0]), np.array([1.0, 1.0, 2.0]))


def random_walled_grid(rng, n, density=0.06):
    """Random occupancy with the mandatory outer shell."""
    occ = rng.random((n, n, n)) < density
    occ[0, :, :] = occ[-1, :, :] = True
    occ[:, 0, :] = occ[:, -1, :] = True
    occ[:, :, 0] = occ[:, :, -1] = True
    return occ


@pytest.fixture
def walled():
    return random_walled_grid
