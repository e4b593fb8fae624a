import numpy as np
import pytest

from speedmeter.noise import g_opt_position, g_opt_velocity
from speedmeter.response import REFERENCE


@pytest.fixture
def ref():
    return REFERENCE


@pytest.fixture
def ref_velocity():
    return REFERENCE.replace(G=g_opt_velocity(REFERENCE))


@pytest.fixture
def ref_position():
    return REFERENCE.replace(G=g_opt_position(REFERENCE, 1e-6))


@pytest.fixture
def log_grid():
    return np.geomspace(1e-2, 1e9, 200)
