import os

import pytest

import config
from engine.models import GridPolicy
from services import prop_service

# Reduced grid for property tests whose assertions do not depend on the
# published fourth decimal.
COARSE = GridPolicy(theta_points=400, nuisance_points=201)


@pytest.fixture(scope="session")
def grid():
    return GridPolicy()


@pytest.fixture(scope="session")
def coarse_grid():
    return COARSE


@pytest.fixture(scope="session")
def cp16(grid):
    return prop_service.exact_limits(16, 0.05, "cp", grid)


@pytest.fixture(scope="session")
def blaker16(grid):
    return prop_service.exact_limits(16, 0.05, "blaker", grid)


@pytest.fixture(scope="session")
def lrt16(grid):
    return prop_service.exact_limits(16, 0.05, "lrt", grid)


@pytest.fixture(scope="session")
def fixture_path():
    def resolve(name):
        path = os.path.join(config.FIXTURE_DIR, name)
        if not os.path.exists(path):
            pytest.skip(f"fixture {name} not committed")
        return path

    return resolve
