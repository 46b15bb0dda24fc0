import numpy as np
import pytest

from shrinker import mesh as meshmod


@pytest.fixture(scope="session")
def sphere_r1():
    return meshmod.icosphere(4, 1.0)


@pytest.fixture(scope="session")
def sphere_r2():
    return meshmod.icosphere(4, 2.0)


@pytest.fixture(scope="session")
def plane():
    return meshmod.plane_patch(2.0, 41)


@pytest.fixture(scope="session")
def cylinder():
    return meshmod.cylinder_patch(np.sqrt(2.0), 1.0, 31, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
