import json
import os

import numpy as np
import pytest

from shiftpert.kernel import build_kernel
from shiftpert.numerics import Grid
from shiftpert.profiles import ProfileFunction
from shiftpert.semigroup import PerturbedSemigroup

ORACLES = os.path.join(os.path.dirname(__file__), "oracles", "frozen.json")


@pytest.fixture(scope="session")
def oracle():
    with open(ORACLES) as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def grid20():
    return Grid(20.0, 512)


@pytest.fixture(scope="session")
def e2_kernel(grid20):
    return build_kernel(ProfileFunction.exponential(1.0, 2.0), None, grid20)


@pytest.fixture(scope="session")
def e1_kernel(grid20):
    return build_kernel(ProfileFunction.exponential(1.0, 1.0), None, grid20)


@pytest.fixture(scope="session")
def e2_sg(e2_kernel):
    return PerturbedSemigroup(e2_kernel)


@pytest.fixture(scope="session")
def e1_sg(e1_kernel):
    return PerturbedSemigroup(e1_kernel)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
