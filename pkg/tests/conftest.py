import math

import pytest

from platformtrial import DesignSpec, solve_boundaries, size_proportional
from platformtrial.model import equal_schedule

THETA_CLIN = -math.log(0.69)


@pytest.fixture(scope="session")
def theta_clin():
    return THETA_CLIN


@pytest.fixture(scope="session")
def flair_schedule():
    return equal_schedule(2, 2, 76, (0, 76))


@pytest.fixture(scope="session")
def flair_bounds(flair_schedule):
    return solve_boundaries(flair_schedule, "triangular", 0.025)


@pytest.fixture(scope="session")
def flair_pairwise():
    return size_proportional(DesignSpec(2, 2, 0.025, 0.2, THETA_CLIN, adding_fractions=(0, 1)))


@pytest.fixture(scope="session")
def flair_conjunctive():
    return size_proportional(DesignSpec(2, 2, 0.025, 0.2, THETA_CLIN, power_mode="conjunctive",
                                        adding_fractions=(0, 1)))
