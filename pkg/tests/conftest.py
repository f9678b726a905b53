import numpy as np
import pytest

from orliczfit import (
    GridFunction,
    make_linear_then_convex_phi,
    make_power_phi,
    make_staircase_phi,
    make_uniform_grid,
)


@pytest.fixture
def grid01():
    return make_uniform_grid(0.0, 1.0, 512)


@pytest.fixture
def grid01_fine():
    return make_uniform_grid(0.0, 1.0, 4096)


@pytest.fixture
def phi_l1():
    return make_power_phi(1.0)


@pytest.fixture
def phi_l2():
    return make_power_phi(2.0)


@pytest.fixture
def phi_linconv():
    return make_linear_then_convex_phi(1.0, 1.0, 2.0)


@pytest.fixture
def phi_staircase():
    return make_staircase_phi(
        make_power_phi(1.0), [(2.0 ** -n, 1.0) for n in range(1, 9)]
    )


def sample(grid, fn):
    return GridFunction.from_callable(grid, fn)
