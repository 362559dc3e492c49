import numpy as np
import pytest

from nlstable.kernels import KernelPair, UncertaintySet, Grid
from nlstable.solver import make_grid

ALPHA = 1.5


def singleton_set(k_minus=1.0, k_plus=1.0, alpha=ALPHA):
    return UncertaintySet(alpha, (KernelPair(k_minus, k_plus),), 0.05, 4.0)


@pytest.fixture(scope="session")
def uset_sym():
    return singleton_set()


@pytest.fixture(scope="session")
def uset_asym():
    return singleton_set(2.0, 1.0)


@pytest.fixture(scope="session")
def small_grid(uset_sym):
    """Coarse CFL-satisfying grid for fast solver tests."""
    return make_grid(-20.0, 20.0, 401, 1.0, uset_sym)


def gaussian(x):
    return np.exp(-np.asarray(x, dtype=float) ** 2)
