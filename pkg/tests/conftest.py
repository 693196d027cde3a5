import numpy as np
import pytest

from unbiased_pde import example2_problem, ou_problem
from unbiased_pde.problems import from_config
from unbiased_pde.runner import resolve_params


def zero_drift_config(k=1, sigma=0.7, G=None, n0=2, n1=2):
    """mu = 0, constant sigma, affine f; G affine unless given."""
    return {
        "name": "zero-drift", "d": 1, "dprime": 1,
        "points": [[0.25 * (i + 1)] for i in range(k)],
        "field": {"basis": "constant", "q": 5.0, "lambda": 0.0},
        "sigma": {"family": "constant", "matrix": [[sigma]]},
        "f": {"family": "affine", "offset": 0.3, "weights": 2.0},
        "G": G or {"family": "affine", "weights": 1.5, "offset": -0.2},
        "params": {"n0": n0, "n1": n1, "q": 5.0},
    }


@pytest.fixture(scope="session")
def ou():
    return ou_problem()


@pytest.fixture(scope="session")
def ou_pinned():
    return ou_problem(alpha_sd=0.0)


@pytest.fixture(scope="session")
def ex2():
    return example2_problem()


@pytest.fixture(scope="session")
def zero_drift():
    return from_config(zero_drift_config())


@pytest.fixture(scope="session")
def ou_params(ou):
    return resolve_params(ou)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
