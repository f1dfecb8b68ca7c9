import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_spd(rng, n, jitter=1.0):
    """Random symmetric positive definite matrix A A' + jitter * I."""
    a = rng.standard_normal((n, n))
    return a @ a.T + jitter * np.eye(n)
