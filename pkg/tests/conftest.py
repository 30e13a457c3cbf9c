import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=20,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_symmetric(rng, d, scale=1.0):
    A = rng.normal(size=(d, d)) * scale
    return 0.5 * (A + A.T)


def random_symplectic(rng, n, scale=0.3):
    from scipy.linalg import expm
    from symbif.symplectic import std_j
    S = random_symmetric(rng, 2 * n, scale)
    return expm(std_j(n) @ S)
