import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, eig_low=0.3, eig_high=3.0):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)))
    return (q * rng.uniform(eig_low, eig_high, size=d)) @ q.T


def random_psd(rng, d, rank=None):
    rank = rank or d
    B = rng.normal(size=(d, rank))
    return B @ B.T / rank


@pytest.fixture
def spd_factory(rng):
    return lambda d, lo=0.3, hi=3.0: random_spd(rng, d, lo, hi)
