import numpy as np
import pytest

from rlsff import EstimatorConfig


def random_spd(rng, d, lo=0.5, hi=2.0):
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return (Q * rng.uniform(lo, hi, d)) @ Q.T


@pytest.fixture
def scalar_config():
    return EstimatorConfig(m=1, n=1, lam=0.5, T=[[1.0]], P_init=[[1.0]], theta_init=[0.0])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
