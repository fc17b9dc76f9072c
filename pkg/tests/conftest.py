import numpy as np
import pytest

from rntip.core import SystemParams
from rntip.manifolds import heteroclinic
from rntip.sde import SimConfig, run_ensemble

# master seed used by every Monte Carlo test
SEED = 0


@pytest.fixture(scope="session")
def het_r1():
    return heteroclinic(SystemParams(1.0, 0.25))


@pytest.fixture(scope="session")
def het_cache():
    cache = {}

    def get(r, s):
        if (r, s) not in cache:
            cache[(r, s)] = heteroclinic(SystemParams(r, s))
        return cache[(r, s)]

    return get


@pytest.fixture(scope="session")
def fig7_ensemble():
    """N = 3000, r = 1, sigma1 = 0.15 on [0, 30] with dt = 1e-3, paths stored."""
    cfg = SimConfig(SystemParams(1.0, 0.15), seed=SEED, n_realizations=3000, store_paths=True)
    return run_ensemble(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
