import numpy as np
import pytest

from pufe.services.datasets import make_low_rank_dataset
from pufe.services.simulate import make_script, synthesize_stream


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def low_rank_data():
    """160 rows in a rank-2 subspace of R^8 with noiseless labels."""
    return make_low_rank_dataset(160, 8, 2, seed=11, label_noise=0.0)


@pytest.fixture
def make_stream(low_rank_data):
    """Factory for phased streams over ``low_rank_data`` (T1 = 80, T2 = 80)."""
    features, labels = low_rank_data

    def factory(setting="C", b=10, s_floor=3, seed=5):
        script = make_script(8, b, 80, 80, s_floor, seed)
        return synthesize_stream(features, labels, script, setting)

    return factory
