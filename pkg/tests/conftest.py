import numpy as np
import pytest

from memhtm.encoding import SDR, ScalarEncoder


@pytest.fixture
def encoder():
    return ScalarEncoder.for_range(0.0, 100.0, n_buckets=140, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sdr(rng, width=512, n_active=21) -> SDR:
    active = rng.choice(width, size=n_active, replace=False)
    return SDR(width, active)
