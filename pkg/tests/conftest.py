import numpy as np
import pytest

from axbench import intervene as iv
from axbench import oracle as om
from axbench import synthdata as sd

# Fixed dataset/training seeds shared across the suite. Frozen after one
# calibration run; do not tune.
TRAIN_SEED = 101
TEST_SEED = 202
CONF_FULL_SEED = 303
CONF_NS_SEED = 404
SMALL_SEED = 7


@pytest.fixture(scope="session")
def ds_train_unconf():
    return sd.sample_dataset(sd.Unconfounded(), 12000, seed=TRAIN_SEED)


@pytest.fixture(scope="session")
def ds_test_unconf():
    return sd.sample_dataset(sd.Unconfounded(), 5000, seed=TEST_SEED)


@pytest.fixture(scope="session")
def ds_conf_full():
    return sd.sample_dataset(sd.ConfoundedFullSupport(), 40000, seed=CONF_FULL_SEED)


@pytest.fixture(scope="session")
def ds_conf_nosupport():
    return sd.sample_dataset(sd.ConfoundedNoSupport(), 10000, seed=CONF_NS_SEED)


@pytest.fixture(scope="session")
def ds_small():
    return sd.sample_dataset(sd.Unconfounded(), 400, seed=SMALL_SEED)


@pytest.fixture(scope="session")
def digit_oracle(ds_train_unconf):
    return om.train_classifier(ds_train_unconf, 0, epochs=12, learning_rate=0.5,
                               l2=1e-5, seed=0)


@pytest.fixture(scope="session")
def hue_oracle(ds_train_unconf):
    return om.train_regressor(ds_train_unconf, 1, l2=1e-3)


@pytest.fixture(scope="session")
def oracles(digit_oracle, hue_oracle):
    return {0: digit_oracle, 1: hue_oracle}


@pytest.fixture(scope="session")
def conf_full_binnings(ds_conf_full):
    return [iv.bin_parent(ds_conf_full, k, 5) for k in range(2)]


def random_observation(shape, seed=0):
    from axbench.core import Observation
    from axbench.rng import Stream
    n = int(np.prod(shape))
    u = Stream(seed, "test-obs").u01_array(0, n)
    return Observation(u.astype(np.float32).reshape(shape))
