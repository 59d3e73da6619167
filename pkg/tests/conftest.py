import numpy as np
import pytest

import proxymark as pm


@pytest.fixture(scope="session")
def blob_data():
    return pm.make_blobs(4, 2, 40, 0.6, seed=7)


@pytest.fixture(scope="session")
def blob_split(blob_data):
    return pm.split(blob_data, pm.SplitSpec(0.5, seed=3))


@pytest.fixture(scope="session")
def small_spec():
    return pm.ModelSpec(2, (16,), 4)


@pytest.fixture(scope="session")
def trained_source(blob_split, small_spec):
    train_data, _ = blob_split
    cfg = pm.TrainConfig(epochs=60, seed=11)
    return pm.train(small_spec, train_data, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
