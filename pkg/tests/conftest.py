import numpy as np
import pytest

import uaplab as u


@pytest.fixture(scope="session")
def rings_small():
    """Small ring dataset split for loop tests: (train, test)."""
    full = u.make_synthetic_dataset("rings", 64, 10, 1500, seed=11)
    return full.split(1100)


@pytest.fixture(scope="session")
def mlp_on_rings(rings_small):
    train_set, _ = rings_small
    model = u.build("mlp:48", 64, 10, seed=3)
    return u.train(model, train_set, u.TrainConfig(epochs=45, learning_rate=0.15, seed=3))


@pytest.fixture(scope="session")
def blobs_small():
    full = u.make_synthetic_dataset("blobs", 36, 4, 600, seed=7)
    return full.split(400)


@pytest.fixture(scope="session")
def linear_on_blobs(blobs_small):
    train_set, _ = blobs_small
    model = u.build("linear", 36, 4, seed=1)
    return u.train(model, train_set, u.TrainConfig(epochs=20, seed=1))


def binary_line_model(w=(1.0, 0.0), b=0.0):
    """Two-class linear model whose decision function is w.x + b (class 1 when
    positive).  Used by closed-form attack oracles."""
    m = u.build("linear", 2, 2, seed=0)
    m.w[...] = np.array([[0.0, 0.0], list(w)])
    m.b[...] = np.array([0.0, float(b)])
    return m
