import numpy as np
import pytest

from gazeintent import build_tabletop_scene
from gazeintent.evaluation import precompute_features, train_models
from gazeintent.sim import generate_dataset


@pytest.fixture(scope="session")
def scene():
    return build_tabletop_scene()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_dataset(scene):
    """2 users x 4 modes x 2 trials: enough structure to train on."""
    return generate_dataset(scene, n_users=2, trials_per_block=2, master_seed=99)


@pytest.fixture(scope="session")
def small_feats(scene, small_dataset):
    return precompute_features(scene, small_dataset)


@pytest.fixture(scope="session")
def small_models(scene, small_dataset, small_feats):
    return train_models(
        scene,
        small_dataset,
        small_feats,
        indices=list(range(len(small_dataset))),
        seed=5,
        n_restarts=2,
        max_iter=15,
    )
