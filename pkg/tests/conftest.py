import numpy as np
import pytest

from covdec.autoenc import DaeSpec, HeadSpec, init_dae_params, init_head_params
from covdec.branches import CnnSpec, RnnSpec, init_cnn_params, init_rnn_params
from covdec.params import ParamStore


def zeroed(store: ParamStore) -> ParamStore:
    """Same architecture, every weight zero."""
    for _, node in store.items():
        node.value[...] = 0.0
    return store


@pytest.fixture
def small_cnn() -> ParamStore:
    spec = CnnSpec(filters1=4, filters2=5, fc1_width=16, feature_width=8, classes=3)
    return init_cnn_params(spec, channels=6, seed=42)


@pytest.fixture
def small_rnn() -> ParamStore:
    spec = RnnSpec(fc1_width=8, fc2_width=6, hidden1=5, hidden2=4, classes=3)
    return init_rnn_params(spec, channels=6, seed=43)


@pytest.fixture
def small_dae() -> ParamStore:
    return init_dae_params(DaeSpec(input_width=12, hidden_width=6, latent_width=4), seed=44)


@pytest.fixture
def small_head() -> ParamStore:
    return init_head_params(HeadSpec(latent_width=4, hidden_width=3, classes=3), seed=45)


def store_bytes(store: ParamStore) -> dict[str, bytes]:
    return {name: node.value.tobytes() for name, node in store.items()}


def rng_trial_data(rng: np.random.Generator, channels: int, samples: int) -> np.ndarray:
    return rng.normal(size=(channels, samples))
