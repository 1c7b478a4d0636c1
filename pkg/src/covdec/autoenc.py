"""Deep autoencoder over concatenated branch features, plus the softmax head.

The DAE has two ReLU encoder layers, a linear-output two-layer decoder that
mirrors them, and trains unsupervised on reconstruction MSE. The head is a
two-layer FC network over latent codes; softmax is applied only inside the
loss or at predict time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .branches import _he, _out_layer, _xavier, extract_features
from .covariance import CovMatrix
from .errors import ConfigError
from .params import ParamStore, require


@dataclass(frozen=True)
class DaeSpec:
    input_width: int = 128
    hidden_width: int = 64
    latent_width: int = 32

    def __post_init__(self):
        if not self.latent_width < self.input_width:
            raise ConfigError(
                f"dae latent width {self.latent_width} must be smaller than "
                f"input width {self.input_width}"
            )


@dataclass(frozen=True)
class HeadSpec:
    latent_width: int = 32
    hidden_width: int = 16
    classes: int = 3


DAE_PARAM_NAMES = (
    "enc1.w", "enc1.b", "enc2.w", "enc2.b",
    "dec1.w", "dec1.b", "dec2.w", "dec2.b",
)
HEAD_PARAM_NAMES = ("fc1.w", "fc1.b", "out.w", "out.b")


def init_dae_params(spec: DaeSpec, seed: int) -> ParamStore:
    rng = np.random.default_rng(seed)
    store = ParamStore(seed=seed)
    store.add("enc1.w", _he(rng, spec.input_width, (spec.input_width, spec.hidden_width)))
    store.add("enc1.b", np.zeros(spec.hidden_width))
    store.add("enc2.w", _he(rng, spec.hidden_width, (spec.hidden_width, spec.latent_width)))
    store.add("enc2.b", np.zeros(spec.latent_width))
    store.add("dec1.w", _he(rng, spec.latent_width, (spec.latent_width, spec.hidden_width)))
    store.add("dec1.b", np.zeros(spec.hidden_width))
    store.add("dec2.w", _xavier(rng, spec.hidden_width, spec.input_width,
                                (spec.hidden_width, spec.input_width)))
    store.add("dec2.b", np.zeros(spec.input_width))
    return store


def init_head_params(spec: HeadSpec, seed: int) -> ParamStore:
    rng = np.random.default_rng(seed)
    store = ParamStore(seed=seed)
    store.add("fc1.w", _he(rng, spec.latent_width, (spec.latent_width, spec.hidden_width)))
    store.add("fc1.b", np.zeros(spec.hidden_width))
    store.add("out.w", _out_layer(rng, (spec.hidden_width, spec.classes)))
    store.add("out.b", np.zeros(spec.classes))
    return store


def dae_graph(features: Node, params: ParamStore) -> tuple[Node, Node]:
    """(latent, reconstruction) nodes for [n] or [B, n] feature input."""
    require(params, DAE_PARAM_NAMES, "dae")
    h = ad.relu(ad.linear(features, params["enc1.w"], params["enc1.b"]))
    latent = ad.relu(ad.linear(h, params["enc2.w"], params["enc2.b"]))
    h = ad.relu(ad.linear(latent, params["dec1.w"], params["dec1.b"]))
    recon = ad.linear(h, params["dec2.w"], params["dec2.b"])
    return latent, recon


def dae_encode(features: np.ndarray, params: ParamStore) -> np.ndarray:
    """Deterministic latent code(s) for [n] or [B, n] features."""
    latent, _ = dae_graph(Node(features), params)
    return latent.value.copy()


def dae_loss(features: np.ndarray, params: ParamStore) -> Node:
    """Reconstruction MSE node; gradient reaches all four layers. No labels."""
    x = Node(features)
    _, recon = dae_graph(x, params)
    return ad.mse(recon, x.value)


def head_graph(latents: Node, params: ParamStore) -> Node:
    """Logit node(s) for [n] or [B, n] latent input."""
    require(params, HEAD_PARAM_NAMES, "head")
    h = ad.relu(ad.linear(latents, params["fc1.w"], params["fc1.b"]))
    return ad.linear(h, params["out.w"], params["out.b"])


def head_forward(latent: np.ndarray, params: ParamStore) -> np.ndarray:
    """Logits for one latent code or a batch of them."""
    return head_graph(Node(latent), params).value.copy()


def predict(
    m: CovMatrix,
    cnn_params: ParamStore,
    rnn_params: ParamStore,
    dae_params: ParamStore,
    head_params: ParamStore,
    order: str = "fc-first",
    axis: str = "rows",
) -> tuple[int, np.ndarray]:
    """Full-pipeline class prediction for one (standardized) covariance matrix.

    Literally composes the stage operations: features -> latent -> logits ->
    softmax -> argmax, ties broken toward the lowest class index.
    """
    features = extract_features(m, cnn_params, rnn_params, order, axis)
    latent = dae_encode(features, dae_params)
    logits = head_forward(latent, head_params)
    probs = ad.softmax(logits)
    return int(np.argmax(probs)), probs
