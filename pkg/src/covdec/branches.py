"""The two parallel supervised feature extractors over covariance matrices.

CNN branch: the C x C matrix is read as C input channels of length-C signals;
two valid k=3 convolutions, then two ReLU FC layers. RNN branch: matrix rows
(or columns) are time steps; per-step FC(128)+ReLU -> FC(64)+ReLU feeds two
stacked LSTM layers. In both nets the last hidden activation is the exported
feature; a small affine head on top produces logits used only while the
branch itself is being trained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .covariance import CovMatrix
from .errors import ConfigError
from .params import ParamStore, require

RNN_ORDERS = ("fc-first", "lstm-first")
RNN_AXES = ("rows", "cols")


@dataclass(frozen=True)
class CnnSpec:
    filters1: int = 32
    kernel1: int = 3
    filters2: int = 64
    kernel2: int = 3
    fc1_width: int = 128
    feature_width: int = 64
    classes: int = 3


@dataclass(frozen=True)
class RnnSpec:
    fc1_width: int = 128
    fc2_width: int = 64
    hidden1: int = 64
    hidden2: int = 64  # also the exported feature width
    classes: int = 3


@dataclass(frozen=True)
class BranchOutput:
    feature: np.ndarray  # last-hidden-layer activation
    logits: np.ndarray


def _he(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


def _xavier(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _out_layer(rng: np.random.Generator, shape) -> np.ndarray:
    # small logit layer so an untrained branch predicts near-uniformly
    return rng.normal(0.0, 0.01, size=shape)


def _add_lstm_params(
    store: ParamStore, prefix: str, rng: np.random.Generator, d: int, h: int
) -> None:
    for gate in ad.LSTM_GATES:
        store.add(f"{prefix}.wx_{gate}", _xavier(rng, d, h, (d, h)))
        store.add(f"{prefix}.wh_{gate}", _xavier(rng, h, h, (h, h)))
        bias = np.full(h, 1.0) if gate == "f" else np.zeros(h)
        store.add(f"{prefix}.b_{gate}", bias)


def _lstm_view(store: ParamStore, prefix: str) -> dict[str, Node]:
    view = {}
    for gate in ad.LSTM_GATES:
        for kind in ("wx", "wh", "b"):
            view[f"{kind}_{gate}"] = store[f"{prefix}.{kind}_{gate}"]
    return view


def _lstm_names(prefix: str) -> list[str]:
    return [
        f"{prefix}.{kind}_{gate}"
        for gate in ad.LSTM_GATES
        for kind in ("wx", "wh", "b")
    ]


# ---------------------------------------------------------------------------
# CNN branch
# ---------------------------------------------------------------------------

CNN_PARAM_NAMES = (
    "conv1.w", "conv1.b", "conv2.w", "conv2.b",
    "fc1.w", "fc1.b", "fc2.w", "fc2.b", "out.w", "out.b",
)


def conv_output_length(channels: int, spec: CnnSpec) -> int:
    """Signal length after the two valid convolutions; raises when too small."""
    l1 = channels - spec.kernel1 + 1
    l2 = l1 - spec.kernel2 + 1
    if l2 < 1:
        raise ConfigError(
            f"cnn needs at least {spec.kernel1 + spec.kernel2 - 1} channels, "
            f"got {channels}"
        )
    return l2


def init_cnn_params(spec: CnnSpec, channels: int, seed: int) -> ParamStore:
    l2 = conv_output_length(channels, spec)
    rng = np.random.default_rng(seed)
    store = ParamStore(seed=seed)
    store.add("conv1.w", _he(rng, channels * spec.kernel1,
                             (spec.filters1, channels, spec.kernel1)))
    store.add("conv1.b", np.zeros(spec.filters1))
    store.add("conv2.w", _he(rng, spec.filters1 * spec.kernel2,
                             (spec.filters2, spec.filters1, spec.kernel2)))
    store.add("conv2.b", np.zeros(spec.filters2))
    flat = spec.filters2 * l2
    store.add("fc1.w", _he(rng, flat, (flat, spec.fc1_width)))
    store.add("fc1.b", np.zeros(spec.fc1_width))
    store.add("fc2.w", _he(rng, spec.fc1_width, (spec.fc1_width, spec.feature_width)))
    store.add("fc2.b", np.zeros(spec.feature_width))
    store.add("out.w", _out_layer(rng, (spec.feature_width, spec.classes)))
    store.add("out.b", np.zeros(spec.classes))
    return store


def cnn_graph(mats: Node, params: ParamStore) -> tuple[Node, Node]:
    """Forward graph over a [B, C, C] batch; returns (features, logits) nodes."""
    require(params, CNN_PARAM_NAMES, "cnn")
    h = ad.relu(ad.conv1d(mats, params["conv1.w"], params["conv1.b"]))
    h = ad.relu(ad.conv1d(h, params["conv2.w"], params["conv2.b"]))
    batch = h.value.shape[0]
    h = ad.reshape(h, (batch, h.value.shape[1] * h.value.shape[2]))
    h = ad.relu(ad.linear(h, params["fc1.w"], params["fc1.b"]))
    feature = ad.relu(ad.linear(h, params["fc2.w"], params["fc2.b"]))
    logits = ad.linear(feature, params["out.w"], params["out.b"])
    return feature, logits


def cnn_forward(m: CovMatrix, params: ParamStore) -> BranchOutput:
    """Single-matrix inference pass."""
    feature, logits = cnn_graph(Node(m.values[None, :, :]), params)
    return BranchOutput(feature.value[0].copy(), logits.value[0].copy())


# ---------------------------------------------------------------------------
# RNN branch
# ---------------------------------------------------------------------------

RNN_PARAM_NAMES = tuple(
    ["fc1.w", "fc1.b", "fc2.w", "fc2.b"]
    + _lstm_names("lstm1")
    + _lstm_names("lstm2")
    + ["out.w", "out.b"]
)


def init_rnn_params(
    spec: RnnSpec, channels: int, seed: int, order: str = "fc-first"
) -> ParamStore:
    if order not in RNN_ORDERS:
        raise ConfigError(f"rnn order must be one of {RNN_ORDERS}, got {order!r}")
    rng = np.random.default_rng(seed)
    store = ParamStore(seed=seed)
    if order == "fc-first":
        fc_in, lstm_in = channels, spec.fc2_width
    else:
        fc_in, lstm_in = spec.hidden2, channels
    store.add("fc1.w", _he(rng, fc_in, (fc_in, spec.fc1_width)))
    store.add("fc1.b", np.zeros(spec.fc1_width))
    store.add("fc2.w", _he(rng, spec.fc1_width, (spec.fc1_width, spec.fc2_width)))
    store.add("fc2.b", np.zeros(spec.fc2_width))
    _add_lstm_params(store, "lstm1", rng, lstm_in, spec.hidden1)
    _add_lstm_params(store, "lstm2", rng, spec.hidden1, spec.hidden2)
    feat_width = spec.hidden2 if order == "fc-first" else spec.fc2_width
    store.add("out.w", _out_layer(rng, (feat_width, spec.classes)))
    store.add("out.b", np.zeros(spec.classes))
    return store


def rnn_graph(
    mats: np.ndarray,
    params: ParamStore,
    order: str = "fc-first",
    axis: str = "rows",
) -> tuple[Node, Node]:
    """Forward graph over a [B, C, C] batch; returns (features, logits) nodes."""
    require(params, RNN_PARAM_NAMES, "rnn")
    if order not in RNN_ORDERS:
        raise ConfigError(f"rnn order must be one of {RNN_ORDERS}, got {order!r}")
    if axis not in RNN_AXES:
        raise ConfigError(f"rnn axis must be one of {RNN_AXES}, got {axis!r}")
    mats = np.asarray(mats, dtype=np.float64)
    batch, c = mats.shape[0], mats.shape[1]
    steps = [
        Node(mats[:, t, :] if axis == "rows" else mats[:, :, t]) for t in range(c)
    ]

    h1_width = params["lstm1.wh_i"].value.shape[0]
    h2_width = params["lstm2.wh_i"].value.shape[0]
    h1, c1 = Node(np.zeros((batch, h1_width))), Node(np.zeros((batch, h1_width)))
    h2, c2 = Node(np.zeros((batch, h2_width))), Node(np.zeros((batch, h2_width)))
    lstm1, lstm2 = _lstm_view(params, "lstm1"), _lstm_view(params, "lstm2")

    def fc_stack(x: Node) -> Node:
        x = ad.relu(ad.linear(x, params["fc1.w"], params["fc1.b"]))
        return ad.relu(ad.linear(x, params["fc2.w"], params["fc2.b"]))

    for x_t in steps:
        step_in = fc_stack(x_t) if order == "fc-first" else x_t
        h1, c1 = ad.lstm_cell(step_in, h1, c1, lstm1)
        h2, c2 = ad.lstm_cell(h1, h2, c2, lstm2)
    feature = h2 if order == "fc-first" else fc_stack(h2)
    logits = ad.linear(feature, params["out.w"], params["out.b"])
    return feature, logits


def rnn_forward(
    m: CovMatrix,
    params: ParamStore,
    order: str = "fc-first",
    axis: str = "rows",
) -> BranchOutput:
    """Single-matrix inference pass."""
    feature, logits = rnn_graph(m.values[None, :, :], params, order, axis)
    return BranchOutput(feature.value[0].copy(), logits.value[0].copy())


# ---------------------------------------------------------------------------
# joint features
# ---------------------------------------------------------------------------


def extract_features_batch(
    mats: np.ndarray,
    cnn_params: ParamStore,
    rnn_params: ParamStore,
    order: str = "fc-first",
    axis: str = "rows",
) -> np.ndarray:
    """[B, C, C] -> [B, cnn_width + rnn_width] joint encodings, CNN first."""
    cnn_feat, _ = cnn_graph(Node(mats), cnn_params)
    rnn_feat, _ = rnn_graph(mats, rnn_params, order, axis)
    return np.concatenate([cnn_feat.value, rnn_feat.value], axis=1)


def extract_features(
    m: CovMatrix,
    cnn_params: ParamStore,
    rnn_params: ParamStore,
    order: str = "fc-first",
    axis: str = "rows",
) -> np.ndarray:
    """Concatenated [cnn feature || rnn feature] for one covariance matrix."""
    return extract_features_batch(m.values[None, :, :], cnn_params, rnn_params,
                                  order, axis)[0]
