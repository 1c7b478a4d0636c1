"""Three-stage hierarchical training: branches, autoencoder, classifier head.

Stage 1 trains the CNN and RNN branches independently on cross-entropy.
Stage 2 trains the autoencoder on reconstruction MSE over features extracted
with the frozen stage-1 weights (labels never enter). Stage 3 trains the
softmax head on latents from the frozen autoencoder. Standardization stats,
shuffling, and weight init all derive from the run seed and the training
partition only; with patience set, stages 1 and 3 return the checkpoint with
minimum validation loss.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Node
from .autoenc import dae_encode, dae_loss, head_graph, init_dae_params, init_head_params
from .branches import cnn_graph, extract_features_batch, init_cnn_params, init_rnn_params, rnn_graph
from .config import TrainConfig
from .covariance import NormStats, Trial, ccv, standardize
from .errors import DataError, NumericError
from .params import ParamStore, adam_step


# ---------------------------------------------------------------------------
# dataset split
# ---------------------------------------------------------------------------


def split(
    trials: list[Trial], fraction: float, seed: int, classes: int | None = None
) -> tuple[list[Trial], list[Trial]]:
    """Stratified, seeded partition into (train, validation).

    Per class, train gets floor(n * fraction + 0.5) trials (halves round
    toward train); the split is disjoint, exhaustive, and deterministic.
    """
    labels = sorted({t.label for t in trials})
    if classes is not None:
        for k in range(classes):
            if k not in labels:
                raise DataError(f"class {k} has no trials")
    rng = np.random.default_rng(seed)
    train: list[Trial] = []
    val: list[Trial] = []
    for k in labels:
        members = [t for t in trials if t.label == k]
        order = rng.permutation(len(members))
        n_train = int(np.floor(len(members) * fraction + 0.5))
        train.extend(members[i] for i in order[:n_train])
        val.extend(members[i] for i in order[n_train:])
    return train, val


def _derived_seeds(seed: int) -> dict[str, int]:
    keys = (
        "cnn_init", "rnn_init", "dae_init", "head_init",
        "cnn_shuffle", "rnn_shuffle", "dae_shuffle", "head_shuffle",
    )
    state = np.random.SeedSequence(seed).generate_state(len(keys))
    return {k: int(v) for k, v in zip(keys, state)}


# ---------------------------------------------------------------------------
# stage loops
# ---------------------------------------------------------------------------


@dataclass
class CurvePoint:
    epoch: int
    stage: str
    train_loss: float
    val_loss: float | None = None
    val_acc: float | None = None


@dataclass
class StageResult:
    params: ParamStore
    curves: list[CurvePoint]
    initial_loss: float  # full training set, before any update
    final_loss: float    # full training set, with the returned weights
    best_epoch: int      # epoch of the retained checkpoint (0 = initialization)
    epochs_run: int


def _xent_eval(graph_fn, params, x, y) -> tuple[float, float]:
    logits = graph_fn(x, params)
    loss = float(ad.softmax_xent(logits, y).value)
    acc = float(np.mean(np.argmax(logits.value, axis=1) == y))
    return loss, acc


def _train_supervised(
    graph_fn,
    params: ParamStore,
    train_x: np.ndarray,
    train_y: np.ndarray,
    val_x: np.ndarray,
    val_y: np.ndarray,
    *,
    lr: float,
    epochs: int,
    batch_size: int,
    patience: int | None,
    shuffle_seed: int,
    stage: str,
) -> StageResult:
    rng = np.random.default_rng(shuffle_seed)
    n = train_x.shape[0]
    curves: list[CurvePoint] = []
    initial_loss, _ = _xent_eval(graph_fn, params, train_x, train_y)
    init_val_loss, init_val_acc = _xent_eval(graph_fn, params, val_x, val_y)
    curves.append(CurvePoint(0, stage, initial_loss, init_val_loss, init_val_acc))

    # the untrained weights are checkpoint candidate number zero
    best_val = init_val_loss
    best_snap = params.snapshot()
    best_epoch = 0
    stale = 0
    step = 0
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for bi, start in enumerate(range(0, n, batch_size)):
            idx = perm[start : start + batch_size]
            loss = ad.softmax_xent(graph_fn(train_x[idx], params), train_y[idx])
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss in stage '{stage}' at epoch {epoch}, batch {bi}"
                )
            params.zero_grad()
            loss.backward()
            step += 1
            adam_step(params, lr, t=step)
            batch_losses.append(value)
        val_loss, val_acc = _xent_eval(graph_fn, params, val_x, val_y)
        curves.append(CurvePoint(epoch, stage, float(np.mean(batch_losses)), val_loss, val_acc))
        if patience is not None:
            if val_loss < best_val:
                best_val, best_epoch, stale = val_loss, epoch, 0
                best_snap = params.snapshot()
            else:
                stale += 1
                if stale >= patience:
                    break

    epochs_run = len(curves) - 1
    if patience is not None:
        params.load_values(best_snap)
    else:
        best_epoch = epochs_run
    final_loss, _ = _xent_eval(graph_fn, params, train_x, train_y)
    return StageResult(params, curves, initial_loss, final_loss, best_epoch, epochs_run)


@dataclass
class Stage1Result:
    cnn: StageResult
    rnn: StageResult

    @property
    def curves(self) -> list[CurvePoint]:
        return self.cnn.curves + self.rnn.curves


def train_stage1(
    train_mats: np.ndarray,
    train_labels: np.ndarray,
    val_mats: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
) -> Stage1Result:
    """Train both branches independently on standardized covariance inputs."""
    seeds = _derived_seeds(config.seed)
    channels = train_mats.shape[1]
    cnn_params = init_cnn_params(config.cnn_spec(), channels, seeds["cnn_init"])
    rnn_params = init_rnn_params(
        config.rnn_spec(), channels, seeds["rnn_init"], config.rnn_order
    )

    def cnn_fn(x, p):
        return cnn_graph(Node(x), p)[1]

    def rnn_fn(x, p):
        return rnn_graph(x, p, config.rnn_order, config.rnn_axis)[1]

    common = dict(
        lr=config.lr_stage1, epochs=config.epochs_stage1,
        batch_size=config.batch_size, patience=config.patience,
    )
    cnn_result = _train_supervised(
        cnn_fn, cnn_params, train_mats, train_labels, val_mats, val_labels,
        shuffle_seed=seeds["cnn_shuffle"], stage="cnn", **common,
    )
    rnn_result = _train_supervised(
        rnn_fn, rnn_params, train_mats, train_labels, val_mats, val_labels,
        shuffle_seed=seeds["rnn_shuffle"], stage="rnn", **common,
    )
    return Stage1Result(cnn_result, rnn_result)


def train_stage2(train_features: np.ndarray, config: TrainConfig) -> StageResult:
    """Unsupervised autoencoder training on frozen stage-1 features."""
    seeds = _derived_seeds(config.seed)
    params = init_dae_params(config.dae_spec(), seeds["dae_init"])
    rng = np.random.default_rng(seeds["dae_shuffle"])
    n = train_features.shape[0]
    curves: list[CurvePoint] = []
    initial_loss = float(dae_loss(train_features, params).value)
    curves.append(CurvePoint(0, "dae", initial_loss))

    step = 0
    for epoch in range(1, config.epochs_stage2 + 1):
        perm = rng.permutation(n)
        batch_losses = []
        for bi, start in enumerate(range(0, n, config.batch_size)):
            idx = perm[start : start + config.batch_size]
            loss = dae_loss(train_features[idx], params)
            value = float(loss.value)
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss in stage 'dae' at epoch {epoch}, batch {bi}"
                )
            params.zero_grad()
            loss.backward()
            step += 1
            adam_step(params, config.lr_stage2, t=step)
            batch_losses.append(value)
        curves.append(CurvePoint(epoch, "dae", float(np.mean(batch_losses))))

    final_loss = float(dae_loss(train_features, params).value)
    epochs_run = len(curves) - 1
    return StageResult(params, curves, initial_loss, final_loss,
                       epochs_run, epochs_run)


def train_stage3(
    train_latents: np.ndarray,
    train_labels: np.ndarray,
    val_latents: np.ndarray,
    val_labels: np.ndarray,
    config: TrainConfig,
) -> StageResult:
    """Supervised head training on frozen-autoencoder latents."""
    seeds = _derived_seeds(config.seed)
    params = init_head_params(config.head_spec(), seeds["head_init"])

    def head_fn(z, p):
        return head_graph(Node(z), p)

    return _train_supervised(
        head_fn, params, train_latents, train_labels, val_latents, val_labels,
        lr=config.lr_stage3, epochs=config.epochs_stage3,
        batch_size=config.batch_size, patience=config.patience,
        shuffle_seed=seeds["head_shuffle"], stage="head",
    )


# ---------------------------------------------------------------------------
# evaluation and the full run
# ---------------------------------------------------------------------------


@dataclass
class PipelineArtifacts:
    config: TrainConfig
    classes: list[str]
    cnn: ParamStore
    rnn: ParamStore
    dae: ParamStore
    head: ParamStore
    norm: NormStats


@dataclass
class EvalResult:
    accuracy: float
    confusion: np.ndarray  # [K, K], rows = true class, cols = predicted
    precision: np.ndarray
    recall: np.ndarray
    count: int


def predict_batch(mats: np.ndarray, artifacts: PipelineArtifacts) -> tuple[np.ndarray, np.ndarray]:
    """(predicted labels, softmax probabilities) for standardized [N, C, C] input."""
    cfg = artifacts.config
    features = extract_features_batch(
        mats, artifacts.cnn, artifacts.rnn, cfg.rnn_order, cfg.rnn_axis
    )
    latents = dae_encode(features, artifacts.dae)
    logits = head_graph(Node(latents), artifacts.head).value
    probs = ad.softmax(logits)
    return np.argmax(probs, axis=1), probs


def evaluate_matrices(
    mats: np.ndarray, labels: np.ndarray, artifacts: PipelineArtifacts
) -> EvalResult:
    if mats.shape[0] == 0:
        raise DataError("evaluate: empty trial set")
    k = artifacts.config.classes
    predicted, _ = predict_batch(mats, artifacts)
    confusion = np.zeros((k, k), dtype=np.int64)
    for true, pred in zip(labels, predicted):
        confusion[true, pred] += 1
    total = confusion.sum()
    accuracy = float(np.trace(confusion) / total)
    col = confusion.sum(axis=0).astype(np.float64)
    row = confusion.sum(axis=1).astype(np.float64)
    diag = np.diag(confusion).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros(k), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(k), where=row > 0)
    return EvalResult(accuracy, confusion, precision, recall, int(total))


def evaluate(trials: list[Trial], artifacts: PipelineArtifacts) -> EvalResult:
    """Full-pipeline evaluation of raw trials against the stored statistics."""
    if not trials:
        raise DataError("evaluate: empty trial set")
    cfg = artifacts.config
    covs = [ccv(t, cfg.tau) for t in trials]
    covs, _ = standardize(covs, artifacts.norm)
    mats = np.stack([c.values for c in covs])
    labels = np.array([t.label for t in trials], dtype=np.int64)
    return evaluate_matrices(mats, labels, artifacts)


@dataclass
class RunOutcome:
    artifacts: PipelineArtifacts
    stage1: Stage1Result
    stage2: StageResult
    stage3: StageResult
    train_eval: EvalResult
    val_eval: EvalResult
    wall_clock: dict[str, float] = field(default_factory=dict)

    @property
    def curves(self) -> list[CurvePoint]:
        return self.stage1.curves + self.stage2.curves + self.stage3.curves


def run_training(
    trials: list[Trial], class_names: list[str], config: TrainConfig
) -> RunOutcome:
    """Split, standardize, train all three stages, and evaluate."""
    config.validate()
    if len(class_names) != config.classes:
        raise DataError(
            f"config declares {config.classes} classes but manifest has "
            f"{len(class_names)}"
        )
    clock: dict[str, float] = {}

    t0 = time.perf_counter()
    train_trials, val_trials = split(
        trials, config.split_fraction, config.seed, classes=config.classes
    )
    if not val_trials:
        raise DataError(
            f"validation split is empty ({len(trials)} trials at fraction "
            f"{config.split_fraction}); add trials or lower the fraction"
        )
    train_covs = [ccv(t, config.tau) for t in train_trials]
    val_covs = [ccv(t, config.tau) for t in val_trials]
    train_covs, norm = standardize(train_covs)
    val_covs, _ = standardize(val_covs, norm)
    train_mats = np.stack([c.values for c in train_covs])
    val_mats = np.stack([c.values for c in val_covs])
    train_labels = np.array([t.label for t in train_trials], dtype=np.int64)
    val_labels = np.array([t.label for t in val_trials], dtype=np.int64)
    clock["prep"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    stage1 = train_stage1(train_mats, train_labels, val_mats, val_labels, config)
    clock["stage1"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    train_features = extract_features_batch(
        train_mats, stage1.cnn.params, stage1.rnn.params,
        config.rnn_order, config.rnn_axis,
    )
    stage2 = train_stage2(train_features, config)
    clock["stage2"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    val_features = extract_features_batch(
        val_mats, stage1.cnn.params, stage1.rnn.params,
        config.rnn_order, config.rnn_axis,
    )
    train_latents = dae_encode(train_features, stage2.params)
    val_latents = dae_encode(val_features, stage2.params)
    stage3 = train_stage3(train_latents, train_labels, val_latents, val_labels, config)
    clock["stage3"] = time.perf_counter() - t0

    artifacts = PipelineArtifacts(
        config=config, classes=list(class_names),
        cnn=stage1.cnn.params, rnn=stage1.rnn.params,
        dae=stage2.params, head=stage3.params, norm=norm,
    )
    t0 = time.perf_counter()
    train_eval = evaluate_matrices(train_mats, train_labels, artifacts)
    val_eval = evaluate_matrices(val_mats, val_labels, artifacts)
    clock["eval"] = time.perf_counter() - t0

    return RunOutcome(artifacts, stage1, stage2, stage3, train_eval, val_eval, clock)
