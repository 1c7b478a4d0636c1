"""Channel cross-covariance features from raw multichannel trials."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

STD_FLOOR = 1e-8


@dataclass(frozen=True)
class Trial:
    """One recording: [channels, samples] float64 matrix plus a class label."""

    data: np.ndarray
    label: int
    subject_id: str = ""
    trial_id: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
            raise DataError(
                f"trial '{self.trial_id}': need at least 2 channels x 2 samples, "
                f"got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DataError(f"trial '{self.trial_id}': non-finite samples")
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def samples(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CovMatrix:
    """[C, C] channel covariance at integer lag (symmetric PSD at lag 0)."""

    values: np.ndarray
    lag: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, np.float64))


def ccv(trial: Trial, lag: int = 0) -> CovMatrix:
    """Channel cross-covariance of a trial at integer lag (in samples).

    out[i, j] = sum_t (x_i(t) - mu_i)(x_j(t + lag) - mu_j) / (W - 1) over the
    W = T - |lag| overlapping samples, with mu the per-channel mean of that
    window. lag 0 is the ordinary sample covariance, mirrored for exact
    symmetry.
    """
    t_len = trial.samples
    if abs(lag) >= t_len:
        raise ConfigError(f"lag {lag} out of range for {t_len}-sample trial")
    window = t_len - abs(lag)
    if window <= 1:
        raise DataError(f"degenerate {window}-sample overlap for lag {lag}")

    if lag >= 0:
        a = trial.data[:, : window]
        b = trial.data[:, lag : lag + window]
    else:
        a = trial.data[:, -lag :]
        b = trial.data[:, : window]
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    m = (a @ b.T) / (window - 1)
    if lag == 0:
        m = np.triu(m) + np.triu(m, 1).T
    return CovMatrix(m, lag)


@dataclass(frozen=True)
class NormStats:
    """Per-entry mean/std computed on a training set, reused verbatim elsewhere."""

    mean: np.ndarray
    std: np.ndarray  # floored at STD_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "mean", np.ascontiguousarray(self.mean, np.float64))
        object.__setattr__(self, "std", np.ascontiguousarray(self.std, np.float64))


def standardize(
    mats: list[CovMatrix], stats: NormStats | None = None
) -> tuple[list[CovMatrix], NormStats]:
    """Per-entry z-scoring. Fit stats when none are given, else apply them."""
    if not mats:
        raise DataError("standardize: empty matrix list")
    stacked = np.stack([m.values for m in mats])
    if stats is None:
        mean = stacked.mean(axis=0)
        std = np.maximum(stacked.std(axis=0), STD_FLOOR)
        stats = NormStats(mean, std)
    out = [CovMatrix((m.values - stats.mean) / stats.std, m.lag) for m in mats]
    return out, stats
