"""Dataset I/O: the trial container format, manifests, and synthetic EEG.

TrialFile layout (all little-endian):

    magic        4 bytes  b"EEGT"
    version      u32
    channels     u32
    samples      u32
    label        u32
    sample_rate  f32      provenance only; the pipeline is rate-agnostic
    payload      f32 * channels * samples, row-major

Manifest grammar (UTF-8, one "key = value" per line, '#' comments):

    task = long_words
    classes = cooperate,independent
    subject = S3
    trial = trials/t0000.eegt      # repeated; paths relative to manifest
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covariance import Trial
from .errors import ConfigError, DataError, ParseError

TRIAL_MAGIC = b"EEGT"
TRIAL_VERSION = 1
_HEADER = struct.Struct("<4sIIIIf")
_LABEL_OFFSET = 16  # byte offset of the label field within the header

# Class inventories of the public imagined-speech tasks this pipeline targets
# (label index = list position).
TASK_CLASSES: dict[str, list[str]] = {
    "vowels": ["a", "i", "u"],
    "short_words": ["in", "out", "up"],
    "long_words": ["cooperate", "independent"],
}

# Previously reported per-subject long-word accuracies (%), kept as comparison
# targets for runs on the real dataset; not reproducible from synthetic data.
REFERENCE_LONG_WORD_ACCURACY: dict[str, float] = {
    "S2": 77.5, "S3": 90.7, "S6": 73.7, "S7": 86.8, "S9": 80.1, "S11": 71.1,
}


def conversion_contract() -> dict[str, list[str]]:
    """Task -> ordered class names expected from a dataset converter."""
    return {task: list(names) for task, names in TASK_CLASSES.items()}


# ---------------------------------------------------------------------------
# trial files
# ---------------------------------------------------------------------------


def save_trial(path: str | Path, trial: Trial, sample_rate_hz: float = 0.0) -> None:
    """Write one trial; float64 samples are stored at float32 precision."""
    header = _HEADER.pack(
        TRIAL_MAGIC, TRIAL_VERSION, trial.channels, trial.samples,
        trial.label, sample_rate_hz,
    )
    payload = np.ascontiguousarray(trial.data, dtype="<f4").tobytes()
    Path(path).write_bytes(header + payload)


def load_trial(
    path: str | Path,
    max_label: int | None = None,
    subject_id: str = "",
) -> tuple[Trial, float]:
    """Read one trial file; returns (trial, sample_rate_hz)."""
    p = Path(path)
    if not p.exists():
        raise DataError(f"trial file not found: {p}")
    blob = p.read_bytes()
    if len(blob) < _HEADER.size:
        raise ParseError(
            f"{p}: truncated at byte {len(blob)} "
            f"(header needs {_HEADER.size} bytes)"
        )
    magic, version, channels, samples, label, rate = _HEADER.unpack_from(blob)
    if magic != TRIAL_MAGIC:
        raise ParseError(f"{p}: bad magic {magic!r} at byte 0 (expected {TRIAL_MAGIC!r})")
    if version != TRIAL_VERSION:
        raise ParseError(f"{p}: unsupported format version {version} at byte 4")
    expected = _HEADER.size + channels * samples * 4
    if len(blob) < expected:
        raise ParseError(
            f"{p}: truncated at byte {len(blob)} (payload needs {expected} bytes)"
        )
    if len(blob) > expected:
        raise ParseError(f"{p}: {len(blob) - expected} trailing bytes at byte {expected}")
    if max_label is not None and label >= max_label:
        raise ParseError(
            f"{p}: label {label} out of range [0, {max_label}) at byte {_LABEL_OFFSET}"
        )
    data = (
        np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
        .reshape(channels, samples)
        .astype(np.float64)
    )
    trial = Trial(data, int(label), subject_id=subject_id, trial_id=p.stem)
    return trial, float(rate)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Manifest:
    task: str
    classes: list[str]
    subject: str
    trial_paths: list[Path]

    def __post_init__(self):
        if not self.classes:
            raise DataError("manifest declares no classes")
        if len(set(self.classes)) != len(self.classes):
            raise DataError(f"duplicate class names: {self.classes}")


def load_manifest(path: str | Path) -> Manifest:
    p = Path(path)
    if not p.exists():
        raise DataError(f"manifest not found: {p}")
    task, subject, classes = "", "", []
    trial_paths: list[Path] = []
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"{p}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "task":
            task = value
        elif key == "subject":
            subject = value
        elif key == "classes":
            classes = [c.strip() for c in value.split(",") if c.strip()]
        elif key == "trial":
            trial_paths.append((p.parent / value).resolve())
        else:
            raise ParseError(f"{p}:{lineno}: unknown key {key!r}")
    return Manifest(task, classes, subject, trial_paths)


def save_manifest(path: str | Path, manifest: Manifest) -> None:
    p = Path(path)
    lines = [
        f"task = {manifest.task}",
        f"classes = {','.join(manifest.classes)}",
        f"subject = {manifest.subject}",
    ]
    for tp in manifest.trial_paths:
        rel = Path(tp)
        if rel.is_absolute():
            rel = rel.relative_to(p.parent.resolve())
        lines.append(f"trial = {rel.as_posix()}")
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load(manifest_path: str | Path) -> tuple[list[Trial], Manifest]:
    """Load every trial referenced by a manifest, labels validated against it."""
    manifest = load_manifest(manifest_path)
    k = len(manifest.classes)
    trials = []
    for tp in manifest.trial_paths:
        trial, _ = load_trial(tp, max_label=k, subject_id=manifest.subject)
        trials.append(trial)
    return trials, manifest


# ---------------------------------------------------------------------------
# synthetic EEG
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthSpec:
    channels: int = 8
    samples: int = 128
    classes: int = 3
    trials_per_class: int = 40
    noise_sigma: float = 0.05
    signature_strength: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if min(self.channels, self.samples, self.classes, self.trials_per_class) < 1:
            raise ConfigError("synth spec fields must be positive")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        if self.channels > self.samples // 2 - 1:
            raise ConfigError(
                f"need channels <= samples/2 - 1 for distinct source frequencies "
                f"({self.channels} channels, {self.samples} samples)"
            )


def gen_synth(spec: SynthSpec) -> list[Trial]:
    """Deterministic synthetic trials whose class identity lives in channel
    covariance.

    Each trial mixes unit-variance sinusoidal sources (random distinct integer
    cycle counts, random phases, exactly orthogonal over the window) through a
    class-specific matrix Q_k @ diag(gains), then adds white noise. The class
    covariance is then Q_k diag(gains^2) Q_k^T + noise, so separability decays
    as noise grows.
    """
    rng = np.random.default_rng(spec.seed)
    c, t_len = spec.channels, spec.samples
    gains = np.linspace(1.0, 1.0 + spec.signature_strength, c)

    mixers = []
    for _ in range(spec.classes):
        q, r = np.linalg.qr(rng.standard_normal((c, c)))
        q = q * np.where(np.diag(r) >= 0, 1.0, -1.0)  # canonical column signs
        mixers.append(q * gains)

    t_axis = np.arange(t_len)
    trials = []
    for k in range(spec.classes):
        for j in range(spec.trials_per_class):
            freqs = rng.choice(np.arange(1, t_len // 2), size=c, replace=False)
            phases = rng.uniform(0.0, 2.0 * np.pi, size=c)
            sources = np.sqrt(2.0) * np.sin(
                2.0 * np.pi * freqs[:, None] * t_axis / t_len + phases[:, None]
            )
            x = mixers[k] @ sources
            if spec.noise_sigma > 0:
                x = x + spec.noise_sigma * rng.standard_normal((c, t_len))
            # snap to storage precision so save -> load is the identity
            x = x.astype(np.float32).astype(np.float64)
            trials.append(Trial(x, k, subject_id="synth", trial_id=f"c{k}-t{j:03d}"))
    return trials


def write_synth_dataset(out_dir: str | Path, spec: SynthSpec, task: str = "synth") -> Path:
    """Materialize gen_synth output as trial files plus a manifest."""
    out = Path(out_dir)
    (out / "trials").mkdir(parents=True, exist_ok=True)
    trials = gen_synth(spec)
    paths = []
    for i, trial in enumerate(trials):
        rel = Path("trials") / f"t{i:04d}.eegt"
        save_trial(out / rel, trial, sample_rate_hz=0.0)
        paths.append((out / rel).resolve())
    manifest = Manifest(
        task=task,
        classes=[f"class{k}" for k in range(spec.classes)],
        subject="synth",
        trial_paths=paths,
    )
    manifest_path = out / "manifest.txt"
    save_manifest(manifest_path, manifest)
    return manifest_path
