"""Command-line entry point: synthesize data, train, evaluate, inspect.

Exit codes: 0 success, 1 gradient-check failure, 2 configuration/state error,
3 data error, 4 numeric abort. Diagnostics go to stderr, results to stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autoenc import dae_encode, head_forward
from .branches import extract_features
from .config import config_from_dict, config_from_file
from .covariance import CovMatrix, ccv
from .data import SynthSpec, load, load_trial, write_synth_dataset
from .errors import ConfigError, DataError, NumericError, ShapeError, StateError
from .gradcheck import run_suite
from .report import (
    load_artifacts,
    load_report_json,
    read_curves_csv,
    save_run,
)
from .training import evaluate, run_training


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covdec",
        description="Hierarchical covariance-feature decoder for EEG trials.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--channels", type=int, default=8)
    p.add_argument("--samples", type=int, default=128)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--trials-per-class", type=int, default=40)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--strength", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("train", help="run the three training stages end to end")
    p.add_argument("--data", required=True, help="dataset manifest")
    p.add_argument("--out", required=True, help="run output directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--epochs", help="override epochs as E1,E2,E3")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained run on a dataset")
    p.add_argument("--data", required=True, help="dataset manifest")
    p.add_argument("--weights", required=True, help="trained run directory")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="classify one trial file")
    p.add_argument("--trial", required=True, help="trial file")
    p.add_argument("--weights", required=True, help="trained run directory")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer type")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("report", help="summarize a run directory")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(func=_cmd_report)
    return parser


def _cmd_gen_synth(args) -> int:
    spec = SynthSpec(
        channels=args.channels, samples=args.samples, classes=args.classes,
        trials_per_class=args.trials_per_class, noise_sigma=args.noise,
        signature_strength=args.strength, seed=args.seed,
    )
    manifest_path = write_synth_dataset(args.out, spec)
    # echo the generator settings next to the data for reproducibility
    echo = "\n".join(
        f"{k} = {v}"
        for k, v in (
            ("channels", spec.channels), ("samples", spec.samples),
            ("classes", spec.classes), ("trials_per_class", spec.trials_per_class),
            ("noise_sigma", spec.noise_sigma),
            ("signature_strength", spec.signature_strength), ("seed", spec.seed),
        )
    )
    (Path(args.out) / "synth.txt").write_text(echo + "\n", encoding="utf-8")
    print(f"wrote {spec.classes * spec.trials_per_class} trials, "
          f"manifest {manifest_path}")
    return 0


def _cmd_train(args) -> int:
    trials, manifest = load(args.data)
    values: dict = {}
    if args.config:
        # reparse as raw keys so flag overrides can layer on top
        config_from_file(args.config)  # full validation incl. unknown keys
        for line in Path(args.config).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                key, value = (s.strip() for s in line.split("=", 1))
                values[key] = value
    if args.seed is not None:
        values["seed"] = args.seed
    if args.epochs is not None:
        parts = args.epochs.split(",")
        if len(parts) != 3:
            raise ConfigError(f"--epochs wants E1,E2,E3, got {args.epochs!r}")
        values["epochs_stage1"], values["epochs_stage2"], values["epochs_stage3"] = parts

    declared = len(manifest.classes)
    if "classes" in values and int(values["classes"]) != declared:
        raise DataError(
            f"config declares {values['classes']} classes but manifest "
            f"{args.data} has {declared}"
        )
    values["classes"] = declared
    config = config_from_dict(values)

    outcome = run_training(trials, manifest.classes, config)
    report = save_run(args.out, outcome)
    print(f"run written to {args.out}")
    print(f"train accuracy = {report.train_accuracy:.4f}")
    print(f"val accuracy = {report.val_accuracy:.4f}")
    return 0


def _cmd_eval(args) -> int:
    artifacts = load_artifacts(args.weights)
    trials, manifest = load(args.data)
    if len(manifest.classes) != artifacts.config.classes:
        raise DataError(
            f"dataset has {len(manifest.classes)} classes, weights were trained "
            f"for {artifacts.config.classes}"
        )
    result = evaluate(trials, artifacts)
    print(f"trials = {result.count}")
    print(f"accuracy = {result.accuracy:.4f}")
    print("confusion matrix (rows = true, cols = predicted):")
    for name, row in zip(artifacts.classes, result.confusion):
        print(f"  {name:<12} " + " ".join(f"{v:4d}" for v in row))
    return 0


def _cmd_predict(args) -> int:
    artifacts = load_artifacts(args.weights)
    trial, _ = load_trial(args.trial)
    cfg = artifacts.config
    cov = ccv(trial, cfg.tau)
    cov = CovMatrix((cov.values - artifacts.norm.mean) / artifacts.norm.std, cov.lag)
    features = extract_features(
        cov, artifacts.cnn, artifacts.rnn, cfg.rnn_order, cfg.rnn_axis
    )
    latent = dae_encode(features, artifacts.dae)
    probs = ad.softmax(head_forward(latent, artifacts.head))
    label = int(np.argmax(probs))
    print(f"class = {artifacts.classes[label]}")
    for name, p in zip(artifacts.classes, probs):
        print(f"  p({name}) = {p:.6f}")
    return 0


def _cmd_gradcheck(args) -> int:
    results = run_suite(args.seed)
    failures = []
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.name:<14} rel_err = {r.rel_err:.3e}  (threshold {r.threshold:g})  {status}")
        if not r.passed:
            failures.append(r.name)
    if failures:
        print(f"gradient check failed for: {', '.join(failures)}", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    report = load_report_json(args.run)
    curves = read_curves_csv(Path(args.run) / "curves.csv")
    print(f"run {args.run}")
    print(f"classes: {', '.join(report['classes'])}")
    print(f"train accuracy = {report['train_accuracy']:.4f}")
    print(f"val accuracy = {report['val_accuracy']:.4f}")
    for stage in ("cnn", "rnn", "dae", "head"):
        points = [c for c in curves if c.stage == stage]
        if not points:
            print(f"{stage}: no curve data")
            continue
        trained = sum(1 for c in points if c.epoch > 0)
        first, last = points[0], points[-1]
        line = (f"{stage}: {trained} epochs, "
                f"train loss {first.train_loss:.4g} -> {last.train_loss:.4g}")
        with_val = [c for c in points if c.val_loss is not None]
        if with_val:
            best = min(with_val, key=lambda c: c.val_loss)
            line += f", best val loss {best.val_loss:.4g} at epoch {best.epoch}"
        print(line)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, StateError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
