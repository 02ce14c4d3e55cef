"""Command-line entry point.

Exit codes: 0 on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from .audit import PredictionLog, Quantization, learning_identity_check, loss_calibration_check
from .benchmark import misalignment_benchmark_dict
from .data import DEFAULT_FRACTIONS, SPLITS, Dataset, MixtureSpec, generate_dataset
from .decision import analytic_recalibrations
from .errors import DivergenceError, NumericalError, ValidationError
from .experiment import ExperimentConfig, atomic_write, round_floats, run_experiment
from .learning import figure_curves
from .losses import BASES, LossSpec
from .simplex import UtilityMatrix, load_simplex_rows, validate_utility
from .train import ModelSpec, TrainConfig, train


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: invalid JSON ({e})") from None


def _dump_json(obj) -> str:
    return json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _fractions(text):
    if text is None:
        return dict(DEFAULT_FRACTIONS)
    parts = text.split(",")
    if len(parts) != 3:
        raise ValidationError("--fractions takes three comma-separated values: train,validation,test")
    try:
        return dict(zip(SPLITS, (float(p) for p in parts)))
    except ValueError:
        raise ValidationError(f"--fractions: not numbers: {text!r}") from None


def _load_utility(path) -> UtilityMatrix:
    if not Path(path).exists():
        raise ValidationError(f"no such file: {path}")
    return UtilityMatrix.load(path)


def _load_predictions(path) -> np.ndarray:
    if not Path(path).exists():
        raise ValidationError(f"no such file: {path}")
    try:
        return np.array([p.values for p in load_simplex_rows(path)])
    except ValueError as e:
        if isinstance(e, ValidationError):
            raise
        raise ValidationError(f"{path}: {e}") from None


def _load_labels(path) -> np.ndarray:
    if not Path(path).exists():
        raise ValidationError(f"no such file: {path}")
    tokens = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    try:
        return np.array([int(t) for t in tokens])
    except ValueError:
        raise ValidationError(f"{path}: labels must be integers, one per line") from None


def cmd_datagen(args) -> str:
    spec = MixtureSpec.from_dict(_read_json(args.mixture))
    data = generate_dataset(spec, args.n, _fractions(args.fractions), args.seed)
    atomic_write(Path(args.out), data.to_csv())
    return f"datagen: wrote {len(data)} rows (m={data.m}, d={data.d}) to {args.out}"


def cmd_train(args) -> str:
    path = Path(args.config)
    cfg = _read_json(path)
    extra = set(cfg) - {"model", "train"}
    if extra:
        raise ValidationError(f"unknown train config keys: {sorted(extra)}")
    model = ModelSpec.from_dict(cfg.get("model", {}))
    config = TrainConfig.from_dict(cfg.get("train", {}), base_dir=path.parent)
    if not Path(args.data).exists():
        raise ValidationError(f"no such file: {args.data}")
    data = Dataset.load(args.data)
    trace = train(model, data, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [
        [r.step, r.learning_rate] + [r.losses[s]["training"] for s in SPLITS] for r in trace.intervals
    ]
    atomic_write(out / "trace.csv", _csv_text(["step", "learning_rate"] + [f"{s}_loss" for s in SPLITS], rows))
    final = trace.intervals[-1]
    atomic_write(out / "test_predictions.csv", "".join(",".join(repr(float(v)) for v in p) + "\n" for p in final.test_log.P))
    summary = {
        "model": model.to_dict(),
        "seed": trace.seed,
        "steps": trace.steps[-1],
        "fingerprint": trace.fingerprint(),
        "final_loss": {s: final.losses[s]["training"] for s in SPLITS},
        "params": {k: v.tolist() for k, v in trace.params.items()},
    }
    atomic_write(out / "summary.json", _dump_json(summary))
    return f"train: {trace.steps[-1]} steps, final train loss {final.losses['train']['training']:.6g}, wrote {out}"


def cmd_experiment(args) -> str:
    if args.benchmark:
        cfg = ExperimentConfig.from_dict(misalignment_benchmark_dict())
    else:
        path = Path(args.config)
        cfg = ExperimentConfig.from_dict(_read_json(path), base_dir=path.parent)
    if args.parallelism is not None:
        cfg = dataclasses.replace(cfg, parallelism=args.parallelism)
    out = Path(args.out)
    try:
        report = run_experiment(cfg)
    except DivergenceError as e:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "partial.json", _dump_json(getattr(e, "partial", {})))
        raise
    report.write(out)
    g = report.gains.get("ex_post_weighting_vs_weighted_training", {}).get("weighted_loss", {}).get("mean")
    tail = f", ex-post gain on weighted loss {g:.2f}%" if g is not None else ""
    return f"experiment: {cfg.runs} runs x {len(cfg.regimes)} regimes{tail}; wrote {out / 'report.json'} and {out / 'series.csv'}"


def cmd_curves(args) -> str:
    table = figure_curves(args.w1, args.step)
    atomic_write(Path(args.out), table.to_csv())
    return f"curves: wrote {len(table)} rows to {args.out}"


def cmd_recalibrate(args) -> str:
    U = _load_utility(args.utility)
    P = _load_predictions(args.predictions)
    Q = analytic_recalibrations(U, P)
    atomic_write(Path(args.out), "".join(",".join(repr(float(v)) for v in q) + "\n" for q in Q))
    return f"recalibrate: wrote {len(Q)} rows to {args.out}"


def cmd_audit(args) -> str:
    P = _load_predictions(args.predictions)
    Y = _load_labels(args.labels)
    if P.shape[0] != Y.size:
        raise ValidationError(f"{P.shape[0]} predictions but {Y.size} labels")
    log = PredictionLog(P, Y)
    U = _load_utility(args.utility) if args.utility else validate_utility(np.eye(P.shape[1]))
    q = Quantization.parse(args.quantize)
    ident = learning_identity_check(log, LossSpec(args.base, U), q)
    cal = loss_calibration_check(U, log, q)
    report = {
        "n": len(log),
        "base": args.base,
        "quantization": args.quantize,
        "learning_identity": {"lhs": ident.lhs, "rhs": ident.rhs, "gap": ident.gap},
        "loss_calibration": {
            "max_deviation": cal.max_deviation,
            "mean_deviation": cal.mean_deviation,
            "groups": [
                {k: (list(v) if isinstance(v, tuple) else v) for k, v in g.items()} for g in cal.groups
            ],
        },
    }
    atomic_write(Path(args.out), _dump_json(report))
    return f"audit: {len(cal.groups)} groups, identity gap {ident.gap:.3g}, max calibration deviation {cal.max_deviation:.6g}"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="incentives", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("datagen", help="sample a Gaussian mixture dataset with exact posteriors")
    s.add_argument("--mixture", required=True, help="mixture JSON: {priors, means, stds}")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--fractions", help="train,validation,test (default 0.7,0.1,0.2)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_datagen)

    s = sub.add_parser("train", help="train one model on a dataset CSV")
    s.add_argument("--config", required=True, help="JSON with 'model' and 'train' objects")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("experiment", help="compare weighted training with ex-post weighting")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="experiment JSON")
    src.add_argument("--benchmark", action="store_true", help="use the shipped misalignment benchmark")
    s.add_argument("--parallelism", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("curves", help="binary learning-incentive curves")
    s.add_argument("--w1", type=float, required=True)
    s.add_argument("--step", type=float, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_curves)

    s = sub.add_parser("recalibrate", help="recover posteriors from weighted predictions")
    s.add_argument("--utility", required=True, help="utility matrix CSV")
    s.add_argument("--predictions", required=True, help="one prediction per line, comma-separated")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_recalibrate)

    s = sub.add_parser("audit", help="learning identity and loss calibration of a prediction log")
    s.add_argument("--predictions", required=True)
    s.add_argument("--labels", required=True, help="one 1-based label per line")
    s.add_argument("--utility", help="utility matrix CSV (default identity)")
    s.add_argument("--quantize", default="exact", help="exact or grid:<resolution>")
    s.add_argument("--base", choices=BASES, default="logistic")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        print(args.func(args))
    except ValidationError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
