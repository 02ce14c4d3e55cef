"""Three-regime comparison of weighted training against ex-post weighting.

Each run trains one model on the class-weighted loss (``weighted_training``)
and one on the unweighted loss. The unweighted model is scored twice: with
its predictions passed through the optimal weighted prediction map
(``ex_post_weighting``) and as is (``unweighted_raw``). Both trainings of a
run share the data draw and the parameter initialization.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audit import misalignment_gain
from .data import DEFAULT_FRACTIONS, Dataset, MixtureSpec, generate_dataset
from .errors import DivergenceError, ValidationError
from .losses import LossSpec, emphasis_ratio, inverse_probability_ratio, normalize_weights
from .simplex import class_weights_to_utility
from .train import ModelSpec, TrainConfig, evaluate_predictions, train

SCHEMA_VERSION = 1
REGIMES = ("weighted_training", "ex_post_weighting", "unweighted_raw")
METRICS = ("weighted_loss", "classification_utility")
DIRECTION = {"weighted_loss": "loss", "classification_utility": "utility"}
PARALLELISM_ENV = "INCENTIVES_PARALLELISM"


@dataclass(frozen=True)
class ExperimentConfig:
    mixture: MixtureSpec | None = None
    n: int = 0
    fractions: dict = field(default_factory=lambda: dict(DEFAULT_FRACTIONS))
    data_csv: str | None = None
    emphasized_class: int = 1
    weight_ratio: float = 99.0
    inverse_probability: bool = False
    model: ModelSpec = field(default_factory=ModelSpec)
    train: TrainConfig = field(default_factory=TrainConfig)
    runs: int = 5
    regimes: tuple = REGIMES
    base_seed: int = 0
    parallelism: int | None = None

    def __post_init__(self):
        if (self.mixture is None) == (self.data_csv is None):
            raise ValidationError("experiment needs exactly one dataset source: a mixture or a CSV path")
        if int(self.runs) != self.runs or self.runs < 1:
            raise ValidationError("run count must be a positive integer")
        regimes = tuple(self.regimes)
        if not regimes or any(r not in REGIMES for r in regimes):
            raise ValidationError(f"regimes must be a nonempty subset of {REGIMES}")
        object.__setattr__(self, "regimes", tuple(r for r in REGIMES if r in regimes))
        if not self.inverse_probability and not self.weight_ratio > 0:
            raise ValidationError("weight ratio must be positive")

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> ExperimentConfig:
        d = dict(d)
        ds = d.pop("dataset", None)
        if not isinstance(ds, dict):
            raise ValidationError("config needs a 'dataset' object")
        kw = {}
        if "csv" in ds:
            path = Path(ds["csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            kw["data_csv"] = str(path)
        else:
            kw["mixture"] = MixtureSpec.from_dict(ds.get("mixture", {}))
            kw["n"] = int(ds.get("n", 0))
            if "fractions" in ds:
                kw["fractions"] = dict(ds["fractions"])
        w = d.pop("weighting", {})
        kw["emphasized_class"] = int(w.get("emphasized_class", 1))
        kw["weight_ratio"] = float(w.get("ratio", 99.0))
        kw["inverse_probability"] = bool(w.get("inverse_probability", False))
        if "model" in d:
            kw["model"] = ModelSpec.from_dict(d.pop("model"))
        if "train" in d:
            kw["train"] = TrainConfig.from_dict(d.pop("train"), base_dir)
        for k in ("runs", "base_seed", "parallelism"):
            if k in d:
                kw[k] = d.pop(k)
        if "regimes" in d:
            kw["regimes"] = tuple(d.pop("regimes"))
        if d:
            raise ValidationError(f"unknown experiment config keys: {sorted(d)}")
        return cls(**kw)

    def to_dict(self) -> dict:
        if self.data_csv is not None:
            ds = {"csv": self.data_csv}
        else:
            ds = {"mixture": self.mixture.to_dict(), "n": self.n, "fractions": self.fractions}
        w = {"inverse_probability": True} if self.inverse_probability else {
            "emphasized_class": self.emphasized_class,
            "ratio": self.weight_ratio,
        }
        train_d = {k: getattr(self.train, k) for k in self.train.__dataclass_fields__ if k != "loss"}
        # the template's base loss is used; its weighting is replaced per run
        train_d["loss"] = {"base": self.train.loss.base, "clamp_epsilon": self.train.loss.clamp_epsilon}
        return {
            "dataset": ds,
            "weighting": w,
            "model": self.model.to_dict(),
            "train": train_d,
            "runs": self.runs,
            "regimes": list(self.regimes),
            "base_seed": self.base_seed,
        }


def _dataset(config: ExperimentConfig, seed: int) -> Dataset:
    if config.data_csv is not None:
        return Dataset.load(config.data_csv)
    return generate_dataset(config.mixture, config.n, config.fractions, seed)


def _run_one(config: ExperimentConfig, k: int) -> dict:
    seed = config.base_seed + k
    data = _dataset(config, seed)
    prior = data.prior("train")
    base = config.train.loss.base
    if config.inverse_probability:
        ratio = inverse_probability_ratio(prior)
    else:
        ratio = emphasis_ratio(data.m, config.emphasized_class, config.weight_ratio)
    weights = normalize_weights(ratio, prior, base)
    U = class_weights_to_utility(weights)
    weighted = LossSpec(base, U, config.train.loss.clamp_epsilon)
    unweighted = weighted.unweighted()
    specs = {"weighted_loss": weighted}

    rows = []
    fingerprints = {}

    def score(trace, regimes_adjusted):
        for rec in trace.intervals:
            ev = evaluate_predictions(rec.test_log.P, rec.test_log.Y, specs, U)
            for regime, key in regimes_adjusted:
                rows.append(
                    {
                        "run": k,
                        "seed": seed,
                        "regime": regime,
                        "step": rec.step,
                        "weighted_loss": ev["weighted_loss"][key],
                        "classification_utility": ev["utility"][key],
                    }
                )

    if "weighted_training" in config.regimes:
        trace = train(config.model, data, config.train.replace(loss=weighted, seed=seed))
        fingerprints["weighted_training"] = trace.fingerprint()
        score(trace, [("weighted_training", "raw")])
    shared = [(r, "adjusted" if r == "ex_post_weighting" else "raw") for r in ("ex_post_weighting", "unweighted_raw") if r in config.regimes]
    if shared:
        trace = train(config.model, data, config.train.replace(loss=unweighted, seed=seed))
        for r, _ in shared:
            fingerprints[r] = trace.fingerprint()
        score(trace, shared)
    return {
        "run": k,
        "seed": seed,
        "train_prior": prior.values.tolist(),
        "weights": weights.tolist(),
        "fingerprints": fingerprints,
        "series": rows,
    }


def _best(rows, regime, metric):
    vals = [r[metric] for r in rows if r["regime"] == regime]
    return min(vals) if DIRECTION[metric] == "loss" else max(vals)


def summarize(run_results: list, regimes) -> tuple[dict, dict]:
    """Per-regime mean/min/max of each run's best interval, and pairwise gains."""
    summary = {}
    for regime in regimes:
        summary[regime] = {}
        for metric in METRICS:
            best = [_best(r["series"], regime, metric) for r in run_results]
            summary[regime][metric] = {
                "mean": float(np.mean(best)),
                "min": float(np.min(best)),
                "max": float(np.max(best)),
                "per_run": best,
            }
    gains = {}
    for other in ("ex_post_weighting", "unweighted_raw"):
        if "weighted_training" not in regimes or other not in regimes:
            continue
        g = {}
        for metric in METRICS:
            a, b = summary["weighted_training"][metric], summary[other][metric]
            d = DIRECTION[metric]
            g[metric] = {
                stat: misalignment_gain(a[stat], b[stat], d) for stat in ("mean", "min", "max")
            }
            g[metric]["per_run"] = [misalignment_gain(x, y, d) for x, y in zip(a["per_run"], b["per_run"])]
        gains[f"{other}_vs_weighted_training"] = g
    return summary, gains


@dataclass(frozen=True)
class Report:
    config: dict
    runs: list
    summary: dict
    gains: dict

    def series_rows(self) -> list[dict]:
        return [row for r in self.runs for row in r["series"]]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config,
            "pairing": "summary gains compare the mean/min/max rows; per_run gains pair runs by seed",
            "summary": self.summary,
            "gains": self.gains,
            "runs": [{k: v for k, v in r.items() if k != "series"} for r in self.runs],
        }

    def to_json(self) -> str:
        return json.dumps(round_floats(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def series_csv(self) -> str:
        buf = io.StringIO()
        cols = ["run", "seed", "regime", "step", "weighted_loss", "classification_utility"]
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.series_rows():
            w.writerow([f"{row[c]:.12g}" if isinstance(row[c], float) else row[c] for c in cols])
        return buf.getvalue()

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        atomic_write(out / "report.json", self.to_json())
        atomic_write(out / "series.csv", self.series_csv())

    def table(self) -> str:
        """Plain-text layout mirroring the usual mean/min/max comparison table."""
        lines = []
        head = f"{'':6}" + "".join(f"{r[:18]:>20}" for r in self.summary) + f"{'% gain':>10}"
        for metric in METRICS:
            lines.append(metric)
            lines.append(head)
            for stat in ("mean", "min", "max"):
                vals = "".join(f"{self.summary[r][metric][stat]:>20.4f}" for r in self.summary)
                g = self.gains.get("ex_post_weighting_vs_weighted_training", {}).get(metric, {}).get(stat)
                lines.append(f"{stat:6}{vals}" + (f"{g:>10.2f}" if g is not None else ""))
        return "\n".join(lines)


def round_floats(obj, digits: int = 12):
    if isinstance(obj, float):
        return float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def default_parallelism() -> int:
    try:
        return max(1, int(os.environ.get(PARALLELISM_ENV, "1")))
    except ValueError:
        raise ValidationError(f"{PARALLELISM_ENV} must be an integer") from None


def run_experiment(config: ExperimentConfig) -> Report:
    """Train, evaluate and aggregate every run.

    A divergent run aborts the experiment; the raised
    :class:`DivergenceError` carries the completed runs in ``partial``.
    """
    workers = config.parallelism or default_parallelism()
    results = []
    try:
        if workers > 1 and config.runs > 1:
            with ProcessPoolExecutor(max_workers=min(workers, config.runs)) as pool:
                futures = [pool.submit(_run_one, config, k) for k in range(config.runs)]
                for f in futures:
                    results.append(f.result())
        else:
            for k in range(config.runs):
                results.append(_run_one(config, k))
    except DivergenceError as e:
        e.partial = {"schema_version": SCHEMA_VERSION, "completed_runs": results, "failed_step": e.step}
        raise
    summary, gains = summarize(results, config.regimes)
    return Report(config.to_dict(), results, summary, gains)
