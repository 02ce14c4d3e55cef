"""Audits of prediction logs.

Groups predictions, recovers the empirical label distribution behind each
group, checks the learning identity and loss calibration, and computes the
percentage gains used to compare training regimes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decision import optimal_weighted_predictions
from .errors import ValidationError
from .losses import LossSpec, loss_matrix, sample_losses
from .simplex import SimplexVector, as_utility

SIG_DIGITS = 12


@dataclass(frozen=True)
class PredictionLog:
    """Predictions ``P`` (n x m) paired with realized 1-based labels ``Y``."""

    P: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        Y = np.asarray(self.Y).reshape(-1)
        if P.shape[0] == 0 or Y.size == 0:
            raise ValidationError("prediction log is empty")
        if P.shape[0] != Y.size:
            raise ValidationError(f"{P.shape[0]} predictions but {Y.size} labels")
        if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
            raise ValidationError("every prediction must be a probability vector")
        if np.any(Y != np.round(Y)) or np.any(Y < 1) or np.any(Y > P.shape[1]):
            raise ValidationError(f"labels must be class indices in 1..{P.shape[1]}")
        P.setflags(write=False)
        Y = Y.astype(int)
        Y.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Y", Y)

    @property
    def m(self) -> int:
        return self.P.shape[1]

    def __len__(self):
        return self.Y.size

    @classmethod
    def from_records(cls, records) -> PredictionLog:
        records = list(records)
        if not records:
            raise ValidationError("prediction log is empty")
        return cls(np.array([np.asarray(p, dtype=float) for p, _ in records]), np.array([y for _, y in records]))


@dataclass(frozen=True)
class Quantization:
    """``exact`` groups by 12-significant-digit decimal form; ``grid`` by cell index."""

    kind: str = "exact"
    resolution: float | None = None

    def __post_init__(self):
        if self.kind == "exact":
            if self.resolution is not None:
                raise ValidationError("exact quantization takes no resolution")
        elif self.kind == "grid":
            if self.resolution is None or not 0.01 <= self.resolution <= 1:
                raise ValidationError(f"grid resolution must lie in [0.01, 1], got {self.resolution!r}")
        else:
            raise ValidationError(f"unknown quantization {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> Quantization:
        text = text.strip()
        if text == "exact":
            return cls()
        if text.startswith("grid:"):
            try:
                return cls("grid", float(text[5:]))
            except ValueError:
                pass
        raise ValidationError(f"cannot parse quantization {text!r}; use 'exact' or 'grid:<resolution>'")

    def __str__(self):
        return "exact" if self.kind == "exact" else f"grid:{self.resolution:g}"

    def keys(self, P: np.ndarray) -> list[tuple]:
        if self.kind == "exact":
            return [tuple(f"{v:.{SIG_DIGITS}g}" for v in row) for row in P]
        cells = math.ceil(1.0 / self.resolution - 1e-9)
        idx = np.minimum(np.floor(P / self.resolution + 1e-12).astype(int), cells - 1)
        return [tuple(int(c) for c in row) for row in idx]


EXACT = Quantization()


@dataclass(frozen=True)
class Group:
    key: tuple
    count: int
    prediction: SimplexVector  # mean prediction of the group's records
    q_hat: SimplexVector
    diameter: float  # max-norm spread of the group's predictions
    members: np.ndarray


@dataclass(frozen=True)
class LearnedSummary:
    groups: dict
    quantization: Quantization

    @property
    def n(self) -> int:
        return sum(g.count for g in self.groups.values())

    def __getitem__(self, key):
        return self.groups[key]

    def group_of(self, p) -> Group:
        p = np.atleast_2d(np.asarray(p, dtype=float))
        return self.groups[self.quantization.keys(p)[0]]


def recover_what_is_learned(log: PredictionLog, quantization: Quantization = EXACT) -> LearnedSummary:
    """Empirical label frequencies within each group of equal predictions."""
    if not isinstance(log, PredictionLog):
        log = PredictionLog.from_records(log)
    keys = quantization.keys(log.P)
    index: dict[tuple, list[int]] = {}
    for i, k in enumerate(keys):
        index.setdefault(k, []).append(i)
    groups = {}
    for k in sorted(index):
        rows = np.asarray(index[k])
        counts = np.bincount(log.Y[rows] - 1, minlength=log.m).astype(float)
        P = log.P[rows]
        spread = float(np.max(P.max(axis=0) - P.min(axis=0)))
        groups[k] = Group(
            key=k,
            count=rows.size,
            prediction=SimplexVector(P.mean(axis=0)),
            q_hat=SimplexVector(counts / rows.size),
            diameter=spread,
            members=rows,
        )
    return LearnedSummary(groups, quantization)


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float
    gap: float


def learning_identity_check(log: PredictionLog, spec: LossSpec = LossSpec(), quantization: Quantization = EXACT) -> IdentityCheck:
    """Mean realized loss versus mean expected loss against recovered posteriors.

    Under exact grouping both sides agree up to round-off.
    """
    summary = recover_what_is_learned(log, quantization)
    lhs = float(np.mean(sample_losses(spec, log.P, log.Y)))
    W = spec.label_weights(log.m)
    L = loss_matrix(spec.base, log.P, spec.clamp_epsilon)
    total = 0.0
    for g in summary.groups.values():
        total += float(np.sum(L[g.members] @ (W @ g.q_hat.values)))
    rhs = total / len(log)
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


@dataclass(frozen=True)
class CalibrationCheck:
    max_deviation: float
    mean_deviation: float  # count-weighted
    groups: list


def loss_calibration_check(U, log: PredictionLog, quantization: Quantization = EXACT) -> CalibrationCheck:
    """Compare each group's prediction with the optimal weighted prediction at its recovered posterior."""
    U = as_utility(U)
    if U.m != log.m:
        raise ValidationError(f"utility has {U.m} classes, log has {log.m}")
    summary = recover_what_is_learned(log, quantization)
    rows = []
    for g in summary.groups.values():
        target = optimal_weighted_predictions(U, g.q_hat.values)[0]
        dev = float(np.max(np.abs(target - g.prediction.values)))
        rows.append(
            {
                "key": list(g.key),
                "count": g.count,
                "prediction": g.prediction.values.tolist(),
                "q_hat": g.q_hat.values.tolist(),
                "optimal_prediction": target.tolist(),
                "deviation": dev,
                "diameter": g.diameter,
            }
        )
    devs = np.array([r["deviation"] for r in rows])
    counts = np.array([r["count"] for r in rows], dtype=float)
    return CalibrationCheck(float(devs.max()), float(devs @ counts / counts.sum()), rows)


def misalignment_gain(metric_a: float, metric_b: float, direction: str = "loss") -> float:
    """Percentage improvement of ``metric_b`` over the baseline ``metric_a``.

    Positive means ``b`` is better: lower for ``direction="loss"``, higher
    for ``direction="utility"``.
    """
    if direction not in ("loss", "utility"):
        raise ValidationError(f"direction must be 'loss' or 'utility', got {direction!r}")
    a, b = float(metric_a), float(metric_b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValidationError("metrics must be finite")
    if a == 0:
        raise ValidationError("baseline metric is zero; percentage gain undefined")
    diff = a - b if direction == "loss" else b - a
    return diff / a * 100.0
