"""Proper base losses and their utility-weighted versions.

Losses use natural logarithms. A cost matrix is handled by the same code as
a utility matrix (both weight the base loss of each label), so there is no
separate cost type.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .simplex import (
    UtilityMatrix,
    as_simplex,
    as_utility,
    check_class,
    class_weights_to_utility,
)

BASES = ("logistic", "brier")
DEFAULT_EPSILON = 1e-12


def _check_base(base: str) -> str:
    if base not in BASES:
        raise ValidationError(f"unknown base loss {base!r}; expected one of {BASES}")
    return base


@dataclass(frozen=True)
class LossSpec:
    """Base proper loss plus optional utility weighting.

    ``utility=None`` means the plain base loss.
    """

    base: str = "logistic"
    utility: UtilityMatrix | None = None
    clamp_epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        _check_base(self.base)
        if not 0 < self.clamp_epsilon <= 1e-6:
            raise ValidationError(f"clamp_epsilon must lie in (0, 1e-6], got {self.clamp_epsilon!r}")
        if self.utility is not None:
            object.__setattr__(self, "utility", as_utility(self.utility))

    @property
    def weighted(self) -> bool:
        return self.utility is not None

    def unweighted(self) -> LossSpec:
        return LossSpec(self.base, None, self.clamp_epsilon)

    def with_utility(self, U) -> LossSpec:
        return LossSpec(self.base, U, self.clamp_epsilon)

    def label_weights(self, m: int) -> np.ndarray:
        """Matrix whose column ``y`` weights the base losses when the label is ``y``."""
        if self.utility is None:
            return np.eye(m)
        if self.utility.m != m:
            raise ValidationError(f"utility has {self.utility.m} classes, predictions have {m}")
        return self.utility.entries

    def to_dict(self, weights_csv: str | None = None) -> dict:
        if self.utility is not None and weights_csv is None:
            raise ValidationError("a weighted LossSpec needs a weights_csv path to serialize")
        return {"base": self.base, "weights_csv": weights_csv, "clamp_epsilon": self.clamp_epsilon}

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> LossSpec:
        extra = set(d) - {"base", "weights_csv", "clamp_epsilon"}
        if extra:
            raise ValidationError(f"unknown LossSpec keys: {sorted(extra)}")
        U = None
        if d.get("weights_csv"):
            path = Path(d["weights_csv"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            U = UtilityMatrix.load(path)
        return cls(d.get("base", "logistic"), U, float(d.get("clamp_epsilon", DEFAULT_EPSILON)))


def loss_matrix(base: str, P, clamp_epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Base loss of every prediction row against every label.

    Returns ``L`` with ``L[i, y]`` the loss of prediction ``P[i]`` when the
    label is class ``y + 1``.
    """
    _check_base(base)
    P = np.asarray(P, dtype=float)
    if base == "logistic":
        return -np.log(np.maximum(P, clamp_epsilon))
    sq = np.sum(P * P, axis=-1, keepdims=True)
    return sq - 2.0 * P + 1.0


def loss_vector(base: str, p, clamp_epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    return loss_matrix(base, as_simplex(p).values, clamp_epsilon)


def sample_losses(spec: LossSpec, P, y) -> np.ndarray:
    """Per-record loss under ``spec`` for predictions ``P`` and 1-based labels ``y``."""
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=int)
    L = loss_matrix(spec.base, P, spec.clamp_epsilon)
    W = spec.label_weights(P.shape[1])
    # row i: sum over y' of L[i, y'] * W[y', y_i]
    return np.einsum("ij,ji->i", L, W[:, y - 1])


def point_loss(spec: LossSpec, p, y: int) -> float:
    p = as_simplex(p)
    y = check_class(y, p.m)
    L = loss_vector(spec.base, p, spec.clamp_epsilon)
    if spec.utility is None:
        return float(L[y - 1])
    return float(L @ spec.label_weights(p.m)[:, y - 1])


def utility_weighted_loss(U, base: str, p, y: int, clamp_epsilon: float = DEFAULT_EPSILON) -> float:
    """Base losses of every label weighted by the utility column of label ``y``."""
    U = as_utility(U)
    p = as_simplex(p)
    if p.m != U.m:
        raise ValidationError(f"dimension mismatch: p has {p.m} classes, U has {U.m}")
    y = check_class(y, U.m)
    return float(loss_vector(base, p, clamp_epsilon) @ U.entries[:, y - 1])


def expected_loss(spec: LossSpec, p, q) -> float:
    p, q = as_simplex(p), as_simplex(q)
    if p.m != q.m:
        raise ValidationError(f"dimension mismatch: p has {p.m} classes, q has {q.m}")
    L = loss_vector(spec.base, p, spec.clamp_epsilon)
    return float(L @ (spec.label_weights(q.m) @ q.values))


def normalize_weights(ratio, mu, base: str = "logistic", clamp_epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Rescale relative class weights so predicting the prior costs the same.

    Finds ``k > 0`` such that the class-weighted expected loss of predicting
    ``mu`` under ``mu`` equals the unweighted one, and returns ``k * ratio``.
    For a uniform prior the result sums to the number of classes.
    """
    ratio = np.asarray(ratio, dtype=float)
    mu = as_simplex(mu)
    if ratio.shape != (mu.m,):
        raise ValidationError(f"ratio has shape {ratio.shape}, prior has {mu.m} classes")
    bad = np.flatnonzero(~(ratio > 0) | ~np.isfinite(ratio))
    if bad.size:
        raise ValidationError(f"weight ratio {bad[0] + 1} must be positive, got {ratio[bad[0]]!r}")
    zero = np.flatnonzero(mu.values <= 0)
    if zero.size:
        raise ValidationError(f"prior has zero mass on class {zero[0] + 1}; agnostic loss undefined")
    per_class = mu.values * loss_vector(base, mu, clamp_epsilon)
    target = per_class.sum()
    unit = (ratio * per_class).sum()
    return ratio * (target / unit)


def inverse_probability_ratio(mu) -> np.ndarray:
    """Relative weights equalizing ``w_y * mu_y`` across classes."""
    mu = as_simplex(mu)
    if np.any(mu.values <= 0):
        raise ValidationError("inverse probability weights need a strictly positive prior")
    return 1.0 / mu.values


def emphasis_ratio(m: int, emphasized: int, ratio: float = 99.0) -> np.ndarray:
    """Relative weights with ``emphasized`` weighted ``ratio`` times every other class."""
    emphasized = check_class(emphasized, m)
    if not ratio > 0:
        raise ValidationError(f"weight ratio must be positive, got {ratio!r}")
    r = np.ones(m)
    r[emphasized - 1] = ratio
    return r


def normalized_class_utility(ratio, mu, base: str = "logistic") -> UtilityMatrix:
    return class_weights_to_utility(normalize_weights(ratio, mu, base))
