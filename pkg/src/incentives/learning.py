"""Residual learning loss, its gradient, and the binary weight curves.

The residual learning loss of a posterior is the expected weighted loss left
after the prediction has been chosen optimally for that posterior. Its
gradient says how much the weighted loss rewards moving the posterior, that
is, how strong the incentive to learn is.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .decision import optimal_weighted_prediction
from .errors import BoundaryError, ValidationError
from .losses import DEFAULT_EPSILON, LossSpec, expected_loss, loss_vector
from .simplex import as_simplex, as_utility


def residual_learning_loss(U, q, base: str = "logistic") -> float:
    U = as_utility(U)
    p = optimal_weighted_prediction(U, q)
    return expected_loss(LossSpec(base, U), p, q)


def residual_learning_gradient(U, q, base: str = "logistic") -> np.ndarray:
    """Gradient of :func:`residual_learning_loss` with respect to ``q``.

    Component ``y`` is the weighted loss of the optimal prediction when the
    label is ``y``. Only defined at interior posteriors.
    """
    U = as_utility(U)
    q = as_simplex(q)
    if not q.is_interior():
        raise BoundaryError("residual learning gradient needs every class probability > 0")
    p = optimal_weighted_prediction(U, q)
    return loss_vector(base, p, DEFAULT_EPSILON) @ U.entries


def _binary_prediction(w1, q1):
    return w1 * q1 / (w1 * q1 + (1.0 - w1) * (1.0 - q1))


def _check_open(name, v):
    v = np.asarray(v, dtype=float)
    if np.any(~(v > 0) | ~(v < 1)):
        raise BoundaryError(f"{name} must lie strictly inside (0, 1)")
    return v


def binary_marginal_learning_loss(w1: float, q1: float) -> float:
    """Derivative of the binary residual learning loss in ``q1``.

    Weights are parameterized as ``(w1, 1 - w1)`` and the base loss is
    logistic.
    """
    w1 = float(_check_open("w1", w1))
    q1 = float(_check_open("q1", q1))
    p1 = _binary_prediction(w1, q1)
    return -w1 * np.log(p1) + (1.0 - w1) * np.log1p(-p1)


@dataclass(frozen=True)
class CurveTable:
    """Prediction, marginal and residual learning loss along a grid of ``q1``."""

    q1: np.ndarray
    prediction: np.ndarray
    marginal: np.ndarray
    residual: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return self.q1.size

    def row(self, q1: float) -> dict:
        i = int(np.argmin(np.abs(self.q1 - q1)))
        if abs(self.q1[i] - q1) > 1e-12:
            raise KeyError(q1)
        return {
            "q1": float(self.q1[i]),
            "prediction": float(self.prediction[i]),
            "marginal": float(self.marginal[i]),
            "residual": float(self.residual[i]),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        meta = " ".join(f"{k}={v:.12g}" if isinstance(v, float) else f"{k}={v}" for k, v in self.metadata.items())
        buf.write(f"# {meta}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["q1", "prediction", "marginal", "residual"])
        for row in zip(self.q1, self.prediction, self.marginal, self.residual):
            w.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


def figure_curves(w1: float, grid_step: float) -> CurveTable:
    """Binary curves for weights ``(w1, 1 - w1)`` on the open grid ``step, 2*step, ...``.

    The marginal column is the closed-form derivative; the residual column
    is the raw residual learning loss (no rescaling).
    """
    w1 = float(_check_open("w1", w1))
    if not 0 < grid_step < 1:
        raise ValidationError(f"grid step must lie in (0, 1), got {grid_step!r}")
    n = round(1.0 / grid_step)
    if n < 2 or abs(n * grid_step - 1.0) > 1e-9:
        raise ValidationError(f"grid step {grid_step!r} does not divide (0, 1) into equal cells")
    q1 = np.arange(1, n) / n
    w2 = 1.0 - w1
    p1 = _binary_prediction(w1, q1)
    marginal = -w1 * np.log(p1) + w2 * np.log1p(-p1)
    # expected loss of p under q, weighted: w1 q1 (-log p1) + w2 q2 (-log p2)
    residual = -w1 * q1 * np.log(p1) - w2 * (1.0 - q1) * np.log1p(-p1)
    meta = {
        "w1": w1,
        "w2": w2,
        "step": grid_step,
        "parameterization": "w1+w2=1",
        "base": "logistic",
        "residual": "raw",
    }
    return CurveTable(q1, p1, marginal, residual, meta)
