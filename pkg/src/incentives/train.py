"""Small deterministic gradient-descent trainer with a pluggable loss."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .audit import PredictionLog
from .data import Dataset
from .decision import argmax_decisions, optimal_weighted_predictions
from .errors import DivergenceError, ValidationError
from .losses import LossSpec, loss_matrix
from .simplex import as_utility

FAMILIES = ("linear-softmax", "one-hidden-layer")
ACTIVATIONS = ("tanh", "relu")


@dataclass(frozen=True)
class ModelSpec:
    family: str = "linear-softmax"
    width: int = 16
    activation: str = "tanh"
    init_scale: float = 0.1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown model family {self.family!r}; expected one of {FAMILIES}")
        if self.family == "one-hidden-layer":
            if int(self.width) != self.width or self.width < 1:
                raise ValidationError("hidden width must be a positive integer")
            if self.activation not in ACTIVATIONS:
                raise ValidationError(f"activation must be one of {ACTIVATIONS}")
        if not self.init_scale >= 0:
            raise ValidationError("init_scale must be nonnegative")

    def to_dict(self) -> dict:
        return {"family": self.family, "width": self.width, "activation": self.activation, "init_scale": self.init_scale}

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        return cls(**d)

    def init_params(self, d: int, m: int, rng: np.random.Generator) -> dict:
        s = self.init_scale
        if self.family == "linear-softmax":
            shapes = {"W": (d, m), "b": (m,)}
        else:
            h = int(self.width)
            shapes = {"W1": (d, h), "b1": (h,), "W2": (h, m), "b2": (m,)}
        return {k: rng.uniform(-s, s, size=shape) for k, shape in shapes.items()}

    def _hidden(self, params, X):
        A = X @ params["W1"] + params["b1"]
        H = np.tanh(A) if self.activation == "tanh" else np.maximum(A, 0.0)
        return A, H

    def scores(self, params, X) -> np.ndarray:
        if self.family == "linear-softmax":
            return X @ params["W"] + params["b"]
        _, H = self._hidden(params, X)
        return H @ params["W2"] + params["b2"]

    def predict(self, params, X) -> np.ndarray:
        return softmax(self.scores(params, X))

    def backward(self, params, X, G) -> dict:
        """Parameter gradients of ``mean_i f_i`` given ``G[i] = df_i/dscores_i``."""
        n = X.shape[0]
        if self.family == "linear-softmax":
            return {"W": X.T @ G / n, "b": G.mean(axis=0)}
        A, H = self._hidden(params, X)
        dH = G @ params["W2"].T
        dA = dH * (1.0 - H * H) if self.activation == "tanh" else dH * (A > 0)
        return {"W1": X.T @ dA / n, "b1": dA.mean(axis=0), "W2": H.T @ G / n, "b2": G.mean(axis=0)}


def softmax(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    e = np.exp(Z - Z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_score_gradient(spec: LossSpec, Z, y) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample loss of ``softmax(Z)`` and its gradient with respect to ``Z``.

    Works for every base loss and any utility matrix; row ``i`` of the
    weight matrix is the utility column of label ``y[i]``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    y = np.asarray(y, dtype=int)
    P = softmax(Z)
    C = spec.label_weights(P.shape[1])[:, y - 1].T
    L = loss_matrix(spec.base, P, spec.clamp_epsilon)
    losses = np.sum(L * C, axis=1)
    if spec.base == "logistic":
        # p * dloss/dp, with the clamp cutting the gradient below epsilon
        Cm = np.where(P > spec.clamp_epsilon, C, 0.0)
        G = P * Cm.sum(axis=1, keepdims=True) - Cm
    else:
        gp = 2.0 * (C.sum(axis=1, keepdims=True) * P - C)
        G = P * (gp - np.sum(gp * P, axis=1, keepdims=True))
    return losses, G


@dataclass(frozen=True)
class TrainConfig:
    loss: LossSpec = field(default_factory=LossSpec)
    learning_rate: float = 0.5
    decay: float = 0.1
    interval: int = 50
    max_steps: int = 1000
    batch: int | str = "full"
    seed: int = 0
    plateau_tol: float = 1e-5

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValidationError("learning_rate must be nonnegative")
        if not 0 < self.decay <= 1:
            raise ValidationError("decay must lie in (0, 1]")
        if int(self.interval) != self.interval or self.interval < 1:
            raise ValidationError("interval must be a positive integer")
        if int(self.max_steps) != self.max_steps or self.max_steps < 0:
            raise ValidationError("max_steps must be a nonnegative integer")
        if self.batch != "full" and (isinstance(self.batch, str) or int(self.batch) != self.batch or self.batch < 1):
            raise ValidationError("batch must be 'full' or a positive integer")

    def replace(self, **kw) -> TrainConfig:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return TrainConfig(**d)

    def to_dict(self, weights_csv=None) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "loss"}
        d["loss"] = self.loss.to_dict(weights_csv)
        return d

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> TrainConfig:
        d = dict(d)
        loss = LossSpec.from_dict(d.pop("loss", {"base": "logistic"}), base_dir)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown train config keys: {sorted(unknown)}")
        return cls(loss=loss, **d)


@dataclass(frozen=True)
class IntervalRecord:
    step: int
    learning_rate: float
    test_log: PredictionLog
    losses: dict  # split -> spec name -> mean loss


@dataclass(frozen=True)
class RunTrace:
    intervals: tuple
    params: dict
    seed: int

    @property
    def steps(self) -> list[int]:
        return [r.step for r in self.intervals]

    def series(self, split: str = "train", name: str = "training") -> np.ndarray:
        return np.array([r.losses[split][name] for r in self.intervals])

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self.params):
            h.update(k.encode())
            h.update(np.ascontiguousarray(self.params[k]).tobytes())
        return h.hexdigest()


def _mean_loss(spec, P, y):
    return float(np.mean(np.sum(loss_matrix(spec.base, P, spec.clamp_epsilon) * spec.label_weights(P.shape[1])[:, y - 1].T, axis=1)))


def train(model: ModelSpec, data: Dataset, config: TrainConfig, eval_specs: dict | None = None) -> RunTrace:
    """Gradient descent on the training split.

    Evaluates at step 0 and every ``config.interval`` steps up to
    ``config.max_steps``. The learning rate is multiplied by ``decay``
    whenever validation loss fails to improve by ``plateau_tol``
    (relative) over one interval. There is no early stopping.
    """
    eval_specs = dict(eval_specs or {})
    parts = {s: data.part(s) for s in ("train", "validation", "test")}
    for s, (X, _, _) in parts.items():
        if X.shape[0] == 0:
            raise ValidationError(f"dataset split {s!r} is empty")
    Xtr, ytr, _ = parts["train"]
    rng = np.random.default_rng(config.seed)
    params = model.init_params(data.d, data.m, rng)
    batch_rng = np.random.default_rng([config.seed, 1])
    specs = {"training": config.loss, **eval_specs}

    lr = float(config.learning_rate)
    best_val = None
    records = []
    order, cursor = None, 0

    def record(step):
        losses = {}
        test_P = None
        for s, (X, y, _) in parts.items():
            P = model.predict(params, X)
            losses[s] = {name: _mean_loss(sp, P, y) for name, sp in specs.items()}
            if s == "test":
                test_P = P
        if not all(np.isfinite(v) for d in losses.values() for v in d.values()):
            raise DivergenceError(f"non-finite loss at step {step}", step=step)
        records.append(IntervalRecord(step, lr, PredictionLog(test_P, parts["test"][1]), losses))
        return losses["validation"]["training"]

    best_val = record(0)
    for step in range(1, config.max_steps + 1):
        if config.batch == "full":
            Xb, yb = Xtr, ytr
        else:
            if order is None or cursor + config.batch > order.size:
                order, cursor = batch_rng.permutation(Xtr.shape[0]), 0
            idx = order[cursor : cursor + config.batch]
            cursor += config.batch
            Xb, yb = Xtr[idx], ytr[idx]
        losses, G = loss_and_score_gradient(config.loss, model.scores(params, Xb), yb)
        if not np.all(np.isfinite(losses)) or not np.all(np.isfinite(G)):
            raise DivergenceError(f"non-finite loss at step {step}", step=step)
        grads = model.backward(params, Xb, G)
        for k in params:
            params[k] = params[k] - lr * grads[k]
        if step % config.interval == 0 or step == config.max_steps:
            val = record(step)
            if val > best_val * (1.0 - config.plateau_tol):
                lr *= config.decay
            else:
                best_val = val
    frozen = {k: v.copy() for k, v in params.items()}
    for v in frozen.values():
        v.setflags(write=False)
    return RunTrace(tuple(records), frozen, config.seed)


def evaluate_predictions(P, y, specs: dict, U) -> dict:
    """Losses and classification utility of raw and ex-post adjusted predictions.

    The adjustment replaces each prediction by the optimal weighted
    prediction under ``U``; decisions are argmax with lowest-index ties.
    """
    U = as_utility(U)
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=int)
    adjusted = optimal_weighted_predictions(U, P)
    out = {}
    for name, sp in specs.items():
        out[name] = {"raw": _mean_loss(sp, P, y), "adjusted": _mean_loss(sp, adjusted, y)}
    out["utility"] = {
        "raw": float(np.mean(U.entries[argmax_decisions(P) - 1, y - 1])),
        "adjusted": float(np.mean(U.entries[argmax_decisions(adjusted) - 1, y - 1])),
    }
    return out


def evaluate(model: ModelSpec, params: dict, data: Dataset, split: str, specs: dict, U) -> dict:
    X, y, _ = data.part(split)
    return evaluate_predictions(model.predict(params, X), y, specs, U)
