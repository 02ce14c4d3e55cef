"""Synthetic Gaussian-mixture data with exact Bayes posteriors."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .simplex import SimplexVector, as_simplex

SPLITS = ("train", "validation", "test")
DEFAULT_FRACTIONS = {"train": 0.7, "validation": 0.1, "test": 0.2}


@dataclass(frozen=True)
class MixtureSpec:
    """Class priors and one isotropic normal per class."""

    priors: SimplexVector
    means: np.ndarray  # (m, d)
    stds: np.ndarray  # (m,)

    def __post_init__(self):
        priors = as_simplex(self.priors)
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        stds = np.broadcast_to(np.asarray(self.stds, dtype=float), (priors.m,)).copy()
        if np.any(priors.values <= 0):
            raise ValidationError("mixture priors must be strictly positive")
        if means.shape[0] != priors.m:
            raise ValidationError(f"{means.shape[0]} class means for {priors.m} classes")
        if means.shape[1] < 1:
            raise ValidationError("feature dimension must be at least 1")
        if np.any(~(stds > 0)):
            raise ValidationError("standard deviations must be positive")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "priors", priors)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def m(self) -> int:
        return self.priors.m

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def to_dict(self) -> dict:
        return {"priors": self.priors.values.tolist(), "means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> MixtureSpec:
        try:
            return cls(d["priors"], d["means"], d["stds"])
        except KeyError as e:
            raise ValidationError(f"mixture spec missing key {e}") from None


def log_joint(spec: MixtureSpec, X) -> np.ndarray:
    """Log prior plus log density of each class at each row of ``X``, up to a shared constant."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != spec.d:
        raise ValidationError(f"features have dimension {X.shape[1]}, mixture has {spec.d}")
    sq = ((X[:, None, :] - spec.means[None, :, :]) ** 2).sum(axis=2)
    return np.log(spec.priors.values) - spec.d * np.log(spec.stds) - sq / (2.0 * spec.stds**2)


def true_posteriors(spec: MixtureSpec, X) -> np.ndarray:
    z = log_joint(spec, X)
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def true_posterior(spec: MixtureSpec, x) -> SimplexVector:
    return SimplexVector(true_posteriors(spec, np.asarray(x, dtype=float).reshape(1, -1))[0])


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray  # 1-based labels
    q_true: np.ndarray
    split: np.ndarray  # one of SPLITS per row
    seed: int | None = None
    fractions: dict = field(default_factory=lambda: dict(DEFAULT_FRACTIONS))

    @property
    def m(self) -> int:
        return self.q_true.shape[1]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self):
        return self.y.size

    def part(self, name: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(X, y, q_true)`` restricted to one split."""
        if name not in SPLITS:
            raise ValidationError(f"unknown split {name!r}")
        mask = self.split == name
        return self.X[mask], self.y[mask], self.q_true[mask]

    def prior(self, name: str = "train") -> SimplexVector:
        """Empirical label frequencies of a split."""
        _, y, _ = self.part(name)
        if y.size == 0:
            raise ValidationError(f"split {name!r} is empty")
        return SimplexVector(np.bincount(y - 1, minlength=self.m) / y.size)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(1, self.d + 1)] + ["label"] + [f"q{i}" for i in range(1, self.m + 1)] + ["split"])
        for x, y, q, s in zip(self.X, self.y, self.q_true, self.split):
            w.writerow([repr(float(v)) for v in x] + [int(y)] + [repr(float(v)) for v in q] + [s])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> Dataset:
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValidationError("dataset CSV is empty")
        header, body = rows[0], rows[1:]
        if "label" not in header or header[-1] != "split":
            raise ValidationError("dataset CSV header must be x1..xd,label,q1..qm,split")
        li = header.index("label")
        m = len(header) - li - 2
        if m < 2 or li < 1:
            raise ValidationError("dataset CSV needs at least one feature and two classes")
        X = np.array([[float(c) for c in r[:li]] for r in body]).reshape(-1, li)
        y = np.array([int(r[li]) for r in body], dtype=int)
        Q = np.array([[float(c) for c in r[li + 1 : li + 1 + m]] for r in body]).reshape(-1, m)
        split = np.array([r[-1] for r in body])
        if np.any(~np.isin(split, SPLITS)):
            raise ValidationError(f"split column must contain only {SPLITS}")
        if np.any((y < 1) | (y > m)):
            raise ValidationError(f"labels must lie in 1..{m}")
        fractions = {s: float(np.mean(split == s)) for s in SPLITS}
        return cls(X, y, Q, split, None, fractions)

    @classmethod
    def load(cls, path) -> Dataset:
        return cls.from_csv(Path(path).read_text())


def _split_counts(n, fractions):
    counts = [int(np.floor(n * fractions[s])) for s in SPLITS]
    counts[0] += n - sum(counts)
    return counts


def generate_dataset(spec: MixtureSpec, n: int, fractions: dict | None = None, seed: int = 0) -> Dataset:
    """Sample ``n`` labelled points and tag them train/validation/test.

    Labels are drawn from the priors, features from the label's normal
    component, and ``q_true`` is the exact posterior at each point.
    """
    fractions = dict(DEFAULT_FRACTIONS if fractions is None else fractions)
    if set(fractions) != set(SPLITS):
        raise ValidationError(f"split fractions must name exactly {SPLITS}")
    if any(not f > 0 for f in fractions.values()) or abs(sum(fractions.values()) - 1) > 1e-9:
        raise ValidationError("split fractions must be positive and sum to 1")
    if int(n) != n or n < spec.m:
        raise ValidationError(f"need an integer n >= m={spec.m}, got {n!r}")
    n = int(n)
    rng = np.random.default_rng(seed)
    y = rng.choice(spec.m, size=n, p=spec.priors.values) + 1
    X = spec.means[y - 1] + rng.standard_normal((n, spec.d)) * spec.stds[y - 1, None]
    split = np.empty(n, dtype=object)
    order = rng.permutation(n)
    start = 0
    for name, c in zip(SPLITS, _split_counts(n, fractions)):
        split[order[start : start + c]] = name
        start += c
    return Dataset(X, y, true_posteriors(spec, X), split.astype(str), seed, fractions)
