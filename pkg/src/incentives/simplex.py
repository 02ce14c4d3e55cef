"""Probability vectors over classes and classification utility matrices.

Class indices are 1-based everywhere in the public interface; arrays are
stored 0-based internally.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegeneracyError, NonnegativityError, ValidationError

SUM_TOL = 1e-9
# Beyond this condition estimate a recovered posterior is numerically meaningless.
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ClassSpace:
    m: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValidationError(f"class space needs m >= 2, got {self.m}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(1, self.m + 1)))
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != self.m:
            raise ValidationError(f"expected {self.m} labels, got {len(labels)}")
        if len(set(labels)) != self.m:
            raise ValidationError("class labels must be unique")
        object.__setattr__(self, "labels", labels)

    def index(self, label: str) -> int:
        """1-based index of ``label``."""
        try:
            return self.labels.index(str(label)) + 1
        except ValueError:
            raise ValidationError(f"unknown class label {label!r}") from None

    def label(self, y: int) -> str:
        return self.labels[check_class(y, self.m) - 1]


def check_class(y, m: int) -> int:
    """Validate a 1-based class index and return it as ``int``."""
    if isinstance(y, (bool, np.bool_)) or int(y) != y or not 1 <= int(y) <= m:
        raise ValidationError(f"class index {y!r} outside 1..{m}")
    return int(y)


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class SimplexVector:
    """An immutable probability distribution over ``m`` classes.

    Inputs whose sum is within ``SUM_TOL`` of one are renormalized on
    construction; anything else is rejected.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValidationError(f"simplex vector must be 1-d and nonempty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("simplex vector has non-finite entries")
        bad = np.flatnonzero(v < 0)
        if bad.size:
            raise ValidationError(f"negative probability at index {bad[0] + 1}: {v[bad[0]]!r}")
        s = v.sum()
        if abs(s - 1.0) > SUM_TOL:
            raise ValidationError(f"probabilities sum to {s!r}, not 1")
        if s != 1.0:
            v = v / s
        self._values = _readonly(v)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def m(self) -> int:
        return self._values.size

    def __array__(self, dtype=None, copy=None):
        return self._values if dtype is None else self._values.astype(dtype)

    def __len__(self):
        return self._values.size

    def __iter__(self):
        return iter(self._values.tolist())

    def __getitem__(self, y: int) -> float:
        """Probability of the 1-based class ``y``."""
        return float(self._values[check_class(y, self.m) - 1])

    def __eq__(self, other):
        if isinstance(other, SimplexVector):
            return np.array_equal(self._values, other._values)
        return NotImplemented

    def __hash__(self):
        return hash(self._values.tobytes())

    def __repr__(self):
        return f"SimplexVector({self._values.tolist()!r})"

    def is_interior(self) -> bool:
        return bool(np.all(self._values > 0))

    def to_csv_row(self) -> str:
        return ",".join(repr(float(v)) for v in self._values)

    @classmethod
    def from_csv_row(cls, line: str) -> SimplexVector:
        return cls([float(t) for t in line.strip().split(",")])


def as_simplex(q) -> SimplexVector:
    return q if isinstance(q, SimplexVector) else SimplexVector(q)


def simplex_normalize(v) -> SimplexVector:
    """Scale a nonnegative vector with positive mass onto the simplex."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("expected a nonempty 1-d vector")
    bad = np.flatnonzero(~np.isfinite(v) | (v < 0))
    if bad.size:
        raise ValidationError(f"entry at index {bad[0] + 1} is negative or non-finite: {v[bad[0]]!r}")
    s = v.sum()
    if not s > 0:
        raise ValidationError(f"entries 1..{v.size} are all zero; nothing to normalize")
    return SimplexVector(v / s)


@dataclass(frozen=True, eq=False)
class UtilityMatrix:
    """Nonnegative, nondegenerate classification utility.

    ``entries[a - 1, y - 1]`` is the utility of deciding class ``a`` when
    the true class is ``y``. The same type carries misclassification costs
    for the doubly-weighted losses: a nonnegative cost matrix enters the
    loss and prediction formulas exactly as a utility does.

    Build instances through :func:`validate_utility` or
    :func:`class_weights_to_utility`.
    """

    entries: np.ndarray
    is_diagonal: bool = field(default=False)
    condition: float = field(default=np.inf)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def invertible(self) -> bool:
        return bool(np.isfinite(self.condition) and self.condition <= MAX_CONDITION)

    @property
    def is_scalar(self) -> bool:
        """True when the matrix is a positive multiple of the identity."""
        d = np.diag(self.entries)
        return self.is_diagonal and bool(np.all(d == d[0]))

    @property
    def weights(self) -> np.ndarray:
        if not self.is_diagonal:
            raise ValidationError("utility matrix is not diagonal; no class weights")
        return np.diag(self.entries).copy()

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if isinstance(other, UtilityMatrix):
            return np.array_equal(self.entries, other.entries)
        return NotImplemented

    def __hash__(self):
        return hash(self.entries.tobytes())

    def scaled(self, k: float) -> UtilityMatrix:
        return validate_utility(self.entries * k)

    def to_csv(self) -> str:
        return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in self.entries)

    @classmethod
    def from_csv(cls, text: str) -> UtilityMatrix:
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        return validate_utility([[float(c) for c in r] for r in rows])

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def load(cls, path) -> UtilityMatrix:
        return cls.from_csv(Path(path).read_text())


def validate_utility(entries, classes: ClassSpace | None = None) -> UtilityMatrix:
    """Check nonnegativity and nondegeneracy of a square utility matrix.

    Invertibility is reported (``invertible`` and ``condition``), not
    required.
    """
    try:
        u = np.array(entries, dtype=float)
    except ValueError:
        raise ValidationError("utility entries must form a rectangular numeric matrix") from None
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError(f"utility matrix must be square, got shape {u.shape}")
    if u.shape[0] < 2:
        raise ValidationError("utility matrix needs at least two classes")
    if classes is not None and u.shape[0] != classes.m:
        raise ValidationError(f"utility is {u.shape[0]}x{u.shape[0]} but class space has m={classes.m}")
    if not np.all(np.isfinite(u)):
        raise ValidationError("utility matrix has non-finite entries")
    neg = np.argwhere(u < 0)
    if neg.size:
        a, y = neg[0] + 1
        raise NonnegativityError(f"negative utility {u[a - 1, y - 1]!r} at decision {a}, class {y}")
    dead = np.flatnonzero(~np.any(u > 0, axis=0))
    if dead.size:
        y = int(dead[0]) + 1
        raise DegeneracyError(f"class {y} has no decision with positive utility", cls=y)
    with np.errstate(all="ignore"):
        cond = float(np.linalg.cond(u))
    if not np.isfinite(cond):
        cond = np.inf
    diagonal = bool(np.count_nonzero(u - np.diag(np.diag(u))) == 0)
    return UtilityMatrix(_readonly(u), is_diagonal=diagonal, condition=cond)


def class_weights_to_utility(w) -> UtilityMatrix:
    """Diagonal utility rewarding a correct decision on class ``y`` by ``w[y]``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ValidationError("class weights must be a vector")
    bad = np.flatnonzero(~(w > 0) | ~np.isfinite(w))
    if bad.size:
        raise ValidationError(f"class weight {bad[0] + 1} must be positive, got {w[bad[0]]!r}")
    return validate_utility(np.diag(w))


def as_utility(U) -> UtilityMatrix:
    return U if isinstance(U, UtilityMatrix) else validate_utility(U)


def expected_utility(y: int, q, U) -> float:
    """Expected utility of deciding class ``y`` under class distribution ``q``."""
    q = as_simplex(q)
    U = as_utility(U)
    if q.m != U.m:
        raise ValidationError(f"dimension mismatch: q has {q.m} classes, U has {U.m}")
    y = check_class(y, U.m)
    return float(U.entries[y - 1] @ q.values)


def load_simplex_rows(path) -> list[SimplexVector]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    return [SimplexVector.from_csv_row(ln) for ln in lines]


def save_simplex_rows(path, rows) -> None:
    Path(path).write_text("".join(as_simplex(r).to_csv_row() + "\n" for r in rows))
