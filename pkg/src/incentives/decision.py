"""Optimal weighted predictions, their inversion, and argmax decisions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ImageError, InvertibilityError, ValidationError
from .simplex import MAX_CONDITION, SimplexVector, as_simplex, as_utility

IMAGE_TOL = 1e-9


@dataclass(frozen=True)
class DecisionRule:
    """Argmax rule; ties go to the lowest class index."""

    tie_break: str = "lowest-index"

    def __post_init__(self):
        if self.tie_break != "lowest-index":
            raise ValidationError(f"unsupported tie-break rule {self.tie_break!r}")


LOWEST_INDEX = DecisionRule()


def _match(U, q):
    U = as_utility(U)
    q = as_simplex(q)
    if U.m != q.m:
        raise ValidationError(f"dimension mismatch: U has {U.m} classes, vector has {q.m}")
    return U, q


def optimal_weighted_predictions(U, Q) -> np.ndarray:
    """Row-wise optimal utility-weighted prediction for a batch of posteriors."""
    U = as_utility(U)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    if Q.shape[1] != U.m:
        raise ValidationError(f"posteriors have {Q.shape[1]} classes, U has {U.m}")
    if U.is_scalar:
        return Q.copy()
    V = Q @ U.entries.T
    return V / V.sum(axis=1, keepdims=True)


def optimal_weighted_prediction(U, q) -> SimplexVector:
    """Prediction minimizing the expected utility-weighted loss under ``q``.

    Entry ``y`` is the expected utility of deciding ``y`` divided by the
    total expected utility over all decisions. The result does not depend on
    the base loss as long as it is strictly proper.
    """
    U, q = _match(U, q)
    if U.is_scalar:
        return q
    v = U.entries @ q.values
    return SimplexVector(v / v.sum())


def _inverse_checked(U):
    if not U.invertible:
        raise InvertibilityError(
            f"utility matrix is not invertible (condition estimate {U.condition:.3g} > {MAX_CONDITION:.0e})"
        )


def analytic_recalibrations(U, P) -> np.ndarray:
    """Batch form of :func:`analytic_recalibration`."""
    U = as_utility(U)
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != U.m:
        raise ValidationError(f"predictions have {P.shape[1]} classes, U has {U.m}")
    _inverse_checked(U)
    if U.is_scalar:
        return P.copy()
    R = np.linalg.solve(U.entries, P.T).T
    s = R.sum(axis=1, keepdims=True)
    with np.errstate(all="ignore"):
        Q = R / s
    for i in range(Q.shape[0]):
        worst = float(np.min(Q[i])) if s[i, 0] > 0 else -np.inf
        if not worst >= -IMAGE_TOL:
            raise ImageError(
                f"prediction row {i + 1} lies outside the image of the weighted prediction map "
                f"(recovered entry {worst:.3g})",
                violation=worst,
            )
    Q = np.clip(Q, 0.0, None)
    return Q / Q.sum(axis=1, keepdims=True)


def analytic_recalibration(U, p) -> SimplexVector:
    """Recover the posterior ``q`` behind an optimal weighted prediction ``p``.

    Solves ``U r = p`` by LU with partial pivoting and normalizes ``r``.
    Entries down to ``-1e-9`` are treated as round-off and clipped to zero.

    Raises
    ------
    InvertibilityError
        If ``U`` is singular or its condition estimate exceeds ``1e12``.
    ImageError
        If ``p`` cannot have been produced by any posterior.
    """
    U, p = _match(U, p)
    return SimplexVector(analytic_recalibrations(U, p.values)[0])


def base_rate_adjust(q_x, source_rates, target_rates) -> SimplexVector:
    """Shift a posterior from training base rates to target base rates."""
    q_x, source, target = as_simplex(q_x), as_simplex(source_rates), as_simplex(target_rates)
    if not q_x.m == source.m == target.m:
        raise ValidationError("posterior and base rates must have the same number of classes")
    zero = np.flatnonzero(source.values <= 0)
    if zero.size:
        raise ValidationError(f"source base rate of class {zero[0] + 1} is zero")
    v = target.values / source.values * q_x.values
    s = v.sum()
    if not s > 0:
        raise ValidationError("posterior has no mass on classes with positive target rate")
    return SimplexVector(v / s)


def argmax_decision(p, rule: DecisionRule = LOWEST_INDEX) -> int:
    p = as_simplex(p)
    # np.argmax returns the first maximizer, i.e. the lowest index on ties
    return int(np.argmax(p.values)) + 1


def argmax_decisions(P) -> np.ndarray:
    return np.argmax(np.asarray(P), axis=1) + 1


def utility_argmax_decision(U, q, rule: DecisionRule = LOWEST_INDEX) -> int:
    """Decision maximizing expected utility under ``q``."""
    U, q = _match(U, q)
    return int(np.argmax(U.entries @ q.values)) + 1
