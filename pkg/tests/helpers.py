"""Random generators and grids shared by the tests."""

import numpy as np


def random_utility(rng, m, invertible=False, max_cond=1e6):
    """Nonnegative nondegenerate matrix; optionally well-conditioned."""
    while True:
        U = rng.uniform(0, 1, size=(m, m))
        U[rng.uniform(size=(m, m)) < 0.2] = 0.0
        if not np.all(U.max(axis=0) > 0):
            continue
        if invertible and not np.linalg.cond(U) < max_cond:
            continue
        return U


def random_interior(rng, m):
    return rng.dirichlet(np.ones(m))


def simplex_grid(m, step):
    """All points of the simplex whose coordinates are multiples of ``step``."""
    n = round(1 / step)
    out = []

    def rec(prefix, left):
        if len(prefix) == m - 1:
            out.append(prefix + [left])
            return
        for k in range(left + 1):
            rec(prefix + [k], left - k)

    rec([], n)
    return np.array(out, dtype=float) / n
