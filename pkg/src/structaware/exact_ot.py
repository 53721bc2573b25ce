"""Exact (unregularised) optimal transport for tiny uniform clouds, by enumeration."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import TooLarge
from .sinkhorn import _cloud, cost_matrix

MAX_POINTS = 8


def exact_ot_oracle(x, y) -> float:
    """Minimum transport cost between two uniform clouds.

    For equal sizes the optimum of the assignment polytope sits on a
    permutation (Birkhoff), so all ``n!`` matchings are scored.  Unequal sizes
    are reduced to that case by replicating every point ``lcm / size`` times,
    which is exact for uniform weights; the replicated size must stay <= 8.
    """
    cx, cy = _cloud(x), _cloud(y)
    n, m = len(cx), len(cy)
    for c in (cx, cy):
        if not np.allclose(c.weights, 1.0 / len(c)):
            raise ValueError("the oracle handles uniform weights only")
    size = math.lcm(n, m)
    if max(n, m) > MAX_POINTS or size > MAX_POINTS:
        raise TooLarge(f"enumeration capped at {MAX_POINTS} points (got {n} and {m})")
    xs = np.repeat(cx.points, size // n, axis=0)
    ys = np.repeat(cy.points, size // m, axis=0)
    cost = cost_matrix(xs, ys)
    perms = np.array(list(itertools.permutations(range(size))))
    totals = cost[np.arange(size), perms].sum(axis=1)
    return float(totals.min() / size)
