"""Mann-Whitney U test: rank sums with midrank ties.

Two p-value routes: a normal approximation with tie-corrected variance and
continuity correction (suitable for the sample sizes the comparison harness
uses, n = 30), and an exact permutation enumeration, feasible for samples of
up to 8 each. `method="auto"` picks the exact route for small samples.

The returned U is the statistic of the first sample (number of pairs where a
exceeds b, ties counted half); swapping the arguments maps U to n1*n2 - U
and leaves p unchanged.
"""

from __future__ import annotations

import math
from itertools import combinations
from typing import Sequence

import numpy as np

EXACT_LIMIT = 8


def rank_midrank(pooled: np.ndarray) -> np.ndarray:
    """Ascending ranks, ties sharing the mean of their rank positions."""
    order = np.argsort(pooled, kind="stable")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _u_of_first(ranks: np.ndarray, n1: int) -> float:
    return float(np.sum(ranks[:n1]) - n1 * (n1 + 1) / 2.0)


def _tie_term(pooled: np.ndarray) -> float:
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def mann_whitney_u(sample_a: Sequence[float], sample_b: Sequence[float],
                   method: str = "auto") -> tuple[float, float]:
    """Two-sided test; returns (U of sample_a, p).

    Degenerate case: when every pooled value is identical the test carries
    no information and p is 1.0.
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    if method not in ("auto", "normal", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if method == "auto":
        method = "exact" if max(a.size, b.size) <= EXACT_LIMIT else "normal"

    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = rank_midrank(pooled)
    u1 = _u_of_first(ranks, n1)

    if method == "exact":
        return u1, _exact_p(pooled, ranks, n1, u1)

    n = n1 + n2
    mean_u = n1 * n2 / 2.0
    tie = _tie_term(pooled)
    var = n1 * n2 / 12.0 * ((n + 1) - tie / (n * (n - 1)))
    if var <= 0.0:
        return u1, 1.0  # all values identical
    diff = u1 - mean_u
    if diff > 0.5:
        diff -= 0.5  # continuity correction
    elif diff < -0.5:
        diff += 0.5
    else:
        diff = 0.0
    z = diff / math.sqrt(var)
    p = 2.0 * 0.5 * math.erfc(abs(z) / math.sqrt(2.0))
    return u1, min(p, 1.0)


def _exact_p(pooled: np.ndarray, ranks: np.ndarray, n1: int, u_obs: float) -> float:
    """Exhaustive enumeration over all assignments of the pooled values.

    Two-sided p: fraction of splits whose U lies at least as far from the
    null mean as the observed one.
    """
    n = pooled.size
    mean_u = n1 * (n - n1) / 2.0
    target = abs(u_obs - mean_u) - 1e-9
    offset = n1 * (n1 + 1) / 2.0
    hits = 0
    total = 0
    for combo in combinations(range(n), n1):
        u = ranks[list(combo)].sum() - offset
        if abs(u - mean_u) >= target:
            hits += 1
        total += 1
    return hits / total
