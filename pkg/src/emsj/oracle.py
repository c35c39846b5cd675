"""Exhaustive ground truth: brute-force join and pairwise-distance CDFs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .points import Relation, check_metric, pairwise_distances

# Rows of the left relation processed per pairwise block.
_ROW_CHUNK = 256


@dataclass(frozen=True)
class JoinParams:
    """Join predicate: ``d(x, y) <= r`` under ``metric``; ``c`` scales the gray zone."""

    metric: str
    r: float
    c: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("radius r must be non-negative")
        if not self.c > 1:
            raise ValueError("approximation factor c must exceed 1")

    @property
    def cr(self) -> float:
        return self.c * self.r


def _row_blocks(n: int):
    for lo in range(0, n, _ROW_CHUNK):
        yield lo, min(n, lo + _ROW_CHUNK)


def brute_force_join(R: Relation, S: Relation, params: JoinParams) -> set[tuple[int, int]]:
    """All ``(i, j)`` with ``d(R[i], S[j]) <= r``; ties at exactly ``r`` count."""
    check_metric(params.metric, R.kind)
    out = set()
    js = np.arange(len(S))
    for lo, hi in _row_blocks(len(R)):
        d = pairwise_distances(params.metric, R, np.arange(lo, hi), S, js)
        ii, jj = np.nonzero(d <= params.r)
        out.update(zip((ii + lo).tolist(), jj.tolist()))
    return out


def classify_counts(R: Relation, S: Relation, params: JoinParams) -> dict[str, int]:
    """Number of near (<= r), c-near (r, cr] and far (> cr) pairs in R x S."""
    near = cnear = 0
    js = np.arange(len(S))
    for lo, hi in _row_blocks(len(R)):
        d = pairwise_distances(params.metric, R, np.arange(lo, hi), S, js)
        near += int(np.count_nonzero(d <= params.r))
        cnear += int(np.count_nonzero((d > params.r) & (d <= params.cr)))
    return {"near": near, "cnear": cnear, "far": len(R) * len(S) - near - cnear}


def compute_cdf(points: Relation, metric: str, *, max_points: int = 10_000,
                pair_budget: int = 50_000_000, rng=None) -> list[tuple[float, float]]:
    """Empirical CDF of all unordered pairwise distances.

    Returns ``(threshold, fraction of pairs with distance <= threshold)`` at each
    distinct distance, ascending. When the pair count exceeds ``pair_budget`` a
    seeded sample of ``max_points`` points is used instead of the full set.
    """
    n = len(points)
    if n < 2:
        raise ValueError("a CDF needs at least two points")
    check_metric(metric, points.kind)
    idx = np.arange(n)
    if n * (n - 1) // 2 > pair_budget and n > max_points:
        rng = np.random.default_rng(rng)
        idx = np.sort(rng.choice(n, size=max_points, replace=False))
    m = idx.size
    chunks = []
    for lo, hi in _row_blocks(m):
        d = pairwise_distances(metric, points, idx[lo:hi], points, idx)
        # keep strictly-upper-triangular entries: column index > row index
        cols = np.arange(m)
        mask = cols[None, :] > np.arange(lo, hi)[:, None]
        chunks.append(d[mask])
    dist = np.concatenate(chunks)
    values, counts = np.unique(dist, return_counts=True)
    total = dist.size
    cum = np.cumsum(counts)
    fractions = cum / total
    fractions[-1] = 1.0
    return list(zip(values.tolist(), fractions.tolist()))
