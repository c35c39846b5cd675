"""Cache-oblivious recursive LSH join.

A call on ``(R, S)`` at level ``depth`` first puts the smaller side in ``R``.
At the depth cap, or when ``|R| <= 1``, it finishes with the cache-oblivious
nested loop. Otherwise it moves the points of ``R`` that are within ``cr``
of at least half of a random sample of ``S`` to the front and joins them
directly against ``S``. The rest of ``R`` and all of ``S`` are then
partitioned ``L`` times by fresh hash functions, and every bucket pair with
both sides nonempty is solved one level deeper.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..em import EmConfig, IoStats
from ..oracle import JoinParams
from ..points import Relation
from ..sink import CollisionStats, EmissionSink
from .common import RunContext, Segment
from .nested import co_join
from .partition import match_buckets, partition_by_hash


@dataclass(frozen=True)
class OsimParams:
    """Global recursion parameters, fixed once from the root input size.

    ``family`` is any sensitive family exposing ``p1``, ``p2``, ``prob_at``
    and ``draw``: an :class:`~emsj.lsh.LshFamily` or a
    :class:`~emsj.lsh.ConcatFamily`.
    """

    family: object
    log_n: int
    max_depth: int

    @classmethod
    def build(cls, family, N: int) -> "OsimParams":
        if N < 2:
            raise ValueError("need at least two points")
        log_n = math.ceil(math.log2(N))
        max_depth = max(1, math.ceil(math.log(N) / math.log(1.0 / family.p2)))
        return cls(family, log_n, max_depth)

    @property
    def L_mean(self) -> float:
        return 1.0 / self.family.p1

    @property
    def sample_size(self) -> int:
        return 18 * self.log_n

    @property
    def dense_threshold(self) -> int:
        return self.sample_size // 2

    def draw_L(self, rng: np.random.Generator) -> int:
        """``floor(1/p1)`` or ``ceil(1/p1)`` with mean exactly ``1/p1``."""
        mean = self.L_mean
        lo = math.floor(mean)
        frac = mean - lo
        return lo + int(frac > 0 and rng.random() < frac)


def sample_filter(ctx: RunContext, a: Segment, b: Segment, params: OsimParams,
                  rng: np.random.Generator) -> int:
    """Move the dense points of ``a`` to its front; returns how many there are.

    A point is dense when at least half of a sample of ``min(18 log_n, |b|)``
    points of ``b``, drawn without replacement, lie within ``cr`` of it.
    """
    store = ctx.store
    m = min(params.sample_size, len(b))
    if m == 0 or len(a) == 0:
        return 0
    pos = np.sort(rng.choice(len(b), size=m, replace=False)) + b.lo
    need = math.ceil(m / 2)
    with store.phase("filter"):
        store.touch_positions(b.name, pos)
        store.touch_range(a.name, a.lo, a.hi)
        ids_a = ctx.ids(a)
        sample = store[b.name][pos]
        close = ctx.distances(a.name, ids_a, b.name, sample) <= ctx.join.cr
        dense = close.sum(axis=1) >= need
        n_dense = int(dense.sum())
        if 0 < n_dense < len(a) and not dense[:n_dense].all():
            order = np.argsort(~dense, kind="stable")
            store[a.name][a.lo:a.hi] = ids_a[order]
            store.touch_range(a.name, a.lo, a.hi, write=True)
    return n_dense


class _Run:
    def __init__(self, ctx: RunContext, params: OsimParams, rng):
        self.ctx = ctx
        self.params = params
        self.rng = rng
        self.p_fn = params.family.prob_at
        self.L_mean = params.L_mean
        stats = ctx.stats
        self.track = [tuple(int(v) for v in pair) for pair in stats.track]

    def _observe(self, a: Segment, b: Segment, level: int):
        ctx, stats = self.ctx, self.ctx.stats
        stats.calls[level] += 1
        stats.max_level = max(stats.max_level, level)
        if self.track:
            r_seg, s_seg = (a, b) if a.name == "R" else (b, a)
            ids_r, ids_s = ctx.ids(r_seg), ctx.ids(s_seg)
            for pair in self.track:
                if np.any(ids_r == pair[0]) and np.any(ids_s == pair[1]):
                    stats.tracked[(pair, level)] += 1
        if stats.classify:
            dist = ctx.distances(a.name, ctx.ids(a), b.name, ctx.ids(b))
            stats.record_classes(level, dist, ctx.join.r, ctx.join.cr, min(len(a), len(b)))

    def solve(self, a: Segment, b: Segment, level: int):
        if len(a) > len(b):
            a, b = b, a
        if len(a) == 0:
            return
        self._observe(a, b, level)
        ctx, params = self.ctx, self.params
        emit_args = dict(level=level, p_fn=self.p_fn, L=self.L_mean)
        if level >= params.max_depth or len(a) <= 1:
            co_join(ctx, a, b, **emit_args)
            return
        n_dense = sample_filter(ctx, a, b, params, self.rng)
        if n_dense:
            co_join(ctx, Segment(a.name, a.lo, a.lo + n_dense), b, **emit_args)
        rest = Segment(a.name, a.lo + n_dense, a.hi)
        if len(rest) == 0:
            return
        for _ in range(params.draw_L(self.rng)):
            h = params.family.draw(self.rng)
            ba = partition_by_hash(ctx.store, rest, h, ctx.rel(a.name))
            bb = partition_by_hash(ctx.store, b, h, ctx.rel(b.name))
            a_lo, a_hi, b_lo, b_hi = match_buckets(ba, bb)
            for i in range(a_lo.size):
                self.solve(Segment(a.name, int(a_lo[i]), int(a_hi[i])),
                           Segment(b.name, int(b_lo[i]), int(b_hi[i])), level + 1)


def osim_join(R: Relation, S: Relation, join: JoinParams, params: OsimParams, config: EmConfig,
              sink: EmissionSink | None = None, rng=None, *,
              stats: CollisionStats | None = None) -> tuple[IoStats, CollisionStats]:
    """One run of the recursive join on a fresh block store."""
    rng = np.random.default_rng(rng)
    sink = sink if sink is not None else EmissionSink()
    ctx = RunContext.create(R, S, join, config, sink, stats)
    if ctx.stats.classify and ctx.stats.k_cap == 0:
        ctx.stats.k_cap = int(math.floor(math.log2(config.M)))
    _Run(ctx, params, rng).solve(Segment("R", 0, len(R)), Segment("S", 0, len(S)), 0)
    ctx.store.flush()
    return ctx.store.snapshot_stats(), ctx.stats


def hp_repetitions(N: int) -> int:
    """Independent repetitions used for the high-probability guarantee."""
    return math.ceil(math.log2(N) ** 1.5)


def osim_join_hp(R: Relation, S: Relation, join: JoinParams, params: OsimParams, config: EmConfig,
                 sink: EmissionSink | None = None, rng=None, *, reps: int | None = None,
                 stats: CollisionStats | None = None) -> tuple[IoStats, CollisionStats]:
    """Sequential independent repetitions sharing one sink; I/O is summed."""
    rng = np.random.default_rng(rng)
    sink = sink if sink is not None else EmissionSink()
    stats = stats if stats is not None else CollisionStats()
    if reps is None:
        reps = hp_repetitions(len(R) + len(S))
    total = IoStats()
    for child in rng.spawn(reps):
        io, _ = osim_join(R, S, join, params, config, sink, child, stats=stats)
        total = total + io
    return total, stats
