"""Cache-oblivious nested-loop join.

The larger side is halved recursively until both sides are at most
``LEAF`` points; a leaf loads both pieces and compares every pair. No
parameter of the memory is consulted, and once a subproblem fits in memory
its whole subtree costs one read of its inputs, which gives the
``O((|R|+|S|)/B + |R||S|/(MB))`` transfer bound.
"""
from __future__ import annotations

import numpy as np

from ..em import BlockStore, EmConfig, IoStats
from ..oracle import JoinParams
from ..points import Relation
from ..sink import EmissionSink
from .common import RunContext, Segment

LEAF = 8


def co_trace(store: BlockStore, a: Segment, b: Segment):
    """Replay the block accesses of the recursive nested loop on ``a x b``."""
    na, nb = a.hi - a.lo, b.hi - b.lo
    if na == 0 or nb == 0:
        return
    if na <= LEAF and nb <= LEAF:
        store.touch_range(a.name, a.lo, a.hi)
        store.touch_range(b.name, b.lo, b.hi)
        return
    if na >= nb:
        mid = a.lo + na // 2
        co_trace(store, Segment(a.name, a.lo, mid), b)
        co_trace(store, Segment(a.name, mid, a.hi), b)
    else:
        mid = b.lo + nb // 2
        co_trace(store, a, Segment(b.name, b.lo, mid))
        co_trace(store, a, Segment(b.name, mid, b.hi))


def co_join(ctx: RunContext, a: Segment, b: Segment, *, level=None, p_fn=None, L=None) -> int:
    """Join two segments: every pair compared once, near pairs emitted.

    The pair comparisons are evaluated in bulk; the I/O they require is
    charged by :func:`co_trace`, which walks the same recursion.
    Returns the number of accepted emissions.
    """
    if len(a) == 0 or len(b) == 0:
        return 0
    with ctx.store.phase("nested-loop"):
        co_trace(ctx.store, a, b)
    ids_a, ids_b = ctx.ids(a), ctx.ids(b)
    dist = ctx.distances(a.name, ids_a, b.name, ids_b)
    return ctx.emit_near(a.name, ids_a, ids_b, dist, p_fn=p_fn, L=L, level=level)


def nested_loop_join(R: Relation, S: Relation, params: JoinParams, config: EmConfig,
                     sink: EmissionSink | None = None) -> IoStats:
    """Join ``R`` and ``S`` on a fresh store; emissions go to ``sink``."""
    sink = sink if sink is not None else EmissionSink()
    ctx = RunContext.create(R, S, params, config, sink)
    co_join(ctx, Segment("R", 0, len(R)), Segment("S", 0, len(S)))
    ctx.store.flush()
    return ctx.store.snapshot_stats()
