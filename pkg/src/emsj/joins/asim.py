"""Cache-aware LSH join.

Each outer round zeroes the per-point counters and then, ``L`` times, draws
a concatenated hash function, partitions both relations by it and joins
matching buckets with a chunked nested loop (chunks of at most ``M/2``
points, outer loop over the smaller bucket). Far pairs bump both counters;
a point whose counter passes ``8 L M`` is dropped from its chunk and skips
the remaining rounds of that outer round.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..em import EmConfig, IoStats
from ..lsh import ConcatFamily, LshFamily, sensitize
from ..oracle import JoinParams
from ..points import Relation
from ..sink import CollisionStats, EmissionSink
from .common import RunContext, Segment
from .partition import match_buckets, partition_by_hash


@dataclass(frozen=True)
class AsimParams:
    concat: ConcatFamily
    L: int
    outer: int
    M: int

    def __post_init__(self):
        if self.L < 2:
            raise ValueError("inner repetitions L must be at least 2")

    @property
    def evict_threshold(self) -> int:
        return 8 * self.L * self.M

    @classmethod
    def build(cls, family: LshFamily, M: int, N: int, outer: int | None = None) -> "AsimParams":
        concat = sensitize(family, M, N)
        L = math.ceil(2.0 / concat.p1_eff)
        if outer is None:
            outer = 3 * math.ceil(math.log2(N))
        return cls(concat, L, outer, M)


@dataclass
class AsimTrace:
    """Per-outer-round observations: counters at round end and evictions."""

    keep_counters: bool = True
    rounds: list = field(default_factory=list)
    counters_R: list = field(default_factory=list)
    counters_S: list = field(default_factory=list)

    def far_count(self, tag: str, index: int) -> list[int]:
        """Far collisions of one point in each outer round."""
        snaps = self.counters_R if tag == "R" else self.counters_S
        return [int(c[index]) for c in snaps]


class _Run:
    def __init__(self, ctx: RunContext, params: AsimParams, rng, dedupe_L):
        self.ctx = ctx
        self.params = params
        self.rng = rng
        self.store = ctx.store
        self.half = max(1, params.M // 2)
        self.threshold = params.evict_threshold
        self.evicted = {"R": np.zeros(len(ctx.R), dtype=bool), "S": np.zeros(len(ctx.S), dtype=bool)}
        self.k = params.concat.k
        base = params.concat.base
        self.p_fn = lambda d: base.prob_at(d) ** self.k
        self.dedupe_L = dedupe_L
        self.round_far = 0
        self.round_evictions = 0

    def counters(self, name):
        return self.ctx.rel(name).counters

    def _account(self, name_a, ids_a, ids_b, dist):
        """Emit near pairs and bump counters of far pairs. Returns whether any counter moved."""
        ctx = self.ctx
        ctx.emit_near(name_a, ids_a, ids_b, dist, p_fn=self.p_fn, L=self.dedupe_L)
        far = dist > ctx.join.cr
        n_far = int(far.sum())
        if ctx.stats.classify:
            ctx.stats.record_classes(0, dist, ctx.join.r, ctx.join.cr, min(len(ids_a), len(ids_b)))
        if n_far:
            name_b = "S" if name_a == "R" else "R"
            self.counters(name_a)[ids_a] += far.sum(axis=1)
            self.counters(name_b)[ids_b] += far.sum(axis=0)
            self.round_far += n_far
        return n_far > 0

    def _evict(self, name, ids):
        over = ids[self.counters(name)[ids] > self.threshold]
        if over.size:
            self.evicted[name][over] = True
            self.round_evictions += over.size
        return over.size

    def inner_round(self):
        ctx, store = self.ctx, self.store
        h = self.params.concat.draw(self.rng)
        buckets = {}
        for name in ("R", "S"):
            seg = Segment(name, 0, len(ctx.rel(name)))
            gone = self.evicted[name][store[name]]
            buckets[name] = partition_by_hash(store, seg, h, ctx.rel(name),
                                              leading=gone.astype(np.uint8),
                                              active=int(np.count_nonzero(~gone)))
        ra, rb, sa, sb = match_buckets(buckets["R"], buckets["S"])
        if ra.size == 0:
            return
        small = ((rb - ra) <= self.half) & ((sb - sa) <= self.half)
        dirty = self._small_buckets(ra[small], rb[small], sa[small], sb[small])
        with store.phase("bucket-join"):
            d_iter = iter(dirty.tolist())
            for b in range(ra.size):
                r_seg = Segment("R", int(ra[b]), int(rb[b]))
                s_seg = Segment("S", int(sa[b]), int(sb[b]))
                if small[b]:
                    modified = next(d_iter)
                    store.touch_range("R", r_seg.lo, r_seg.hi)
                    store.touch_range("S", s_seg.lo, s_seg.hi)
                    if modified:
                        store.touch_range("S", s_seg.lo, s_seg.hi, write=True)
                        store.touch_range("R", r_seg.lo, r_seg.hi, write=True)
                else:
                    self._large_bucket(r_seg, s_seg)

    def _small_buckets(self, ra, rb, sa, sb) -> np.ndarray:
        """All buckets that fit in one chunk per side, evaluated in one batch.

        Every point lives in exactly one bucket per round, so batching does not
        change counters, evictions or emissions relative to a bucket-by-bucket loop.
        """
        nb = ra.size
        if nb == 0:
            return np.zeros(0, dtype=bool)
        ctx, store = self.ctx, self.store
        nr, ns = rb - ra, sb - sa
        # enumerate all (r position, s position) pairs bucket by bucket
        bucket_of_r = np.repeat(np.arange(nb), nr)
        r_pos = np.concatenate([np.arange(a, b) for a, b in zip(ra.tolist(), rb.tolist())])
        reps = ns[bucket_of_r]
        pair_r = np.repeat(r_pos, reps)
        pair_bucket = np.repeat(bucket_of_r, reps)
        first = np.repeat(np.cumsum(reps) - reps, reps)
        pair_s = sa[pair_bucket] + (np.arange(pair_r.size) - first)
        ids_r = store["R"][pair_r]
        ids_s = store["S"][pair_s]
        dist = self._pair_distances(ids_r, ids_s)
        near = dist <= ctx.join.r
        if np.any(near):
            nd = dist[near]
            ctx.sink.emit(ids_r[near], ids_s[near], p=self.p_fn(nd), L=self.dedupe_L)
        if ctx.stats.classify:
            cls = ctx.stats.classes[0]
            cls["near"] += int(near.sum())
            cls["cnear"] += int(((dist > ctx.join.r) & (dist <= ctx.join.cr)).sum())
            cls["far"] += int((dist > ctx.join.cr).sum())
        far = dist > ctx.join.cr
        cR, cS = self.counters("R"), self.counters("S")
        np.add.at(cR, ids_r[far], 1)
        np.add.at(cS, ids_s[far], 1)
        self.round_far += int(far.sum())
        touched_r = store["R"][r_pos]
        s_pos = np.concatenate([np.arange(a, b) for a, b in zip(sa.tolist(), sb.tolist())])
        self._evict("R", touched_r)
        self._evict("S", store["S"][s_pos])
        return np.bincount(pair_bucket[far], minlength=nb) > 0

    def _pair_distances(self, ids_r, ids_s):
        """Distances of aligned pairs, computed in groups that share an R point."""
        ctx = self.ctx
        out = np.empty(ids_r.size, dtype=np.float64)
        if ids_r.size == 0:
            return out
        R, S, metric = ctx.R, ctx.S, ctx.join.metric
        if R.kind in ("bits", "dense"):
            a, b = R.data[ids_r], S.data[ids_s]
            if metric == "hamming":
                out[:] = np.bitwise_count(a ^ b).sum(axis=1, dtype=np.int64)
                return out
        # general path: one small pairwise call per distinct R point
        order = np.argsort(ids_r, kind="stable")
        u, starts = np.unique(ids_r[order], return_index=True)
        ends = np.append(starts[1:], order.size)
        for x, lo, hi in zip(u.tolist(), starts.tolist(), ends.tolist()):
            sel = order[lo:hi]
            out[sel] = ctx.distances("R", np.array([x]), "S", ids_s[sel])[0]
        return out

    def _large_bucket(self, r_seg: Segment, s_seg: Segment):
        """Chunked nested loop with per-chunk eviction of far-colliding points."""
        ctx, store = self.ctx, self.store
        outer, inner = (r_seg, s_seg) if len(r_seg) <= len(s_seg) else (s_seg, r_seg)
        half = self.half
        for olo in range(outer.lo, outer.hi, half):
            ohi = min(outer.hi, olo + half)
            store.touch_range(outer.name, olo, ohi)
            o_ids = store[outer.name][olo:ohi]
            o_ids = o_ids[~self.evicted[outer.name][o_ids]]
            o_dirty = False
            for ilo in range(inner.lo, inner.hi, half):
                if o_ids.size == 0:
                    break
                ihi = min(inner.hi, ilo + half)
                store.touch_range(inner.name, ilo, ihi)
                i_ids = store[inner.name][ilo:ihi]
                i_ids = i_ids[~self.evicted[inner.name][i_ids]]
                if i_ids.size == 0:
                    continue
                dist = ctx.distances(outer.name, o_ids, inner.name, i_ids)
                moved = self._account(outer.name, o_ids, i_ids, dist)
                gone_o = self._evict(outer.name, o_ids)
                gone_i = self._evict(inner.name, i_ids)
                if gone_o:
                    o_ids = o_ids[~self.evicted[outer.name][o_ids]]
                if moved or gone_i:
                    store.touch_range(inner.name, ilo, ihi, write=True)
                o_dirty |= moved or bool(gone_o)
            if o_dirty:
                store.touch_range(outer.name, olo, ohi, write=True)


def asim_join(R: Relation, S: Relation, join: JoinParams, params: AsimParams, config: EmConfig,
              sink: EmissionSink | None = None, rng=None, *, trace: AsimTrace | None = None,
              stats: CollisionStats | None = None, check_memory: bool = True,
              dedupe_L: float | None = None) -> tuple[IoStats, CollisionStats]:
    """Run the cache-aware join.

    ``dedupe_L`` is the repetition factor used when ``sink`` dedupes; it
    defaults to ``(N/M) ** rho`` of the base family.
    """
    N = len(R) + len(S)
    if params.M != config.M:
        raise ValueError("params were built for a different memory size")
    if check_memory and not (config.satisfies_theorem(N) and config.M < N):
        raise ValueError(f"memory hypothesis 18 log N + 3B <= M < N fails "
                         f"(N={N}, M={config.M}, B={config.B})")
    rng = np.random.default_rng(rng)
    sink = sink if sink is not None else EmissionSink()
    ctx = RunContext.create(R, S, join, config, sink, stats)
    if dedupe_L is None:
        dedupe_L = (N / config.M) ** params.concat.base.rho
    run = _Run(ctx, params, rng, dedupe_L)
    for _ in range(params.outer):
        R.reset_counters()
        S.reset_counters()
        run.evicted["R"][:] = False
        run.evicted["S"][:] = False
        run.round_far = run.round_evictions = 0
        for _ in range(params.L):
            run.inner_round()
        if trace is not None:
            trace.rounds.append({"far_collisions": run.round_far, "evicted": run.round_evictions})
            if trace.keep_counters:
                trace.counters_R.append(R.counters.copy())
                trace.counters_S.append(S.counters.copy())
    ctx.store.flush()
    return ctx.store.snapshot_stats(), ctx.stats
