"""State shared by the join algorithms during one run."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..em import BlockStore, EmConfig
from ..oracle import JoinParams
from ..points import Relation, check_metric, pairwise_distances
from ..sink import CollisionStats, EmissionSink


@dataclass(frozen=True)
class Segment:
    """A contiguous slice ``[lo, hi)`` of the external id array ``name`` ("R" or "S")."""

    name: str
    lo: int
    hi: int

    def __len__(self):
        return self.hi - self.lo


@dataclass
class RunContext:
    R: Relation
    S: Relation
    join: JoinParams
    store: BlockStore
    sink: EmissionSink
    stats: CollisionStats

    @classmethod
    def create(cls, R, S, join, config: EmConfig, sink, stats=None, store=None):
        check_metric(join.metric, R.kind)
        check_metric(join.metric, S.kind)
        if store is None:
            store = BlockStore(config)
        if "R" not in store:
            store.register("R", np.arange(len(R), dtype=np.int64))
            store.register("S", np.arange(len(S), dtype=np.int64))
        return cls(R, S, join, store, sink, stats or CollisionStats())

    def rel(self, name: str) -> Relation:
        return self.R if name == "R" else self.S

    def ids(self, seg: Segment) -> np.ndarray:
        return self.store[seg.name][seg.lo:seg.hi]

    def distances(self, a_name: str, ids_a, b_name: str, ids_b) -> np.ndarray:
        return pairwise_distances(self.join.metric, self.rel(a_name), ids_a, self.rel(b_name), ids_b)

    def emit_near(self, a_name, ids_a, ids_b, dist, *, p_fn=None, L=None, level=None):
        """Emit every pair of ``ids_a x ids_b`` with distance <= r, in (R, S) orientation."""
        ii, jj = np.nonzero(dist <= self.join.r)
        if ii.size == 0:
            return 0
        d = dist[ii, jj]
        a, b = ids_a[ii], ids_b[jj]
        if a_name == "S":
            a, b = b, a
        p = p_fn(d) if p_fn is not None else None
        return self.sink.emit(a, b, p=p, L=L, level=level)
