"""In-place bucket partitioning by hash value."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..em import BlockStore, sort_external
from ..points import Relation
from .common import Segment


class Buckets(NamedTuple):
    """Contiguous bucket ranges of a partitioned segment, in hash order."""

    words: np.ndarray
    starts: np.ndarray
    ends: np.ndarray


def partition_by_hash(store: BlockStore, seg: Segment, h, rel: Relation, *,
                      leading=None, active: int | None = None) -> Buckets:
    """Stably sort ``seg`` by (hash word, original index) and return its buckets.

    ``leading`` is an optional most-significant key aligned with the segment
    (used to push evicted points to the back); only the first ``active``
    points after sorting are split into buckets.
    """
    n = len(seg)
    if n == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Buckets(np.zeros(0, dtype=np.uint64), empty, empty)
    ids = store[seg.name][seg.lo:seg.hi].copy()
    words = h.eval_many(rel, ids)
    keys = (words, ids) if leading is None else (leading, words, ids)
    with store.phase("partition"):
        order = sort_external(store, seg.name, keys, seg.lo, seg.hi)
    words = words[order]
    n_act = n if active is None else active
    words = words[:n_act]
    if n_act == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Buckets(np.zeros(0, dtype=np.uint64), empty, empty)
    change = np.flatnonzero(words[1:] != words[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n_act]))
    return Buckets(words[starts], seg.lo + starts, seg.lo + ends)


def match_buckets(a: Buckets, b: Buckets):
    """Bucket pairs with equal hash word and both sides nonempty, in hash order."""
    _, ia, ib = np.intersect1d(a.words, b.words, assume_unique=True, return_indices=True)
    return a.starts[ia], a.ends[ia], b.starts[ib], b.ends[ib]
