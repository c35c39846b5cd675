import numpy as np

from emsj.em import BlockStore, EmConfig
from emsj.joins.common import Segment
from emsj.joins.partition import Buckets, match_buckets, partition_by_hash
from emsj.lsh import ConcatFamily, LshFamily
from emsj.generate import random_words
from emsj.points import Relation


class ConstHash:
    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.uint64)

    def eval_many(self, rel, idx):
        return self.values[np.asarray(idx)]


def _store(n, M=16, B=4):
    store = BlockStore(EmConfig(M, B))
    store.register("R", np.arange(n))
    return store


def test_all_equal_one_bucket():
    rel = Relation.from_dense("R", np.zeros((10, 1)))
    store = _store(10)
    b = partition_by_hash(store, Segment("R", 0, 10), ConstHash(np.zeros(10)), rel)
    assert (b.starts.tolist(), b.ends.tolist()) == ([0], [10])


def test_distinct_words_singletons_in_hash_order():
    vals = np.array([5, 3, 9, 1, 7], dtype=np.uint64)
    rel = Relation.from_dense("R", np.zeros((5, 1)))
    store = _store(5)
    b = partition_by_hash(store, Segment("R", 0, 5), ConstHash(vals), rel)
    assert b.words.tolist() == sorted(vals.tolist())
    assert np.all(b.ends - b.starts == 1)
    assert store["R"].tolist() == np.argsort(vals).tolist()


def test_mixed_buckets_permutation_and_constancy(rng):
    n = 1000
    rel = Relation.from_words("R", random_words(n, 12, rng), 12)
    store = _store(n, M=64, B=8)
    fam = LshFamily("bit-sample", 2, 6, dim=12)
    h = ConcatFamily(fam, 4).draw(rng)
    b = partition_by_hash(store, Segment("R", 0, n), h, rel)
    ids = store["R"]
    assert sorted(ids.tolist()) == list(range(n))
    words = h.eval_many(rel, ids)
    for lo, hi, w in zip(b.starts, b.ends, b.words):
        assert np.all(words[lo:hi] == w)
        assert np.all(np.diff(ids[lo:hi]) > 0)  # ties keep original order
    assert b.ends[-1] == n and np.all(b.starts[1:] == b.ends[:-1])


def test_leading_key_and_active_prefix():
    rel = Relation.from_dense("R", np.zeros((6, 1)))
    store = _store(6)
    lead = np.array([1, 0, 0, 1, 0, 0], dtype=np.uint8)
    b = partition_by_hash(store, Segment("R", 0, 6), ConstHash([2, 2, 1, 1, 2, 1]), rel,
                          leading=lead, active=4)
    assert store["R"].tolist() == [2, 5, 1, 4, 3, 0]
    assert b.ends[-1] == 4 and b.words.tolist() == [1, 2]


def test_match_buckets_skips_one_sided():
    a = Buckets(np.array([1, 3, 5], dtype=np.uint64), np.array([0, 2, 4]), np.array([2, 4, 6]))
    b = Buckets(np.array([3, 4, 5], dtype=np.uint64), np.array([10, 11, 12]), np.array([11, 12, 13]))
    al, ah, bl, bh = match_buckets(a, b)
    assert al.tolist() == [2, 4] and bl.tolist() == [10, 12]
