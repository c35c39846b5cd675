"""Point representations, relations and distance functions.

Three point kinds are supported:

* ``dense``  -- real vectors, used with ``l1``, ``l2`` and ``angular``
* ``sparse`` -- strictly increasing token-id sets, used with ``jaccard``
* ``bits``   -- fixed-width bit vectors, used with ``hamming``

Distances are computed through one vectorized code path
(:func:`pairwise_distances`), so a single-pair call and a bulk call always
agree bit for bit. Joins rely on this when comparing against ``r`` without
an epsilon.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

METRICS = ("hamming", "l1", "l2", "jaccard", "angular")

METRIC_KIND = {
    "hamming": "bits",
    "l1": "dense",
    "l2": "dense",
    "jaccard": "sparse",
    "angular": "dense",
}

# Upper bound on the number of float64 temporaries materialized per pairwise block.
_BLOCK_ELEMS = 1 << 22


class PointError(ValueError):
    """Raised for malformed points or incompatible point/metric combinations."""


def _words_from_int(value: int, dim: int) -> np.ndarray:
    nwords = max(1, -(-dim // 64))
    if value < 0 or value >> dim:
        raise PointError(f"bit value {value:#x} does not fit in {dim} bits")
    return np.array([(value >> (64 * w)) & 0xFFFFFFFFFFFFFFFF for w in range(nwords)],
                    dtype=np.uint64)


def _words_from_bytes(raw: bytes | np.ndarray, dim: int) -> np.ndarray:
    """Pack LSB-first bytes into little-endian uint64 words."""
    raw = np.frombuffer(bytes(raw), dtype=np.uint8)
    nbytes = -(-dim // 8)
    if raw.size != nbytes:
        raise PointError(f"expected {nbytes} bytes for dim {dim}, got {raw.size}")
    nwords = max(1, -(-dim // 64))
    padded = np.zeros(nwords * 8, dtype=np.uint8)
    padded[:nbytes] = raw
    words = padded.view("<u8").astype(np.uint64)
    if dim % 64 and (words[-1] >> np.uint64(dim % 64)):
        raise PointError("bits set beyond the declared dimension")
    return words


@dataclass(frozen=True, eq=False)
class Point:
    """A single element of the universe.

    Use the :meth:`dense`, :meth:`sparse` and :meth:`bits` constructors.
    ``data`` holds float64 coordinates, int64 ids, or uint64 words
    (bit ``i`` of the vector is bit ``i % 64`` of word ``i // 64``).
    """

    kind: str
    data: np.ndarray
    dim: int

    def __post_init__(self):
        if self.kind == "dense":
            if self.data.ndim != 1 or self.data.size != self.dim:
                raise PointError("dense point must be a 1-d vector of length dim")
            if not np.all(np.isfinite(self.data)):
                raise PointError("dense coordinates must be finite")
        elif self.kind == "sparse":
            if self.data.size and (self.data[0] < 0 or np.any(np.diff(self.data) <= 0)):
                raise PointError("sparse ids must be non-negative and strictly increasing")
        elif self.kind == "bits":
            if self.dim <= 0 or self.data.size != max(1, -(-self.dim // 64)):
                raise PointError("bit vector length does not match its dimension")
        else:
            raise PointError(f"unknown point kind {self.kind!r}")

    @classmethod
    def dense(cls, coords: Sequence[float]) -> "Point":
        arr = np.array(coords, dtype=np.float64).reshape(-1)
        return cls("dense", arr, arr.size)

    @classmethod
    def sparse(cls, ids: Sequence[int]) -> "Point":
        arr = np.array(list(ids), dtype=np.int64).reshape(-1)
        return cls("sparse", arr, int(arr[-1]) + 1 if arr.size else 0)

    @classmethod
    def bits(cls, value: int | bytes, dim: int) -> "Point":
        """Bit vector from an int (bit i = coordinate i) or LSB-first bytes."""
        if isinstance(value, (int, np.integer)):
            words = _words_from_int(int(value), dim)
        else:
            words = _words_from_bytes(value, dim)
        return cls("bits", words, dim)

    def __eq__(self, other):
        if not isinstance(other, Point):
            return NotImplemented
        return (self.kind == other.kind and self.dim == other.dim
                and np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.kind, self.dim, self.data.tobytes()))


@dataclass(eq=False)
class Relation:
    """An ordered collection of points of one kind, plus a counter per point.

    Points are stored column-wise for vectorized distance and hash
    evaluation. The counters are never read by distance or hashing code.
    """

    tag: str
    kind: str
    dim: int
    data: object
    counters: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.tag not in ("R", "S"):
            raise PointError(f"relation tag must be 'R' or 'S', got {self.tag!r}")
        if self.kind == "sparse" and not sp.issparse(self.data):
            self.data = _csr_from_lists(self.data, self.dim)
        if self.counters is None:
            self.counters = np.zeros(len(self), dtype=np.int64)
        if self.counters.shape != (len(self),):
            raise PointError("counters length must equal number of points")
        self._norms = None
        self._sizes = None

    def __len__(self):
        return self.data.shape[0]

    @classmethod
    def from_points(cls, tag: str, points: Sequence[Point]) -> "Relation":
        if not points:
            raise PointError("cannot infer a relation kind from zero points; use Relation.empty")
        kind = points[0].kind
        if any(p.kind != kind for p in points):
            raise PointError("all points of a relation must share one kind")
        if kind == "dense":
            dim = points[0].dim
            if any(p.dim != dim for p in points):
                raise PointError("dimension mismatch within relation")
            data = np.stack([p.data for p in points])
        elif kind == "bits":
            dim = points[0].dim
            if any(p.dim != dim for p in points):
                raise PointError("dimension mismatch within relation")
            data = np.stack([p.data for p in points]).astype(np.uint64)
        else:
            dim = max(p.dim for p in points)
            data = [p.data for p in points]
        return cls(tag, kind, dim, data)

    @classmethod
    def from_dense(cls, tag: str, array) -> "Relation":
        arr = np.ascontiguousarray(array, dtype=np.float64)
        if arr.ndim != 2:
            raise PointError("dense relation needs a 2-d array")
        if not np.all(np.isfinite(arr)):
            raise PointError("dense coordinates must be finite")
        return cls(tag, "dense", arr.shape[1], arr)

    @classmethod
    def from_words(cls, tag: str, words, dim: int) -> "Relation":
        words = np.ascontiguousarray(words, dtype=np.uint64)
        if words.ndim == 1:
            words = words[:, None]
        if words.shape[1] != max(1, -(-dim // 64)):
            raise PointError("word count does not match dimension")
        if dim % 64 and words.size and np.any(words[:, -1] >> np.uint64(dim % 64)):
            raise PointError("bits set beyond the declared dimension")
        return cls(tag, "bits", dim, words)

    @classmethod
    def from_sets(cls, tag: str, sets: Sequence[Sequence[int]]) -> "Relation":
        return cls.from_points(tag, [Point.sparse(s) for s in sets])

    def point(self, i: int) -> Point:
        if self.kind == "sparse":
            row = self.data.getrow(i)
            return Point.sparse(np.sort(row.indices))
        if self.kind == "bits":
            return Point("bits", self.data[i].copy(), self.dim)
        return Point("dense", self.data[i].copy(), self.dim)

    def __getitem__(self, i: int) -> Point:
        return self.point(i)

    def rows(self, idx: np.ndarray):
        """Raw row data for a set of indices (used by hashing and distances)."""
        return self.data[idx]

    def sizes(self) -> np.ndarray:
        if self._sizes is None:
            self._sizes = np.diff(self.data.indptr).astype(np.int64)
        return self._sizes

    def reset_counters(self):
        self.counters[:] = 0

    def relabel(self, tag: str) -> "Relation":
        """Same points under another tag, with fresh counters."""
        return Relation(tag, self.kind, self.dim, self.data)


def _csr_from_lists(sets, dim: int) -> sp.csr_matrix:
    indptr = np.zeros(len(sets) + 1, dtype=np.int64)
    for i, s in enumerate(sets):
        indptr[i + 1] = indptr[i] + len(s)
    indices = np.concatenate([np.asarray(s, dtype=np.int64) for s in sets]) if sets else \
        np.zeros(0, dtype=np.int64)
    values = np.ones(indices.size, dtype=np.int64)
    return sp.csr_matrix((values, indices, indptr), shape=(len(sets), max(dim, 1)))


def check_metric(metric: str, kind: str):
    if metric not in METRIC_KIND:
        raise PointError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")
    if METRIC_KIND[metric] != kind:
        raise PointError(f"metric {metric} needs {METRIC_KIND[metric]} points, got {kind}")


def _blocks(na: int, nb: int, width: int):
    step = max(1, _BLOCK_ELEMS // max(1, nb * max(1, width)))
    for lo in range(0, na, step):
        yield lo, min(na, lo + step)


def _hamming(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for lo, hi in _blocks(a.shape[0], b.shape[0], a.shape[1]):
        x = np.bitwise_xor(a[lo:hi, None, :], b[None, :, :])
        out[lo:hi] = np.bitwise_count(x).sum(axis=-1, dtype=np.int64)
    return out


def _minkowski(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for lo, hi in _blocks(a.shape[0], b.shape[0], a.shape[1]):
        diff = a[lo:hi, None, :] - b[None, :, :]
        if p == 1:
            out[lo:hi] = np.abs(diff).sum(axis=-1)
        else:
            out[lo:hi] = np.sqrt(np.square(diff).sum(axis=-1))
    return out


def _unit_rows(a: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.square(a).sum(axis=-1))
    if np.any(norms == 0):
        raise PointError("angular distance is undefined for the zero vector")
    return a / norms[:, None]


def _angular(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ua, ub = _unit_rows(a), _unit_rows(b)
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    for lo, hi in _blocks(a.shape[0], b.shape[0], a.shape[1]):
        minus = np.sqrt(np.square(ua[lo:hi, None, :] - ub[None, :, :]).sum(axis=-1))
        plus = np.sqrt(np.square(ua[lo:hi, None, :] + ub[None, :, :]).sum(axis=-1))
        out[lo:hi] = 2.0 * np.arctan2(minus, plus) / np.pi
    return out


def _jaccard(a: sp.csr_matrix, b: sp.csr_matrix) -> np.ndarray:
    dim = max(a.shape[1], b.shape[1])
    if a.shape[1] != dim:
        a = sp.csr_matrix((a.data, a.indices, a.indptr), shape=(a.shape[0], dim))
    if b.shape[1] != dim:
        b = sp.csr_matrix((b.data, b.indices, b.indptr), shape=(b.shape[0], dim))
    inter = (a @ b.T).toarray().astype(np.float64)
    size_a = np.diff(a.indptr).astype(np.float64)
    size_b = np.diff(b.indptr).astype(np.float64)
    union = size_a[:, None] + size_b[None, :] - inter
    if np.any(union == 0):
        raise PointError("Jaccard similarity is undefined for two empty sets")
    return 1.0 - inter / union


def _kernel(metric: str):
    return {
        "hamming": _hamming,
        "l1": lambda a, b: _minkowski(a, b, 1),
        "l2": lambda a, b: _minkowski(a, b, 2),
        "angular": _angular,
        "jaccard": _jaccard,
    }[metric]


def pairwise_distances(metric: str, rel_a: Relation, idx_a, rel_b: Relation, idx_b) -> np.ndarray:
    """Distance matrix between ``rel_a[idx_a]`` and ``rel_b[idx_b]``."""
    check_metric(metric, rel_a.kind)
    check_metric(metric, rel_b.kind)
    if rel_a.kind != "sparse" and rel_a.dim != rel_b.dim:
        raise PointError(f"dimension mismatch: {rel_a.dim} vs {rel_b.dim}")
    idx_a = np.asarray(idx_a, dtype=np.int64)
    idx_b = np.asarray(idx_b, dtype=np.int64)
    if idx_a.size == 0 or idx_b.size == 0:
        return np.zeros((idx_a.size, idx_b.size), dtype=np.float64)
    return _kernel(metric)(rel_a.data[idx_a], rel_b.data[idx_b])


def _singleton(p: Point, tag: str) -> Relation:
    if p.kind == "sparse":
        return Relation(tag, "sparse", p.dim, [p.data])
    return Relation(tag, p.kind, p.dim, p.data[None, :])


def distance(metric: str, x: Point, y: Point) -> float:
    """d(x, y) for one pair of points.

    Jaccard and angular are returned as distances in [0, 1]
    (``1 - |x & y| / |x | y|`` and ``angle / pi``).
    """
    if x.kind != y.kind:
        raise PointError(f"cannot compare {x.kind} with {y.kind} points")
    if x.kind != "sparse" and x.dim != y.dim:
        raise PointError(f"dimension mismatch: {x.dim} vs {y.dim}")
    d = pairwise_distances(metric, _singleton(x, "R"), [0], _singleton(y, "S"), [0])
    return float(d[0, 0])
