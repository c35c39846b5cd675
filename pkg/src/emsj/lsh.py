"""Monotonic LSH families with closed-form collision probabilities.

===========  =========  ==========================================
kind         metric     collision probability at distance d
===========  =========  ==========================================
bit-sample   hamming    1 - d / dim
minhash      jaccard    1 - d                  (Jaccard similarity)
simhash      angular    1 - d                  (d = angle / pi)
p-stable-l1  l1         Cauchy projections, bucket width w
p-stable-l2  l2         Gaussian projections, bucket width w
===========  =========  ==========================================

Raw hash values are compacted into 64-bit words with the splitmix64
finalizer (multipliers ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``)
so bucket keys are reproducible bit-exactly across runs and platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .points import Point, PointError, Relation, check_metric, distance, pairwise_distances

FAMILY_FOR_METRIC = {
    "hamming": "bit-sample",
    "jaccard": "minhash",
    "angular": "simhash",
    "l1": "p-stable-l1",
    "l2": "p-stable-l2",
}
METRIC_FOR_FAMILY = {v: k for k, v in FAMILY_FOR_METRIC.items()}

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; a bijection on uint64, vectorized."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def combine_words(raw: list[np.ndarray]) -> np.ndarray:
    """Fold a tuple of raw hash values (one array per component) into one word."""
    acc = np.zeros_like(raw[0], dtype=np.uint64)
    for j, values in enumerate(raw):
        salt = np.uint64((j + 1) * 0x9E3779B97F4A7C15 % (1 << 64))
        acc = mix64(acc ^ mix64(values.astype(np.uint64) + salt))
    return acc


def pstable_l2_prob(d, w: float):
    """Pr[h(x) = h(y)] for Gaussian projections at distance d and width w."""
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = w / d
        p = 1.0 - 2.0 * ndtr(-s) - 2.0 / (math.sqrt(2.0 * math.pi) * s) * (1.0 - np.exp(-s * s / 2.0))
    return np.where(d == 0, 1.0, p)


def pstable_l1_prob(d, w: float):
    """Pr[h(x) = h(y)] for Cauchy projections at distance d and width w."""
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = w / d
        p = 2.0 * np.arctan(s) / math.pi - np.log1p(s * s) / (math.pi * s)
    return np.where(d == 0, 1.0, p)


@dataclass(frozen=True, eq=False)
class HashFn:
    """One drawn function. Evaluation is a pure function of these fields."""

    kind: str
    seed: int
    coord: int | None = None
    vector: np.ndarray | None = field(default=None, repr=False)
    offset: float | None = None
    w: float | None = None

    def raw(self, rel: Relation, idx) -> np.ndarray:
        """Un-compacted hash values for ``rel[idx]`` as uint64."""
        idx = np.asarray(idx, dtype=np.int64)
        check_metric(METRIC_FOR_FAMILY[self.kind], rel.kind)
        if self.kind == "bit-sample":
            words = rel.data[idx, self.coord // 64]
            return (words >> np.uint64(self.coord % 64)) & np.uint64(1)
        if self.kind == "minhash":
            sub = rel.data[idx]
            if np.any(np.diff(sub.indptr) == 0):
                raise PointError("minhash is undefined for an empty set")
            mixed = mix64(sub.indices.astype(np.uint64) ^ np.uint64(self.seed))
            return np.minimum.reduceat(mixed, sub.indptr[:-1]).astype(np.uint64)
        x = rel.data[idx]
        if x.shape[1] != self.vector.size:
            raise PointError("dimension mismatch between point and hash function")
        proj = (x * self.vector[None, :]).sum(axis=1)
        if self.kind == "simhash":
            return (proj >= 0).astype(np.uint64)
        buckets = np.floor((proj + self.offset) / self.w).astype(np.int64)
        return buckets.view(np.uint64)

    def eval_many(self, rel: Relation, idx) -> np.ndarray:
        return combine_words([self.raw(rel, idx)])

    def eval(self, x: Point) -> int:
        return int(self.eval_many(_as_relation(x), [0])[0])


@dataclass(frozen=True, eq=False)
class ConcatHashFn:
    """k independent base functions evaluated jointly."""

    parts: tuple[HashFn, ...]

    def eval_many(self, rel: Relation, idx) -> np.ndarray:
        return combine_words([h.raw(rel, idx) for h in self.parts])

    def eval(self, x: Point) -> int:
        return int(self.eval_many(_as_relation(x), [0])[0])


def _as_relation(x: Point) -> Relation:
    if x.kind == "sparse":
        return Relation("R", "sparse", x.dim, [x.data])
    return Relation("R", x.kind, x.dim, x.data[None, :])


@dataclass(frozen=True)
class LshFamily:
    """An (r, cr, p1, p2)-sensitive monotonic family.

    ``dim`` is the bit width for bit-sampling and the vector dimension for
    projection families (ignored by minhash). ``w`` is the bucket width of
    the p-stable families and defaults to ``r``.
    """

    kind: str
    r: float
    cr: float
    dim: int = 0
    w: float | None = None
    p1: float = field(init=False)
    p2: float = field(init=False)
    rho: float = field(init=False)

    def __post_init__(self):
        if self.kind not in METRIC_FOR_FAMILY:
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.kind in ("p-stable-l1", "p-stable-l2"):
            w = self.r if self.w is None else self.w
            if not w > 0:
                raise ValueError("p-stable bucket width must be positive")
            object.__setattr__(self, "w", float(w))
        if self.kind in ("bit-sample", "simhash", "p-stable-l1", "p-stable-l2") and self.dim <= 0:
            raise ValueError(f"{self.kind} needs a positive dimension")
        if not self.cr > self.r >= 0:
            raise ValueError("need 0 <= r < cr")
        p1 = float(self.prob_at(self.r))
        p2 = float(self.prob_at(self.cr))
        if not 0 < p2 < p1 <= 1:
            raise ValueError(f"family is not sensitive at r={self.r}, cr={self.cr}: "
                             f"p1={p1:.6g}, p2={p2:.6g}")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)
        object.__setattr__(self, "rho", math.log(p1) / math.log(p2))

    @classmethod
    def for_metric(cls, metric: str, r: float, c: float, dim: int = 0, w: float | None = None):
        return cls(FAMILY_FOR_METRIC[metric], r, c * r, dim=dim, w=w)

    @property
    def metric(self) -> str:
        return METRIC_FOR_FAMILY[self.kind]

    @property
    def c(self) -> float:
        return self.cr / self.r if self.r else math.inf

    def prob_at(self, d):
        """Closed-form collision probability as a function of distance."""
        d = np.asarray(d, dtype=np.float64)
        if self.kind == "bit-sample":
            p = 1.0 - d / self.dim
        elif self.kind in ("minhash", "simhash"):
            p = 1.0 - d
        elif self.kind == "p-stable-l2":
            p = pstable_l2_prob(d, self.w)
        else:
            p = pstable_l1_prob(d, self.w)
        p = np.clip(p, 0.0, 1.0)
        return p if p.ndim else float(p)

    def collision_prob(self, x: Point, y: Point) -> float:
        return float(self.prob_at(distance(self.metric, x, y)))

    def collision_probs(self, rel_a: Relation, ia, rel_b: Relation, ib) -> np.ndarray:
        return self.prob_at(pairwise_distances(self.metric, rel_a, ia, rel_b, ib))

    def draw(self, rng: np.random.Generator) -> HashFn:
        seed = int(rng.integers(0, 1 << 63))
        if self.kind == "bit-sample":
            return HashFn(self.kind, seed, coord=int(rng.integers(self.dim)))
        if self.kind == "minhash":
            return HashFn(self.kind, seed)
        if self.kind == "simhash":
            return HashFn(self.kind, seed, vector=rng.standard_normal(self.dim))
        vector = rng.standard_cauchy(self.dim) if self.kind == "p-stable-l1" \
            else rng.standard_normal(self.dim)
        return HashFn(self.kind, seed, vector=vector, offset=float(rng.uniform(0, self.w)), w=self.w)

    def describe(self, seed: int | None = None) -> str:
        fields = [("kind", self.kind), ("dim", self.dim), ("w", self.w if self.w else ""),
                  ("r", self.r), ("c", self.c), ("p1", self.p1), ("p2", self.p2)]
        if seed is not None:
            fields.append(("seed", seed))
        return " ".join(f"{k}={v}" for k, v in fields)

    @classmethod
    def parse(cls, text: str) -> "LshFamily":
        kv = dict(item.split("=", 1) for item in text.split())
        r = float(kv["r"])
        return cls(kv["kind"], r, float(kv["c"]) * r, dim=int(kv.get("dim", 0)),
                   w=float(kv["w"]) if kv.get("w") else None)


@dataclass(frozen=True)
class ConcatFamily:
    """``k`` concatenated draws from ``base``: probabilities become ``p ** k``."""

    base: LshFamily
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("concatenation length must be positive")

    @property
    def p1_eff(self) -> float:
        return self.base.p1 ** self.k

    @property
    def p2_eff(self) -> float:
        return self.base.p2 ** self.k

    # the concatenation is itself (r, cr, p1 ** k, p2 ** k)-sensitive
    p1 = p1_eff
    p2 = p2_eff

    @property
    def rho(self) -> float:
        return self.base.rho

    @property
    def metric(self) -> str:
        return self.base.metric

    @property
    def r(self) -> float:
        return self.base.r

    @property
    def cr(self) -> float:
        return self.base.cr

    def prob_at(self, d):
        return self.base.prob_at(d) ** self.k

    def collision_probs(self, rel_a, ia, rel_b, ib):
        return self.base.collision_probs(rel_a, ia, rel_b, ib) ** self.k

    def draw(self, rng: np.random.Generator) -> ConcatHashFn:
        return ConcatHashFn(tuple(self.base.draw(rng) for _ in range(self.k)))


def sensitize(family: LshFamily, M: int, N: int) -> ConcatFamily:
    """Smallest k with ``p2 ** k <= M / N``."""
    if not 0 < M < N:
        raise ValueError(f"need 0 < M < N, got M={M}, N={N}")
    target = M / N
    p2 = family.p2
    k = max(1, math.ceil(math.log(target) / math.log(p2)))
    # repair floating error around exact powers
    while p2 ** k > target:
        k += 1
    while k > 1 and p2 ** (k - 1) <= target:
        k -= 1
    return ConcatFamily(family, k)
