"""Emission sink, randomized duplicate suppression and collision counters."""
from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SINK_MODES = ("raw", "dedupe", "count-only")


def dedupe_probability(p_xy, L: float, level: int | None = None):
    """Acceptance probability for a near pair found with collision probability ``p_xy``.

    Oblivious recursion (``level`` given): ``min(1, (p_xy * L) ** -level)``.
    Cache-aware variant (``level=None``): ``min(1, 1 / (p_xy * L))``.
    """
    p = np.asarray(p_xy, dtype=np.float64)
    if np.any((p <= 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("collision probability must lie in (0, 1]")
    exponent = 1 if level is None else level
    if level is not None and level < 0:
        raise ValueError("recursion level must be non-negative")
    with np.errstate(over="ignore"):
        prob = np.minimum(1.0, (p * L) ** (-float(exponent)))
    return prob if prob.ndim else float(prob)


def dedupe_decision(p_xy: float, L: float, rng: np.random.Generator, level: int | None = None) -> bool:
    return bool(rng.random() < dedupe_probability(p_xy, L, level))


class EmissionSink:
    """Collects ``emit(i, j)`` calls in original (R-index, S-index) orientation.

    ``raw`` keeps every emission, ``dedupe`` gates each one by a coin flip
    (see :func:`dedupe_probability`), ``count-only`` keeps totals only.
    ``stream`` (a text file) receives one ``i<TAB>j`` line per accepted emission.
    """

    def __init__(self, mode: str = "raw", rng=None, stream=None):
        if mode not in SINK_MODES:
            raise ValueError(f"sink mode must be one of {SINK_MODES}")
        self.mode = mode
        self.rng = np.random.default_rng(rng)
        self.stream = stream
        self.offered = 0
        self.total = 0
        self._chunks_i: list[np.ndarray] = []
        self._chunks_j: list[np.ndarray] = []
        self._warned = False

    def emit(self, i, j, p=None, L: float | None = None, level: int | None = None):
        """Offer a batch of near pairs; returns how many were accepted."""
        i = np.atleast_1d(np.asarray(i, dtype=np.int64))
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        if i.size == 0:
            return 0
        self.offered += i.size
        if self.mode == "dedupe":
            if p is None or L is None:
                if not self._warned:
                    log.warning("no closed-form collision probability; dedupe falls back to raw")
                    self._warned = True
            else:
                keep = self.rng.random(i.size) < dedupe_probability(p, L, level)
                i, j = i[keep], j[keep]
        self.total += i.size
        if self.mode != "count-only" and i.size:
            self._chunks_i.append(i)
            self._chunks_j.append(j)
        if self.stream is not None and i.size:
            self.stream.write("".join(f"{a}\t{b}\n" for a, b in zip(i.tolist(), j.tolist())))
        return int(i.size)

    def _stacked(self):
        if not self._chunks_i:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(self._chunks_i), np.concatenate(self._chunks_j)

    def multiplicity(self) -> dict[tuple[int, int], int]:
        if self.mode == "count-only":
            raise RuntimeError("count-only sink does not keep pairs")
        i, j = self._stacked()
        if i.size == 0:
            return {}
        pairs, counts = np.unique(np.stack([i, j], axis=1), axis=0, return_counts=True)
        return {(int(a), int(b)): int(c) for (a, b), c in zip(pairs, counts)}

    def pairs(self) -> set[tuple[int, int]]:
        return set(self.multiplicity())

    @property
    def replication(self) -> float:
        """Average replication: emissions per distinct emitted pair."""
        distinct = len(self.multiplicity())
        return self.total / distinct if distinct else 0.0


@dataclass
class CollisionStats:
    """Per-level pair multiplicities observed during a recursive join.

    ``classes[i]`` counts pairs (with multiplicity) in level-i calls by class;
    ``far_by_k[(i, k)]`` splits the far count by ``floor(log2)`` of the smaller
    side, capped at ``floor(log2 M)``; ``tracked[(pair, i)]`` counts level-i
    calls containing a specific ``(R-index, S-index)`` pair.
    """

    classify: bool = False
    track: tuple = ()
    k_cap: int = 0
    calls: dict = field(default_factory=lambda: defaultdict(int))
    classes: dict = field(default_factory=lambda: defaultdict(lambda: {"near": 0, "cnear": 0, "far": 0}))
    far_by_k: dict = field(default_factory=lambda: defaultdict(int))
    tracked: dict = field(default_factory=lambda: defaultdict(int))
    max_level: int = 0

    def level_multiplicity(self, pair, level: int) -> int:
        return self.tracked.get((tuple(pair), level), 0)

    def merge(self, other: "CollisionStats"):
        for k, v in other.calls.items():
            self.calls[k] += v
        for k, v in other.classes.items():
            for c in ("near", "cnear", "far"):
                self.classes[k][c] += v[c]
        for k, v in other.far_by_k.items():
            self.far_by_k[k] += v
        for k, v in other.tracked.items():
            self.tracked[k] += v
        self.max_level = max(self.max_level, other.max_level)

    def record_classes(self, level: int, dist: np.ndarray, r: float, cr: float, min_side: int):
        near = int(np.count_nonzero(dist <= r))
        cnear = int(np.count_nonzero((dist > r) & (dist <= cr)))
        far = dist.size - near - cnear
        cls = self.classes[level]
        cls["near"] += near
        cls["cnear"] += cnear
        cls["far"] += far
        k = min(int(math.floor(math.log2(min_side))), self.k_cap) if min_side > 0 else 0
        self.far_by_k[(level, k)] += far

    def to_text(self) -> str:
        lines = ["level\tcalls\tnear\tcnear\tfar"]
        for lvl in sorted(self.calls):
            c = self.classes.get(lvl, {"near": 0, "cnear": 0, "far": 0})
            lines.append(f"{lvl}\t{self.calls[lvl]}\t{c['near']}\t{c['cnear']}\t{c['far']}")
        if self.far_by_k:
            lines.append("level\tk\tfar")
            for (lvl, k) in sorted(self.far_by_k):
                lines.append(f"{lvl}\t{k}\t{self.far_by_k[(lvl, k)]}")
        return "\n".join(lines) + "\n"
