"""Synthetic Hamming instances with a controlled set of near pairs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .points import Relation, pairwise_distances


class GeneratorError(ValueError):
    pass


def _n_words(dim: int) -> int:
    return (dim + 63) // 64


def _mask(dim: int) -> np.ndarray:
    m = np.full(_n_words(dim), np.uint64(0xFFFFFFFFFFFFFFFF), dtype=np.uint64)
    if dim % 64:
        m[-1] = np.uint64((1 << (dim % 64)) - 1)
    return m


def random_words(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    w = rng.integers(0, np.iinfo(np.uint64).max, size=(n, _n_words(dim)),
                     dtype=np.uint64, endpoint=True)
    return w & _mask(dim)


def flip_bits(words: np.ndarray, dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of one packed point with ``count`` distinct random bits flipped."""
    return perturb(words, dim, count, 1, rng)[0]


def perturb(words: np.ndarray, dim: int, count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` copies of one packed point, each with ``count`` distinct random bits flipped."""
    if not 0 <= count <= dim:
        raise GeneratorError("flip count must lie in [0, dim]")
    pos = np.argsort(rng.random((n, dim)), axis=1)[:, :count]
    flips = np.zeros((n, _n_words(dim) * 64), dtype=bool)
    np.put_along_axis(flips, pos, True, axis=1)
    packed = np.packbits(flips.reshape(n, -1, 8), axis=2, bitorder="little")
    masks = packed.reshape(n, -1).view("<u8").astype(np.uint64)
    return words[None, :] ^ masks


@dataclass
class PlantedInstance:
    R: Relation
    S: Relation
    planted: set

    @property
    def N(self) -> int:
        return len(self.R) + len(self.S)


def planted_hamming(n_r: int, n_s: int, dim: int, r: int, n_near: int, rng=None, *,
                    gap: float | None = None, max_rounds: int = 200) -> PlantedInstance:
    """Uniform background plus ``n_near`` planted pairs ``(i, i)`` at distance ``<= r``.

    Every other pair ends up at distance greater than ``gap`` (default ``r``)
    by resampling offending points, so the near pairs are exactly the planted
    ones when ``gap >= r``.
    """
    if not 0 <= n_near <= min(n_r, n_s):
        raise GeneratorError("n_near must be at most min(|R|, |S|)")
    if not 0 <= r <= dim:
        raise GeneratorError("need 0 <= r <= dim")
    gap = r if gap is None else gap
    if gap < r:
        raise GeneratorError("gap must be at least r")
    rng = np.random.default_rng(rng)
    R = random_words(n_r, dim, rng)
    S = random_words(n_s, dim, rng)
    dists = rng.integers(0, r + 1, size=n_near)

    def plant(i):
        S[i] = flip_bits(R[i], dim, int(dists[i]), rng)

    for i in range(n_near):
        plant(i)
    rel_r = Relation.from_words("R", R, dim)
    rel_s = Relation.from_words("S", S, dim)
    all_r, all_s = np.arange(n_r), np.arange(n_s)
    for _ in range(max_rounds):
        bad_r, bad_s, bad_pair = set(), set(), set()
        for lo in range(0, n_r, 512):
            idx = all_r[lo:lo + 512]
            d = pairwise_distances("hamming", rel_r, idx, rel_s, all_s)
            ii, jj = np.nonzero(d <= gap)
            for i, j in zip((idx[ii]).tolist(), jj.tolist()):
                if i == j and i < n_near:
                    continue
                if j >= n_near:
                    bad_s.add(j)
                elif i >= n_near:
                    bad_r.add(i)
                else:
                    # R[i] is close to R[j]; replanting S[j] alone would not help
                    bad_pair.add(j)
        if not bad_r and not bad_s and not bad_pair:
            return PlantedInstance(rel_r, rel_s, {(i, i) for i in range(n_near)})
        for i in sorted(bad_r):
            R[i] = random_words(1, dim, rng)[0]
        for j in sorted(bad_s):
            S[j] = random_words(1, dim, rng)[0]
        for j in sorted(bad_pair):
            R[j] = random_words(1, dim, rng)[0]
            plant(j)
    raise GeneratorError(f"could not separate background beyond distance {gap}; "
                         "increase dim or lower the gap")


def hub_instance(dim: int, n_copies: int, hub_distance: int, rng=None) -> PlantedInstance:
    """One point in R and ``n_copies`` identical points of S at ``hub_distance`` from it."""
    rng = np.random.default_rng(rng)
    hub = random_words(1, dim, rng)[0]
    other = flip_bits(hub, dim, hub_distance, rng)
    R = Relation.from_words("R", hub[None, :], dim)
    S = Relation.from_words("S", np.repeat(other[None, :], n_copies, axis=0), dim)
    return PlantedInstance(R, S, set())


def branching_instance(dim: int, near_distance: int, bg_distance: int, n_background: int,
                       copies: int = 2, rng=None) -> PlantedInstance:
    """``copies`` equal points in R; S holds one partner at ``near_distance``
    and ``n_background`` points at exactly ``bg_distance`` from them.

    Every subproblem that holds the tracked pair ``(0, 0)`` then has at least
    two R points, so the recursion does not stop early on it.
    """
    rng = np.random.default_rng(rng)
    x = random_words(1, dim, rng)[0]
    R = np.repeat(x[None, :], copies, axis=0)
    S = np.empty((n_background + 1, _n_words(dim)), dtype=np.uint64)
    S[0] = flip_bits(x, dim, near_distance, rng)
    S[1:] = perturb(x, dim, bg_distance, n_background, rng)
    return PlantedInstance(Relation.from_words("R", R, dim), Relation.from_words("S", S, dim), {(0, 0)})
