"""Simulated two-level memory with block-transfer accounting.

Sizes are in points: the internal memory holds ``M`` points and moves data in
blocks of ``B`` points. External arrays hold point ids; every element access
goes through :meth:`BlockStore.access` or one of the block-level helpers,
which keep an LRU set of at most ``M // B`` resident blocks.
"""
from __future__ import annotations

import math
from collections import OrderedDict, defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class EmConfig:
    M: int
    B: int

    def __post_init__(self):
        if not 0 < self.B <= self.M:
            raise ValueError(f"need 0 < B <= M, got M={self.M}, B={self.B}")

    @property
    def blocks(self) -> int:
        return max(1, self.M // self.B)

    def satisfies_theorem(self, N: int) -> bool:
        """The memory hypothesis ``18 log N + 3B <= M``."""
        return 18 * math.log2(max(N, 2)) + 3 * self.B <= self.M

    def split(self, parts: int) -> "EmConfig":
        """Geometry of one of ``parts`` instances sharing this memory."""
        return EmConfig(max(self.B, self.M // parts), self.B)


@dataclass
class IoStats:
    reads: int = 0
    writes: int = 0
    peak_resident: int = 0
    phases: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.reads + self.writes

    def __add__(self, other: "IoStats") -> "IoStats":
        phases = dict(self.phases)
        for k, (r, w) in other.phases.items():
            pr, pw = phases.get(k, (0, 0))
            phases[k] = (pr + r, pw + w)
        return IoStats(self.reads + other.reads, self.writes + other.writes,
                       max(self.peak_resident, other.peak_resident), phases)

    def __sub__(self, other: "IoStats") -> "IoStats":
        phases = {}
        for k, (r, w) in self.phases.items():
            pr, pw = other.phases.get(k, (0, 0))
            phases[k] = (r - pr, w - pw)
        return IoStats(self.reads - other.reads, self.writes - other.writes,
                       self.peak_resident, phases)

    def to_text(self, run_id: str, config: EmConfig) -> str:
        lines = [f"run={run_id} M={config.M} B={config.B} reads={self.reads} "
                 f"writes={self.writes} total={self.total} peak_resident={self.peak_resident}"]
        for name in sorted(self.phases):
            r, w = self.phases[name]
            lines.append(f"run={run_id} phase={name} reads={r} writes={w}")
        return "\n".join(lines) + "\n"


class BlockStore:
    """Block cache over named external arrays.

    One store belongs to one run; it is not thread-safe.
    """

    def __init__(self, config: EmConfig):
        self.config = config
        self.B = config.B
        self.capacity = config.blocks
        self._arrays: dict[str, np.ndarray] = {}
        self._cache: OrderedDict = OrderedDict()
        self._phase = "other"
        self._phase_counts = defaultdict(lambda: [0, 0])
        self.reads = 0
        self.writes = 0
        self.peak = 0

    # arrays

    def register(self, name: str, payload) -> np.ndarray:
        self._arrays[name] = np.asarray(payload)
        return self._arrays[name]

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    # accounting

    @contextmanager
    def phase(self, name: str):
        prev, self._phase = self._phase, name
        try:
            yield
        finally:
            self._phase = prev

    def _read(self):
        self.reads += 1
        self._phase_counts[self._phase][0] += 1

    def _write(self):
        self.writes += 1
        self._phase_counts[self._phase][1] += 1

    def _evict_one(self):
        _, dirty = self._cache.popitem(last=False)
        if dirty:
            self._write()

    def touch(self, name: str, block: int, write: bool = False, fetch: bool = True):
        """Make one block resident. ``fetch=False`` allocates a block that is
        about to be overwritten entirely, so no read is charged."""
        key = (name, block)
        cache = self._cache
        if key in cache:
            cache.move_to_end(key)
            if write:
                cache[key] = True
            return
        if len(cache) >= self.capacity:
            self._evict_one()
        cache[key] = write or not fetch
        if fetch:
            self._read()
        if len(cache) > self.peak:
            self.peak = len(cache)

    def touch_range(self, name: str, start: int, stop: int, write: bool = False):
        """Sequential access to elements ``start..stop-1``."""
        if stop <= start:
            return
        B = self.B
        for block in range(start // B, (stop - 1) // B + 1):
            self.touch(name, block, write)

    def touch_positions(self, name: str, positions, write: bool = False):
        """Access the given element positions in order."""
        B = self.B
        last = None
        for block in (np.asarray(positions) // B).tolist():
            if block != last:
                self.touch(name, block, write)
                last = block

    def access(self, name: str, index: int, mode: str = "read"):
        arr = self._arrays[name]
        if not 0 <= index < arr.shape[0]:
            raise IndexError(f"{name}[{index}] out of bounds (size {arr.shape[0]})")
        self.touch(name, index // self.B, write=(mode == "write"))
        return arr[index]

    def release(self, name: str, block: int):
        """Drop a block from memory, writing it back if dirty."""
        dirty = self._cache.pop((name, block), None)
        if dirty:
            self._write()

    def flush(self):
        """Write back every dirty block; blocks stay resident and clean."""
        for key, dirty in self._cache.items():
            if dirty:
                self._write()
                self._cache[key] = False

    def resident(self, name: str, block: int) -> bool:
        return (name, block) in self._cache

    @property
    def resident_blocks(self) -> int:
        return len(self._cache)

    def reset_stats(self):
        self.reads = self.writes = 0
        self.peak = len(self._cache)
        self._phase_counts.clear()

    def snapshot_stats(self) -> IoStats:
        return IoStats(self.reads, self.writes, self.peak,
                       {k: tuple(v) for k, v in self._phase_counts.items()})


reset_stats = BlockStore.reset_stats
snapshot_stats = BlockStore.snapshot_stats


def _stable_order(keys) -> np.ndarray:
    if isinstance(keys, tuple):
        return np.lexsort(keys[::-1])
    return np.argsort(keys, kind="stable")


def _segment_key(keys, idx):
    if isinstance(keys, tuple):
        return tuple(k[idx] for k in keys)
    return keys[idx]


def sort_external(store: BlockStore, name: str, keys, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Stable sort of ``store[name][start:stop]`` by ``keys`` with I/O accounting.

    ``keys`` is an array aligned with the segment, or a tuple of arrays
    (most significant first). Segments that fit in memory cost one read and
    one write pass; larger ones use run formation plus multiway merges of
    fan-in ``M/B - 1``. Returns the permutation applied to the segment.
    """
    arr = store[name]
    stop = arr.shape[0] if stop is None else stop
    n = stop - start
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    order = _stable_order(keys)
    mem_points = store.capacity * store.B
    if n <= mem_points:
        store.touch_range(name, start, stop)
        store.touch_range(name, start, stop, write=True)
        arr[start:stop] = arr[start:stop][order]
        return order
    _external_merge_sort(store, name, keys, start, stop, mem_points)
    arr[start:stop] = arr[start:stop][order]
    return order


def _external_merge_sort(store, name, keys, start, stop, run_len):
    B = store.B
    n = stop - start
    fan_in = max(2, store.capacity - 1)
    scratch = [f"{name}#sort0", f"{name}#sort1"]
    for s in scratch:
        if s not in store or store[s].shape[0] < n:
            store.register(s, np.zeros(n, dtype=np.int64))

    # run formation: read a memory load, sort it, stream it out to scratch
    runs = []
    with store.phase("sort"):
        for lo in range(0, n, run_len):
            hi = min(n, lo + run_len)
            store.touch_range(name, start + lo, start + hi)
            for block in range(lo // B, (hi - 1) // B + 1):
                store.touch(scratch[0], block, fetch=False)
                store.release(scratch[0], block)
            runs.append((lo, hi))

        # each run's contents in sorted order, as segment offsets
        run_members = [lo + _stable_order(_segment_key(keys, np.arange(lo, hi))) for lo, hi in runs]
        src = 0
        while len(runs) > 1:
            last_pass = len(runs) <= fan_in
            dst_name = name if last_pass else scratch[1 - src]
            dst_base = start if last_pass else 0
            new_runs, new_members = [], []
            for g in range(0, len(runs), fan_in):
                group = list(range(g, min(len(runs), g + fan_in)))
                members = np.concatenate([run_members[i] for i in group])
                origin = np.concatenate([np.arange(runs[i][0], runs[i][1]) for i in group])
                merged = _stable_order(_segment_key(keys, members))
                out_lo = runs[group[0]][0]
                _simulate_merge(store, scratch[src], origin[merged], dst_name,
                                dst_base + out_lo, dst_base + runs[group[-1]][1],
                                partial_edges=last_pass, seg=(start, stop))
                new_runs.append((out_lo, runs[group[-1]][1]))
                new_members.append(members[merged])
            runs, run_members = new_runs, new_members
            src = 1 - src


def _simulate_merge(store, src_name, src_positions, dst_name, dst_lo, dst_hi, partial_edges, seg):
    """Replay the block traffic of one multiway merge.

    ``src_positions[t]`` is the scratch position consumed at output step t.
    A source block is read when first consumed and dropped after its last
    element; an output block is allocated on first write and flushed once full.
    """
    B = store.B
    T = src_positions.size
    src_blocks = src_positions // B
    t = np.arange(T)
    uniq, first = np.unique(src_blocks, return_index=True)
    last = T - 1 - np.unique(src_blocks[::-1], return_index=True)[1]
    dst_blocks = (dst_lo + t) // B
    d_uniq, d_first = np.unique(dst_blocks, return_index=True)
    d_last = T - 1 - np.unique(dst_blocks[::-1], return_index=True)[1]

    # event kinds in processing order within one step: 0 read, 1 alloc, 2 drop src, 3 flush dst
    times = np.concatenate([first, d_first, last, d_last])
    kinds = np.concatenate([np.zeros(uniq.size), np.ones(d_uniq.size),
                            np.full(uniq.size, 2), np.full(d_uniq.size, 3)]).astype(np.int64)
    blocks = np.concatenate([uniq, d_uniq, uniq, d_uniq])
    ev = np.lexsort((kinds, times))
    seg_lo, seg_hi = seg
    for kind, block in zip(kinds[ev].tolist(), blocks[ev].tolist()):
        if kind == 0:
            store.touch(src_name, block)
        elif kind == 1:
            shared = partial_edges and (block * B < seg_lo or (block + 1) * B > seg_hi)
            store.touch(dst_name, block, write=True, fetch=shared)
        elif kind == 2:
            store.release(src_name, block)
        else:
            store.release(dst_name, block)
