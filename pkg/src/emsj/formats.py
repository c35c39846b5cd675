"""Relation file formats.

``dense-bin``  magic ``EMSJ``, u32 version (1), u32 dim, u64 count, then
               count*dim little-endian float64, row-major.
``dense-txt``  one comma-separated row per point.
``sparse``     one line per point, space-separated strictly increasing ids.
``bits``       u32 dim, u64 count, then count rows of ceil(dim/8) bytes,
               LSB-first within each byte.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .points import PointError, Relation

FORMATS = ("dense-bin", "dense-txt", "sparse", "bits")
MAGIC = b"EMSJ"
VERSION = 1

_EXTENSIONS = {
    ".emsj": "dense-bin",
    ".bin": "dense-bin",
    ".csv": "dense-txt",
    ".txt": "sparse",
    ".sets": "sparse",
    ".bits": "bits",
}


class FormatError(PointError):
    """Raised for malformed relation files."""


def infer_format(path) -> str:
    ext = Path(path).suffix.lower()
    if ext not in _EXTENSIONS:
        raise FormatError(f"cannot infer format of {path}; pass one of {', '.join(FORMATS)}")
    return _EXTENSIONS[ext]


def load_relation(path, fmt: str | None = None, tag: str = "R") -> Relation:
    """Read a relation; points keep file order and counters start at zero."""
    fmt = fmt or infer_format(path)
    raw = Path(path).read_bytes()
    if fmt == "dense-bin":
        return _read_dense_bin(raw, tag)
    if fmt == "dense-txt":
        return _read_dense_txt(raw.decode(), tag)
    if fmt == "sparse":
        return _read_sparse(raw.decode(), tag)
    if fmt == "bits":
        return _read_bits(raw, tag)
    raise FormatError(f"unknown format {fmt!r}")


def _read_dense_bin(raw: bytes, tag: str) -> Relation:
    if len(raw) < 20 or raw[:4] != MAGIC:
        raise FormatError("missing EMSJ magic header")
    version, dim, count = struct.unpack_from("<IIQ", raw, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    body = raw[20:]
    if len(body) != 8 * dim * count:
        raise FormatError(f"expected {count}x{dim} floats, found {len(body)} bytes")
    arr = np.frombuffer(body, dtype="<f8").reshape(count, dim).astype(np.float64)
    return Relation.from_dense(tag, arr)


def _read_dense_txt(text: str, tag: str) -> Relation:
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(v) for v in line.split(",")])
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise FormatError(f"line {lineno}: dimension mismatch "
                              f"({len(rows[-1])} vs {len(rows[0])})")
    if not rows:
        raise FormatError("no points in file")
    return Relation.from_dense(tag, np.array(rows))


def _read_sparse(text: str, tag: str) -> Relation:
    sets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        try:
            ids = [int(v) for v in line.split()]
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        if any(i < 0 for i in ids) or any(b <= a for a, b in zip(ids, ids[1:])):
            raise FormatError(f"line {lineno}: ids not strictly increasing")
        sets.append(ids)
    if not sets:
        raise FormatError("no points in file")
    return Relation.from_sets(tag, sets)


def _read_bits(raw: bytes, tag: str) -> Relation:
    if len(raw) < 12:
        raise FormatError("truncated bits header")
    dim, count = struct.unpack_from("<IQ", raw, 0)
    if dim == 0:
        raise FormatError("bit dimension must be positive")
    nbytes = -(-dim // 8)
    body = raw[12:]
    if len(body) != nbytes * count:
        raise FormatError(f"expected {count} rows of {nbytes} bytes, found {len(body)} bytes")
    rows = np.frombuffer(body, dtype=np.uint8).reshape(count, nbytes)
    return Relation.from_words(tag, bytes_to_words(rows, dim), dim)


def bytes_to_words(rows: np.ndarray, dim: int) -> np.ndarray:
    nwords = max(1, -(-dim // 64))
    padded = np.zeros((rows.shape[0], nwords * 8), dtype=np.uint8)
    padded[:, :rows.shape[1]] = rows
    return padded.view("<u8").astype(np.uint64).reshape(rows.shape[0], nwords)


def words_to_bytes(words: np.ndarray, dim: int) -> np.ndarray:
    nbytes = -(-dim // 8)
    raw = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    return raw.reshape(words.shape[0], -1)[:, :nbytes]


def save_relation(rel: Relation, path, fmt: str | None = None):
    fmt = fmt or infer_format(path)
    path = Path(path)
    if fmt == "dense-bin":
        header = MAGIC + struct.pack("<IIQ", VERSION, rel.dim, len(rel))
        path.write_bytes(header + np.ascontiguousarray(rel.data, dtype="<f8").tobytes())
    elif fmt == "dense-txt":
        path.write_text("".join(",".join(repr(float(v)) for v in row) + "\n" for row in rel.data))
    elif fmt == "sparse":
        csr = rel.data
        lines = []
        for i in range(len(rel)):
            ids = np.sort(csr.indices[csr.indptr[i]:csr.indptr[i + 1]])
            lines.append(" ".join(map(str, ids.tolist())) + "\n")
        path.write_text("".join(lines))
    elif fmt == "bits":
        header = struct.pack("<IQ", rel.dim, len(rel))
        path.write_bytes(header + words_to_bytes(rel.data, rel.dim).tobytes())
    else:
        raise FormatError(f"unknown format {fmt!r}")
