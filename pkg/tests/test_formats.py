import struct

import numpy as np
import pytest

from emsj.formats import FormatError, bytes_to_words, load_relation, save_relation, words_to_bytes
from emsj.generate import random_words
from emsj.points import Relation


@pytest.mark.parametrize("suffix", [".emsj", ".csv"])
def test_dense_roundtrip(tmp_path, rng, suffix):
    rel = Relation.from_dense("R", rng.standard_normal((9, 3)))
    path = tmp_path / f"x{suffix}"
    save_relation(rel, path)
    back = load_relation(path)
    assert np.array_equal(back.data, rel.data)


def test_sparse_roundtrip(tmp_path):
    rel = Relation.from_sets("R", [[0, 4, 9], [2], [1, 3]])
    save_relation(rel, tmp_path / "x.sets")
    back = load_relation(tmp_path / "x.sets")
    assert [back[i] for i in range(3)] == [rel[i] for i in range(3)]


@pytest.mark.parametrize("dim", [1, 8, 63, 64, 65, 130])
def test_bits_roundtrip(tmp_path, rng, dim):
    rel = Relation.from_words("S", random_words(11, dim, rng), dim)
    save_relation(rel, tmp_path / "x.bits")
    back = load_relation(tmp_path / "x.bits", tag="S")
    assert back.dim == dim and np.array_equal(back.data, rel.data)


def test_bytes_words_inverse(rng):
    w = random_words(5, 77, rng)
    assert np.array_equal(bytes_to_words(words_to_bytes(w, 77), 77), w)


def test_bad_magic(tmp_path):
    (tmp_path / "x.emsj").write_bytes(b"NOPE" + bytes(16))
    with pytest.raises(FormatError, match="magic"):
        load_relation(tmp_path / "x.emsj")


def test_truncated_dense(tmp_path):
    (tmp_path / "x.emsj").write_bytes(b"EMSJ" + struct.pack("<IIQ", 1, 2, 3) + bytes(8))
    with pytest.raises(FormatError):
        load_relation(tmp_path / "x.emsj")


def test_ragged_csv(tmp_path):
    (tmp_path / "x.csv").write_text("1,2\n3\n")
    with pytest.raises(FormatError, match="dimension mismatch"):
        load_relation(tmp_path / "x.csv")


def test_unsorted_sparse(tmp_path):
    (tmp_path / "x.txt").write_text("1 2\n5 3\n")
    with pytest.raises(FormatError, match="strictly increasing"):
        load_relation(tmp_path / "x.txt")


def test_unknown_extension(tmp_path):
    with pytest.raises(FormatError):
        load_relation(tmp_path / "x.dat")
