import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlembed.data import PairSet
from nlembed.errors import BadMagic, CorruptPayload, InputError, UnsupportedVersion
from nlembed.fileio import (
    features_from_bytes,
    features_to_bytes,
    read_features,
    read_labels,
    read_pairs,
    write_features,
    write_labels,
    write_pairs,
)

float32_matrices = arrays(
    np.float32,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(-1e6, 1e6, width=32),
)


def test_fmat_header():
    blob = features_to_bytes(np.array([[1.0, 2.0, 3.0]]))
    assert blob[:5] == b"FMAT\x01"
    assert struct.unpack_from("<QQ", blob, 5) == (1, 3)
    assert np.frombuffer(blob[21:], "<f4").tolist() == [1.0, 2.0, 3.0]


@settings(max_examples=100, deadline=None)
@given(float32_matrices)
def test_fmat_round_trip(X):
    back = features_from_bytes(features_to_bytes(X.astype(np.float64)))
    np.testing.assert_array_equal(back.values, X.astype(np.float64))


def test_fmat_errors():
    blob = features_to_bytes(np.ones((2, 2)))
    with pytest.raises(BadMagic):
        features_from_bytes(b"NOPE" + blob[4:])
    with pytest.raises(UnsupportedVersion):
        features_from_bytes(blob[:4] + b"\x07" + blob[5:])
    with pytest.raises(CorruptPayload):
        features_from_bytes(blob[:-2])
    with pytest.raises(CorruptPayload):
        features_from_bytes(blob[:10])


def test_csv_and_binary_files(tmp_path, rng):
    X = rng.random((4, 3))
    write_features(tmp_path / "x.csv", X)
    np.testing.assert_array_equal(read_features(tmp_path / "x.csv").values, X)
    write_features(tmp_path / "x.fmat", X)
    np.testing.assert_allclose(read_features(tmp_path / "x.fmat").values, X, rtol=1e-7)
    (tmp_path / "bad.csv").write_text("1,2\nfoo,3\n")
    with pytest.raises(InputError):
        read_features(tmp_path / "bad.csv")
    with pytest.raises(InputError):
        read_features(tmp_path / "missing.csv")


def test_labels_and_pairs(tmp_path):
    write_labels(tmp_path / "l.txt", [0, 2, 1])
    np.testing.assert_array_equal(read_labels(tmp_path / "l.txt", 3), [0, 2, 1])
    with pytest.raises(InputError):
        read_labels(tmp_path / "l.txt", 4)
    (tmp_path / "bad.txt").write_text("0\nx\n")
    with pytest.raises(InputError):
        read_labels(tmp_path / "bad.txt")

    ps = PairSet.from_triples([(0, 1, 1), (1, 2, -1)])
    write_pairs(tmp_path / "p.txt", ps)
    assert (tmp_path / "p.txt").read_text() == "0 1 1\n1 2 -1\n"
    back = read_pairs(tmp_path / "p.txt", 3)
    assert list(back) == list(ps)
    with pytest.raises(InputError):
        read_pairs(tmp_path / "p.txt", 2)
    (tmp_path / "bad_pairs.txt").write_text("0 1\n")
    with pytest.raises(InputError):
        read_pairs(tmp_path / "bad_pairs.txt")
