"""Readers and writers for feature, label and pair files.

Binary feature files: ``b"FMAT"``, version byte 0x01, u64 N, u64 D (little
endian), then N*D little-endian float32 values, row-major. Anything that does
not start with the magic is parsed as header-less CSV.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .data import FeatureMatrix, PairSet, as_array, as_labels
from .errors import BadMagic, CorruptPayload, InputError, UnsupportedVersion

FMAT_MAGIC = b"FMAT"
FMAT_VERSION = 1
_HEADER = struct.Struct("<4sBQQ")


def features_to_bytes(features) -> bytes:
    X = as_array(features)
    N, D = X.shape
    body = np.ascontiguousarray(X, dtype="<f4").tobytes()
    return _HEADER.pack(FMAT_MAGIC, FMAT_VERSION, N, D) + body


def features_from_bytes(data: bytes) -> FeatureMatrix:
    if len(data) < 4 or data[:4] != FMAT_MAGIC:
        raise BadMagic("not an FMAT feature file")
    if len(data) < _HEADER.size:
        raise CorruptPayload("feature header is truncated")
    _, version, N, D = _HEADER.unpack_from(data)
    if version != FMAT_VERSION:
        raise UnsupportedVersion(f"feature file version {version}")
    expected = _HEADER.size + 4 * N * D
    if len(data) != expected:
        raise CorruptPayload(f"feature payload has {len(data)} bytes, expected {expected}")
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(N, D)
    return FeatureMatrix(arr.astype(np.float64))


def write_features(path, features, fmt: str | None = None) -> None:
    """Write binary FMAT, or CSV if ``fmt="csv"`` or the path ends in .csv."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() in (".csv", ".txt") else "fmat")
    if fmt == "csv":
        np.savetxt(path, as_array(features), delimiter=",", fmt="%.17g")
    elif fmt == "fmat":
        path.write_bytes(features_to_bytes(features))
    else:
        raise InputError(f"unknown feature format {fmt!r}")


def read_features(path) -> FeatureMatrix:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if data[:4] == FMAT_MAGIC:
        return features_from_bytes(data)
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except ValueError as exc:
        raise InputError(f"{path} is neither FMAT nor numeric CSV: {exc}") from exc
    if arr.size == 0:
        raise InputError(f"{path} holds no rows")
    return FeatureMatrix(arr)


def write_labels(path, labels) -> None:
    labels = as_labels(labels)
    Path(path).write_text("".join(f"{v}\n" for v in labels.tolist()))


def read_labels(path, n: int | None = None) -> np.ndarray:
    path = Path(path)
    try:
        lines = [ln.strip() for ln in path.read_text().splitlines()]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    lines = [ln for ln in lines if ln]
    try:
        values = [int(ln) for ln in lines]
    except ValueError as exc:
        raise InputError(f"{path}: labels must be integers ({exc})") from exc
    return as_labels(np.asarray(values, dtype=np.int64), n)


def write_pairs(path, pairs: PairSet) -> None:
    with Path(path).open("w") as fh:
        for p in pairs:
            fh.write(f"{p.i} {p.j} {p.y}\n")


def read_pairs(path, n: int | None = None) -> PairSet:
    path = Path(path)
    triples = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 'i j y'")
        try:
            triples.append(tuple(int(v) for v in parts))
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from exc
    pairs = PairSet.from_triples(triples)
    if n is not None:
        pairs.check_bounds(n)
    return pairs
