"""Feature matrices, normalization, labels and pairwise constraints."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from .errors import (
    InputError,
    NegativeEntry,
    NoNegativePairs,
    NonFiniteEntry,
    NoPositivePairs,
    ZeroRow,
)

NORM_STATES = ("raw", "l1", "l2")
NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """N x D dense float64 features plus the normalization they carry.

    The array is copied on construction and made read-only, so instances can
    be shared freely.
    """

    values: np.ndarray
    norm_state: str = "raw"

    def __post_init__(self):
        if self.norm_state not in NORM_STATES:
            raise InputError(f"unknown norm_state {self.norm_state!r}")
        arr = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError(f"feature matrix must be non-empty 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEntry("feature matrix has non-finite entries")
        if self.norm_state == "l1":
            if np.any(arr < 0):
                raise NegativeEntry("l1 state requires non-negative rows")
            if np.any(np.abs(arr.sum(axis=1) - 1.0) > NORM_TOL):
                raise InputError("l1 state requires rows summing to 1")
        elif self.norm_state == "l2":
            if np.any(np.abs(np.linalg.norm(arr, axis=1) - 1.0) > NORM_TOL):
                raise InputError("l2 state requires unit-norm rows")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __len__(self) -> int:
        return self.rows

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_array(features) -> np.ndarray:
    """Return the float64 2-D array behind a FeatureMatrix or array-like."""
    if isinstance(features, FeatureMatrix):
        return features.values
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D feature array, got shape {arr.shape}")
    return arr


def is_histogram_rows(values: np.ndarray, tol: float = NORM_TOL) -> bool:
    """True if every row is non-negative and sums to 1 within `tol`."""
    values = np.asarray(values, dtype=np.float64)
    return bool(np.all(values >= 0) and np.all(np.abs(values.sum(axis=1) - 1.0) <= tol))


def l1_normalize(m) -> FeatureMatrix:
    """Divide each row by its sum; rows must be non-negative with positive sum."""
    if isinstance(m, FeatureMatrix) and m.norm_state == "l1":
        return m
    arr = as_array(m)
    if np.any(arr < 0):
        raise NegativeEntry("l1 normalization needs non-negative entries")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(sums <= 0)
    if bad.size:
        raise ZeroRow(f"row {bad[0]} sums to zero")
    return FeatureMatrix(arr / sums[:, None], "l1")


def l2_normalize(m) -> FeatureMatrix:
    if isinstance(m, FeatureMatrix) and m.norm_state == "l2":
        return m
    arr = as_array(m)
    norms = np.linalg.norm(arr, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ZeroRow(f"row {bad[0]} has zero Euclidean norm")
    return FeatureMatrix(arr / norms[:, None], "l2")


def normalize(m, kind: str) -> FeatureMatrix:
    """Dispatch on 'l1', 'l2' or 'none'."""
    if kind == "l1":
        return l1_normalize(m)
    if kind == "l2":
        return l2_normalize(m)
    if kind in ("none", "raw"):
        return m if isinstance(m, FeatureMatrix) else FeatureMatrix(m)
    raise InputError(f"unknown normalization {kind!r}")


def as_labels(labels, n: int | None = None) -> np.ndarray:
    """Validate a label vector: non-negative integers, optionally of length n."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise InputError("labels must be one-dimensional")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise InputError("labels must be integers")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise InputError("labels must be non-negative")
    if n is not None and arr.size != n:
        raise InputError(f"got {arr.size} labels for {n} feature rows")
    return arr


class PairConstraint(NamedTuple):
    i: int
    j: int
    y: int


@dataclass(frozen=True, eq=False)
class PairSet:
    """Columnar storage of (i, j, y) pair constraints."""

    i: np.ndarray
    j: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        i = np.array(self.i, dtype=np.int64).ravel()
        j = np.array(self.j, dtype=np.int64).ravel()
        y = np.array(self.y, dtype=np.int64).ravel()
        if not (i.size == j.size == y.size):
            raise InputError("pair columns have different lengths")
        if np.any(i == j):
            raise InputError("pair with i == j")
        if np.any((y != 1) & (y != -1)):
            raise InputError("pair labels must be +1 or -1")
        if np.any(i < 0) or np.any(j < 0):
            raise InputError("negative pair index")
        for name, arr in (("i", i), ("j", j), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_triples(cls, triples) -> "PairSet":
        arr = np.asarray(list(triples), dtype=np.int64).reshape(-1, 3)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])

    def __len__(self) -> int:
        return int(self.y.size)

    def __iter__(self) -> Iterator[PairConstraint]:
        for a, b, c in zip(self.i.tolist(), self.j.tolist(), self.y.tolist()):
            yield PairConstraint(a, b, c)

    def __getitem__(self, k: int) -> PairConstraint:
        return PairConstraint(int(self.i[k]), int(self.j[k]), int(self.y[k]))

    @property
    def pos_count(self) -> int:
        return int(np.count_nonzero(self.y == 1))

    @property
    def neg_count(self) -> int:
        return int(np.count_nonzero(self.y == -1))

    def check_bounds(self, n: int) -> None:
        if len(self) and (self.i.max() >= n or self.j.max() >= n):
            raise InputError(f"pair index out of range for {n} rows")

    def subset(self, idx) -> "PairSet":
        return PairSet(self.i[idx], self.j[idx], self.y[idx])


def count_available_pairs(labels) -> tuple[int, int]:
    """Number of distinct unordered (same-class, different-class) index pairs."""
    labels = as_labels(labels)
    _, counts = np.unique(labels, return_counts=True)
    n = labels.size
    pos = int(np.sum(counts * (counts - 1) // 2))
    neg = int((n * n - np.sum(counts * counts)) // 2)
    return pos, neg


def generate_pairs(labels, budget: int = 500_000, pos_fraction: float = 0.5,
                   seed: int = 0) -> PairSet:
    """Sample similar/dissimilar pairs from class labels.

    Pairs are drawn with replacement, uniformly within the same-class pool and
    within the cross-class pool. The total is capped at the number of
    distinct pairs the labels admit (a warning is issued when capping).
    """
    labels = as_labels(labels)
    if not 0.0 < pos_fraction < 1.0:
        raise InputError("pos_fraction must lie in (0, 1)")
    if budget < 1:
        raise InputError("budget must be at least 1")
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    if classes.size < 2:
        raise NoNegativePairs("need at least two classes for dissimilar pairs")
    pos_avail, neg_avail = count_available_pairs(labels)
    if pos_avail == 0:
        raise NoPositivePairs("no class has two or more members")

    total = min(budget, pos_avail + neg_avail)
    if total < budget:
        warnings.warn(f"budget {budget} exceeds the {total} distinct pairs available; "
                      f"emitting {total}", stacklevel=2)
    n_pos = int(round(total * pos_fraction))
    n_pos = min(max(n_pos, 1), total - 1) if total >= 2 else total
    n_neg = total - n_pos

    n = labels.size
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n) - starts[inverse[order]]
    size_of = counts[inverse]
    start_of = starts[inverse]

    rng = np.random.default_rng(seed)

    # positives: anchor weighted by its same-class partner count, then a partner
    w = (size_of - 1).astype(np.float64)
    pi = rng.choice(n, size=n_pos, p=w / w.sum())
    r = rng.integers(0, size_of[pi] - 1)
    r = np.where(r >= rank[pi], r + 1, r)
    pj = order[start_of[pi] + r]

    # negatives: anchor weighted by its out-of-class count, then a stranger
    w = (n - size_of).astype(np.float64)
    ni = rng.choice(n, size=n_neg, p=w / w.sum())
    r = rng.integers(0, n - size_of[ni])
    r = np.where(r >= start_of[ni], r + size_of[ni], r)
    nj = order[r]

    i = np.concatenate((pi, ni))
    j = np.concatenate((pj, nj))
    y = np.concatenate((np.ones(n_pos, np.int64), -np.ones(n_neg, np.int64)))
    perm = rng.permutation(total)
    lo, hi = np.minimum(i, j)[perm], np.maximum(i, j)[perm]
    return PairSet(lo, hi, y[perm])
