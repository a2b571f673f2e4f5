"""Synthetic histogram datasets."""

from __future__ import annotations

import numpy as np

from .data import FeatureMatrix, l1_normalize
from .errors import InputError


def synth_blobs(classes: int, per_class: int, dims: int, separation: float = 3.0,
                seed: int = 0, noise: float = 1.0):
    """Noisy copies of one prototype histogram per class.

    Class c owns the coordinates ``c, c + classes, c + 2*classes, ...``; its
    prototype puts weight ``1 + separation`` there and 1 elsewhere. Samples add
    Gaussian noise of std ``noise / dims``, clip at 0 and l1-normalize.
    ``separation=inf`` gives prototypes supported only on their own
    coordinates.

    Returns ``(FeatureMatrix, labels)``.
    """
    if classes < 2 or per_class < 2 or dims < classes:
        raise InputError("need classes >= 2, per_class >= 2 and dims >= classes")
    if separation < 0 or noise < 0:
        raise InputError("separation and noise must be non-negative")
    rng = np.random.default_rng(seed)
    owner = np.arange(dims) % classes
    protos = np.empty((classes, dims))
    for c in range(classes):
        own = owner == c
        if np.isinf(separation):
            protos[c] = own.astype(float)
        else:
            protos[c] = 1.0 + separation * own
        protos[c] /= protos[c].sum()

    labels = np.repeat(np.arange(classes), per_class)
    X = protos[labels] + rng.normal(0.0, noise / dims, size=(labels.size, dims))
    X = np.clip(X, 0.0, None)
    # a fully clipped row falls back to its prototype
    dead = X.sum(axis=1) <= 0
    X[dead] = protos[labels[dead]]
    return l1_normalize(X), labels


def synth_nonlinear(classes: int = 2, per_class: int = 100, dims: int = 16, seed: int = 0):
    """Two histogram classes that agree in every per-coordinate mean and variance.

    Before l1 normalization, class 0 coordinates are i.i.d. on/off, 0 or 2
    with equal odds; class 1 coordinates are 0.5 with probability 0.8 and 3
    otherwise. Both laws have mean 1 and variance 1, so any linear functional
    of a row has the same mean and variance in both classes. What differs is
    how much mass sits below a small threshold, which saturating kernels pick
    up and linear maps do not. An all-zero class-0 row is redrawn.
    """
    if classes != 2:
        raise InputError("synth_nonlinear supports exactly two classes")
    if dims < 4 or per_class < 2:
        raise InputError("need dims >= 4 and per_class >= 2")
    rng = np.random.default_rng(seed)
    on_off = 2.0 * rng.integers(0, 2, size=(per_class, dims))
    dead = ~on_off.any(axis=1)
    while dead.any():
        on_off[dead] = 2.0 * rng.integers(0, 2, size=(int(dead.sum()), dims))
        dead = ~on_off.any(axis=1)
    spiky = np.where(rng.random((per_class, dims)) < 0.8, 0.5, 3.0)
    X = np.vstack((on_off, spiky))
    labels = np.repeat(np.arange(2), per_class)
    return l1_normalize(X), labels


def train_test_split(features: FeatureMatrix, labels, test_fraction: float = 0.5,
                     seed: int = 0):
    """Stratified split; returns (X_train, y_train, X_test, y_test)."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = int(round(idx.size * test_fraction))
        test_idx.append(idx[:n_test])
        train_idx.append(idx[n_test:])
    tr, te = np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))
    X = features.values
    state = features.norm_state
    return (FeatureMatrix(X[tr], state), labels[tr], FeatureMatrix(X[te], state), labels[te])
