"""PCA projection baseline."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .data import as_array
from .errors import DimensionMismatch, InputError, RankDeficientWarning

# singular values below rel_tol * largest are treated as zero
_REL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean, d x D orthonormal components and their variances."""

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    rank: int | None = None

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).ravel()
        comps = np.array(self.components, dtype=np.float64, order="C")
        var = np.array(self.explained_variance, dtype=np.float64).ravel()
        if comps.ndim != 2 or comps.shape[1] != mean.size or comps.shape[0] != var.size:
            raise DimensionMismatch("inconsistent PCA model shapes")
        if comps.shape[0] < 1:
            raise InputError("PCA model needs at least one component")
        for name, arr in (("mean", mean), ("components", comps), ("explained_variance", var)):
            if not np.all(np.isfinite(arr)):
                raise InputError(f"non-finite PCA {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.rank is None:
            object.__setattr__(self, "rank", int(np.count_nonzero(var > 0)))

    @property
    def d(self) -> int:
        return self.components.shape[0]

    @property
    def D(self) -> int:
        return self.components.shape[1]

    def embed(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.D:
            raise DimensionMismatch(f"input has dimension {X.shape[-1]}, model expects {self.D}")
        return (X - self.mean) @ self.components.T


def _canonical_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each row so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=1)
    signs = np.sign(vecs[np.arange(vecs.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vecs * signs[:, None]


def _complete_basis(basis: np.ndarray, total: int) -> np.ndarray:
    """Extend orthonormal rows `basis` to `total` rows using coordinate axes."""
    D = basis.shape[1]
    rows = [b for b in basis]
    for c in range(D):
        if len(rows) >= total:
            break
        v = np.zeros(D)
        v[c] = 1.0
        for _ in range(2):
            for b in rows:
                v -= (b @ v) * b
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            rows.append(v / nrm)
    return np.array(rows)


def fit_pca(features, d: int) -> PcaModel:
    """Top-d principal directions of the mean-centred data.

    Decomposes whichever of the N x N Gram matrix or the D x D covariance is
    smaller. If the centred data has rank below d, the remaining components
    are an arbitrary orthonormal completion with zero variance and a
    RankDeficientWarning is issued.
    """
    X = as_array(features)
    N, D = X.shape
    if N < 2:
        raise InputError("PCA needs at least two rows")
    if not 1 <= d <= min(N, D):
        raise InputError(f"d={d} must lie in [1, min(N, D)={min(N, D)}]")
    mean = X.mean(axis=0)
    Xc = X - mean

    if N < D:
        evals, evecs = np.linalg.eigh(Xc @ Xc.T)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        keep = evals > _REL_TOL * max(evals[0], 0.0) if evals[0] > 0 else np.zeros_like(evals, bool)
        sv = np.sqrt(np.clip(evals[keep], 0, None))
        comps = (Xc.T @ evecs[:, keep] / sv).T
    else:
        evals, evecs = np.linalg.eigh(Xc.T @ Xc)
        evals, evecs = evals[::-1], evecs[:, ::-1]
        keep = evals > _REL_TOL * max(evals[0], 0.0) if evals[0] > 0 else np.zeros_like(evals, bool)
        comps = evecs[:, keep].T
    evals = evals[keep]

    rank = comps.shape[0]
    comps = comps[:d]
    var = evals[:d] / (N - 1)
    if rank < d:
        warnings.warn(f"data has rank {rank} < d={d}; padding with zero-variance components",
                      RankDeficientWarning, stacklevel=2)
        comps = _complete_basis(comps.reshape(-1, D), d)
        var = np.concatenate((var, np.zeros(d - rank)))
    # re-orthonormalize (Gram route loses a little precision)
    q, r = np.linalg.qr(comps.T)
    comps = (q * np.sign(np.diag(r))).T
    return PcaModel(mean, _canonical_signs(comps), var, rank=min(rank, d))


def project_pca(model: PcaModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("project_pca takes a single vector")
    return model.embed(x)
