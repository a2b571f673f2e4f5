"""Shifted chi-square and linear kernels with gradients.

Both kernels are evaluated coordinate-wise in O(D). Gradients are taken with
respect to the *first* argument, which is where the landmarks go.

For chi2, coordinates where both inputs are zero contribute 0 to the value
and to the gradient.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, InputError

KERNELS = ("chi2", "linear")

# rows processed per block in kernel_matrix; bounds the (block, m, D) temporary
_BLOCK_ELEMS = 1 << 22


def check_kernel(kernel: str) -> str:
    if kernel not in KERNELS:
        raise InputError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    return kernel


def _vec(v, name):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector, got shape {v.shape}")
    return v


def _same_dim(a, x):
    if a.shape[-1] != x.shape[-1]:
        raise DimensionMismatch(f"dimension {a.shape[-1]} vs {x.shape[-1]}")


def _chi2_terms(a, x):
    den = np.abs(a) + np.abs(x)
    num = 2.0 * a * x
    return np.divide(num, den, out=np.zeros(np.broadcast(num, den).shape), where=den > 0)


def _chi2_grad_terms(a, x):
    # 2 (x/den)(|x|/den) rather than 2 x|x| / den**2, which underflows
    den = np.abs(a) + np.abs(x)
    num = np.broadcast_to(x, den.shape)
    q = np.divide(num, den, out=np.zeros(den.shape), where=den > 0)
    return 2.0 * q * np.abs(q)


def kernel_value(kernel: str, a, x) -> float:
    """k(a, x). Symmetric in its arguments."""
    check_kernel(kernel)
    a, x = _vec(a, "a"), _vec(x, "x")
    _same_dim(a, x)
    if kernel == "linear":
        return float(a @ x)
    return float(_chi2_terms(a, x).sum())


def kernel_gradient(kernel: str, a, x) -> np.ndarray:
    """Gradient of k(a, x) with respect to a.

    For chi2 the c-th component is 2 x_c |x_c| / (|x_c| + |a_c|)^2; at a_c = 0
    this is used as the subgradient.
    """
    check_kernel(kernel)
    a, x = _vec(a, "a"), _vec(x, "x")
    _same_dim(a, x)
    if kernel == "linear":
        return x.copy()
    return _chi2_grad_terms(a, x)


def kernel_rows(kernel: str, landmarks: np.ndarray, x: np.ndarray) -> np.ndarray:
    """[k(l_1, x), ..., k(l_d, x)] for the rows l_t of `landmarks`."""
    check_kernel(kernel)
    landmarks = np.asarray(landmarks, dtype=np.float64)
    x = _vec(x, "x")
    _same_dim(landmarks, x)
    if kernel == "linear":
        return landmarks @ x
    return _chi2_terms(landmarks, x).sum(axis=1)


def kernel_rows_gradient(kernel: str, landmarks: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row t holds the gradient of k(l_t, x) with respect to l_t."""
    check_kernel(kernel)
    landmarks = np.asarray(landmarks, dtype=np.float64)
    x = _vec(x, "x")
    _same_dim(landmarks, x)
    if kernel == "linear":
        return np.broadcast_to(x, landmarks.shape).copy()
    return _chi2_grad_terms(landmarks, x)


def kernel_matrix(kernel: str, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """K[p, q] = k(A[p], B[q])."""
    check_kernel(kernel)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    _same_dim(A, B)
    if kernel == "linear":
        return A @ B.T
    out = np.empty((A.shape[0], B.shape[0]))
    step = max(1, _BLOCK_ELEMS // max(1, B.shape[0] * B.shape[1]))
    for s in range(0, A.shape[0], step):
        blk = A[s:s + step, None, :]
        out[s:s + step] = _chi2_terms(blk, B[None, :, :]).sum(axis=2)
    return out


def kernel_rows_and_gradient(kernel: str, landmarks: np.ndarray, x: np.ndarray):
    """Values and gradients of k(l_t, x) for every landmark row, in one pass."""
    if kernel == "linear":
        return landmarks @ x, np.broadcast_to(x, landmarks.shape)
    den = np.abs(landmarks) + np.abs(x)
    q = np.divide(np.broadcast_to(x, den.shape), den, out=np.zeros(den.shape), where=den > 0)
    return 2.0 * (landmarks * q).sum(axis=1), 2.0 * q * np.abs(q)
