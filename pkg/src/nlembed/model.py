"""Embedding models and their binary container.

Three families share one interface (``embed`` and ``dist2``):

* :class:`LinearModel` projects with a d x D matrix.
* :class:`NonlinearModel` maps x to the kernel values against d landmark
  vectors living in input space. Test cost is O(dD).
* :class:`KernelizedModel` expands every projection row over all N training
  vectors, so test cost is O(ND). Kept for small-N comparisons.

Container layout (little-endian): ``b"NLEM"``, version byte, kind byte
(0 linear, 1 nonlinear, 2 kernelized, 3 pca), u8-length-prefixed ASCII kernel
token, u64 d, u64 D, u64 N (kernelized only), f64 bias, f64 margin, then the
float64 row-major payload.
"""

from __future__ import annotations

import io
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .data import is_histogram_rows
from .errors import (
    BadMagic,
    CorruptPayload,
    DimensionMismatch,
    InputError,
    NlembedError,
    UnsupportedVersion,
)
from .kernel import check_kernel, kernel_matrix
from .pca import PcaModel

MAGIC = b"NLEM"
VERSION = 1
KIND_LINEAR, KIND_NONLINEAR, KIND_KERNELIZED, KIND_PCA = 0, 1, 2, 3

# histogram check used for warnings only
_HIST_TOL = 1e-6


def _frozen_matrix(a, name):
    arr = np.array(a, dtype=np.float64, order="C")
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_scalars(bias, margin):
    if not (np.isfinite(bias) and np.isfinite(margin)):
        raise InputError("bias and margin must be finite")
    if margin <= 0:
        raise InputError("margin must be positive")


def _inputs(X, D):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim not in (1, 2) or X.shape[-1] != D:
        raise DimensionMismatch(f"input has shape {X.shape}, model expects dimension {D}")
    return X


def _sqdist(a: np.ndarray, b: np.ndarray) -> float:
    diff = a - b
    return float(diff @ diff)


@dataclass(frozen=True, eq=False)
class LinearModel:
    projection: np.ndarray
    bias: float = 1.0
    margin: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "projection", _frozen_matrix(self.projection, "projection"))
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "margin", float(self.margin))
        _check_scalars(self.bias, self.margin)

    @property
    def d(self) -> int:
        return self.projection.shape[0]

    @property
    def D(self) -> int:
        return self.projection.shape[1]

    def embed(self, X) -> np.ndarray:
        return _inputs(X, self.D) @ self.projection.T

    def dist2(self, xi, xj) -> float:
        return _sqdist(self.embed(xi), self.embed(xj))


@dataclass(frozen=True, eq=False)
class NonlinearModel:
    landmarks: np.ndarray
    bias: float = 0.1
    margin: float = 0.02
    kernel: str = "chi2"

    def __post_init__(self):
        check_kernel(self.kernel)
        object.__setattr__(self, "landmarks", _frozen_matrix(self.landmarks, "landmarks"))
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "margin", float(self.margin))
        _check_scalars(self.bias, self.margin)

    @property
    def d(self) -> int:
        return self.landmarks.shape[0]

    @property
    def D(self) -> int:
        return self.landmarks.shape[1]

    def embed(self, X) -> np.ndarray:
        X = _inputs(X, self.D)
        if self.kernel == "chi2" and not is_histogram_rows(np.atleast_2d(X), _HIST_TOL):
            warnings.warn("chi2 embedding of inputs that are not l1-normalized histograms",
                          stacklevel=2)
        if X.ndim == 1:
            return kernel_matrix(self.kernel, self.landmarks, X[None, :])[:, 0]
        return kernel_matrix(self.kernel, X, self.landmarks)

    def dist2(self, xi, xj) -> float:
        return _sqdist(self.embed(xi), self.embed(xj))


@dataclass(frozen=True, eq=False)
class KernelizedModel:
    coefficients: np.ndarray
    anchors: np.ndarray
    bias: float = 0.1
    margin: float = 0.02
    kernel: str = "chi2"

    def __post_init__(self):
        check_kernel(self.kernel)
        coef = _frozen_matrix(self.coefficients, "coefficients")
        anchors = _frozen_matrix(np.asarray(self.anchors, dtype=np.float64), "anchors")
        if coef.shape[1] != anchors.shape[0]:
            raise DimensionMismatch(
                f"{coef.shape[1]} coefficient columns for {anchors.shape[0]} anchors")
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "bias", float(self.bias))
        object.__setattr__(self, "margin", float(self.margin))
        _check_scalars(self.bias, self.margin)

    @property
    def d(self) -> int:
        return self.coefficients.shape[0]

    @property
    def D(self) -> int:
        return self.anchors.shape[1]

    @property
    def N(self) -> int:
        return self.anchors.shape[0]

    def kernel_vectors(self, X) -> np.ndarray:
        """Rows are k_x = [k(anchor_1, x), ..., k(anchor_N, x)]."""
        X = np.atleast_2d(_inputs(X, self.D))
        return kernel_matrix(self.kernel, X, self.anchors)

    def embed(self, X) -> np.ndarray:
        X = _inputs(X, self.D)
        out = self.kernel_vectors(X) @ self.coefficients.T
        return out[0] if X.ndim == 1 else out

    def dist2(self, xi, xj) -> float:
        return _sqdist(self.embed(xi), self.embed(xj))


Model = Union[LinearModel, NonlinearModel, KernelizedModel, PcaModel]


def embed_nonlinear(model: NonlinearModel, x) -> np.ndarray:
    return model.embed(x)


def dist2_nonlinear(model: NonlinearModel, xi, xj) -> float:
    return model.dist2(xi, xj)


def dist2_linear(model: LinearModel, xi, xj) -> float:
    return model.dist2(xi, xj)


def embed_kernelized(model: KernelizedModel, x) -> np.ndarray:
    return model.embed(x)


def embed(model: Model, X) -> np.ndarray:
    """Embed a vector or the rows of a matrix with any model family."""
    return model.embed(X)


# ---------------------------------------------------------------- container

def _f64(arr) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def save_model(model: Model) -> bytes:
    """Serialize a model into the NLEM container."""
    if isinstance(model, LinearModel):
        kind, token, payload = KIND_LINEAR, "", [model.projection]
    elif isinstance(model, NonlinearModel):
        kind, token, payload = KIND_NONLINEAR, model.kernel, [model.landmarks]
    elif isinstance(model, KernelizedModel):
        kind, token, payload = KIND_KERNELIZED, model.kernel, [model.coefficients, model.anchors]
    elif isinstance(model, PcaModel):
        kind, token = KIND_PCA, ""
        payload = [model.components, model.mean, model.explained_variance]
    else:
        raise InputError(f"cannot serialize {type(model).__name__}")

    tok = token.encode("ascii")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<BBB", VERSION, kind, len(tok)))
    buf.write(tok)
    buf.write(struct.pack("<QQ", model.d, model.D))
    if kind == KIND_KERNELIZED:
        buf.write(struct.pack("<Q", model.N))
    bias = getattr(model, "bias", 0.0)
    margin = getattr(model, "margin", 0.0)
    buf.write(struct.pack("<dd", bias, margin))
    for arr in payload:
        buf.write(_f64(arr))
    return buf.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise CorruptPayload("model stream is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def matrix(self, rows: int, cols: int) -> np.ndarray:
        nbytes = rows * cols * 8
        return np.frombuffer(self.take(nbytes), dtype="<f8").astype(np.float64).reshape(rows, cols)


def load_model(data: bytes) -> Model:
    """Inverse of :func:`save_model`."""
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not an NLEM model stream")
    r = _Reader(data)
    r.take(4)
    version, kind, toklen = r.unpack("<BBB")
    if version != VERSION:
        raise UnsupportedVersion(f"model version {version} (supported: {VERSION})")
    try:
        token = bytes(r.take(toklen)).decode("ascii")
    except UnicodeDecodeError as exc:
        raise CorruptPayload("kernel token is not ASCII") from exc
    d, D = r.unpack("<QQ")
    N = r.unpack("<Q")[0] if kind == KIND_KERNELIZED else 0
    bias, margin = r.unpack("<dd")
    # guard against absurd sizes before allocating
    floats = {KIND_KERNELIZED: N * (d + D), KIND_PCA: d * D + D + d}.get(kind, d * D)
    if floats * 8 > len(data) - r.pos:
        raise CorruptPayload("model stream is truncated")
    try:
        if kind == KIND_LINEAR:
            model = LinearModel(r.matrix(d, D), bias, margin)
        elif kind == KIND_NONLINEAR:
            model = NonlinearModel(r.matrix(d, D), bias, margin, token)
        elif kind == KIND_KERNELIZED:
            coef = r.matrix(d, N)
            model = KernelizedModel(coef, r.matrix(N, D), bias, margin, token)
        elif kind == KIND_PCA:
            comps = r.matrix(d, D)
            mean = r.matrix(1, D)[0]
            var = r.matrix(1, d)[0]
            model = PcaModel(mean, comps, var)
        else:
            raise CorruptPayload(f"unknown model kind {kind}")
    except CorruptPayload:
        raise
    except NlembedError as exc:
        raise CorruptPayload(f"invalid model fields: {exc}") from exc
    if r.pos != len(data):
        raise CorruptPayload(f"{len(data) - r.pos} trailing bytes after model payload")
    return model


def save_model_file(model: Model, path) -> None:
    Path(path).write_bytes(save_model(model))


def load_model_file(path) -> Model:
    return load_model(Path(path).read_bytes())


def models_equal(a: Model, b: Model) -> bool:
    """Field-by-field bit equality."""
    if type(a) is not type(b):
        return False
    return save_model(a) == save_model(b)
