"""Hinge objective, subgradients and SGD trainers.

Every trainer follows the same loop: draw the initial parameters uniformly
from ``[init_low, init_high)``, then for each iteration sample one pair
uniformly (with replacement) from the pair set, compute its squared distance
and, if ``y * (b - dist2) < m``, take a step against the pair's subgradient.
The factor 2 of the squared-distance derivative is folded into the learning
rate, for all three families alike.

Random draws come from ``numpy.random.default_rng(cfg.seed)`` in a fixed
order (initialization first, then pair indices in blocks), so a run is a
pure function of its inputs and config.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .data import as_array, is_histogram_rows
from .errors import (
    DimensionMismatch,
    EmptyPairSet,
    InputError,
    NotL1Normalized,
    NumericError,
    TooManyAnchors,
)
from .kernel import check_kernel, kernel_matrix, kernel_rows_and_gradient, kernel_value
from .model import KernelizedModel, LinearModel, NonlinearModel

log = logging.getLogger(__name__)

NML_DEFAULTS = {"bias": 0.1, "margin": 0.02}
LINEAR_DEFAULTS = {"bias": 1.0, "margin": 0.2}
MAX_ANCHORS = 20_000
MONITOR_PAIRS = 10_000
_PAIR_BLOCK = 1 << 16


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings. ``bias``/``margin`` left as None take the family default."""

    iterations: int = 1_000_000
    learning_rate: float = 0.01
    margin: float | None = None
    bias: float | None = None
    update_bias: bool = False
    seed: int = 0
    init_low: float = -0.5
    init_high: float = 0.5
    eval_every: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise InputError("iterations must be non-negative")
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be positive")
        if not self.init_low < self.init_high:
            raise InputError("init_low must be below init_high")
        if self.margin is not None and not self.margin > 0:
            raise InputError("margin must be positive")
        if self.eval_every < 0:
            raise InputError("eval_every must be non-negative")

    def resolved(self, defaults: dict) -> "TrainConfig":
        return replace(
            self,
            bias=defaults["bias"] if self.bias is None else float(self.bias),
            margin=defaults["margin"] if self.margin is None else float(self.margin),
        )


@dataclass
class TrainReport:
    final_objective_estimate: float = 0.0
    objective_trace: list[tuple[int, float]] = field(default_factory=list)
    active_fraction: float = 0.0
    iterations: int = 0


def hinge_loss(y: int, b: float, m: float, dist2: float) -> float:
    """max(0, m - y (b - dist2))."""
    return max(0.0, m - y * (b - dist2))


def hinge_losses(y: np.ndarray, b: float, m: float, dist2: np.ndarray) -> np.ndarray:
    return np.maximum(0.0, m - y * (b - dist2))


def objective(model, features, pairs) -> float:
    """Average hinge loss of `model` over `pairs` (0 for an empty set)."""
    if len(pairs) == 0:
        return 0.0
    X = as_array(features)
    used = np.unique(np.concatenate((pairs.i, pairs.j)))
    pos = np.searchsorted(used, pairs.i), np.searchsorted(used, pairs.j)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        E = model.embed(X[used])
    diff = E[pos[0]] - E[pos[1]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    return float(hinge_losses(pairs.y, model.bias, model.margin, d2).mean())


# ------------------------------------------------------------ subgradients

def nml_pair_subgradient(model: NonlinearModel, xi, xj, y: int):
    """Subgradient of one pair's hinge loss w.r.t. the landmarks and the bias.

    Returns ``(G, g_b)`` with G of shape (d, D). Both are exactly zero when
    the pair already satisfies the margin.
    """
    xi = np.asarray(xi, dtype=np.float64)
    xj = np.asarray(xj, dtype=np.float64)
    L = model.landmarks
    if xi.shape != (model.D,) or xj.shape != (model.D,):
        raise DimensionMismatch(f"expected vectors of dimension {model.D}")
    ki, gi = kernel_rows_and_gradient(model.kernel, L, xi)
    kj, gj = kernel_rows_and_gradient(model.kernel, L, xj)
    diff = ki - kj
    d2 = float(diff @ diff)
    if y * (model.bias - d2) >= model.margin:
        return np.zeros_like(L), 0.0
    return 2.0 * y * diff[:, None] * (gi - gj), float(-y)


def linear_pair_subgradient(model: LinearModel, xi, xj, y: int):
    """Same as :func:`nml_pair_subgradient` for a linear projection: 2 y (L d) d^T."""
    delta = np.asarray(xi, dtype=np.float64) - np.asarray(xj, dtype=np.float64)
    e = model.projection @ delta
    if y * (model.bias - float(e @ e)) >= model.margin:
        return np.zeros_like(model.projection), 0.0
    return 2.0 * y * np.outer(e, delta), float(-y)


def kml_pair_subgradient(model: KernelizedModel, ki, kj, y: int):
    """Subgradient w.r.t. the coefficient matrix, given kernel vectors k_i, k_j."""
    dk = np.asarray(ki, dtype=np.float64) - np.asarray(kj, dtype=np.float64)
    e = model.coefficients @ dk
    if y * (model.bias - float(e @ e)) >= model.margin:
        return np.zeros_like(model.coefficients), 0.0
    return 2.0 * y * np.outer(e, dk), float(-y)


# ---------------------------------------------------------------- trainers

def _check_pairs(pairs, n):
    if len(pairs) == 0:
        raise EmptyPairSet("no pairs to train on")
    pairs.check_bounds(n)


def _pair_stream(rng: np.random.Generator, n_pairs: int, iterations: int):
    """Yield pair indices, drawn in fixed-size blocks."""
    left = iterations
    while left > 0:
        k = min(left, _PAIR_BLOCK)
        yield from rng.integers(0, n_pairs, size=k).tolist()
        left -= k


def _monitor_subset(pairs, seed):
    if len(pairs) <= MONITOR_PAIRS:
        return pairs
    idx = np.random.default_rng([seed, 1]).choice(len(pairs), MONITOR_PAIRS, replace=False)
    return pairs.subset(np.sort(idx))


def _monitor(monitor, X, pairs, cfg):
    if not cfg.eval_every:
        return None
    return monitor or (X, _monitor_subset(pairs, cfg.seed))


def _finish(report, loss_sum, active, iterations):
    report.iterations = iterations
    if iterations:
        report.final_objective_estimate = loss_sum / iterations
        report.active_fraction = active / iterations
    return report


def _guard(P, what):
    if not np.all(np.isfinite(P)):
        raise NumericError(f"non-finite values in {what}; lower the learning rate")


@np.errstate(over="ignore", invalid="ignore")
def train_nml(features, pairs, d: int, kernel: str = "chi2", cfg: TrainConfig | None = None,
              monitor=None):
    """Learn d landmarks by SGD on the pairwise hinge loss.

    `features` must hold l1-normalized histogram rows when ``kernel="chi2"``.
    `monitor` is an optional ``(features, pairs)`` tuple scored at every
    ``cfg.eval_every`` iterations; by default up to 10,000 training pairs.

    Returns ``(NonlinearModel, TrainReport)``.
    """
    check_kernel(kernel)
    cfg = (cfg or TrainConfig()).resolved(NML_DEFAULTS)
    X = as_array(features)
    N, D = X.shape
    if d < 1:
        raise InputError("d must be at least 1")
    if not is_histogram_rows(X):
        if kernel == "chi2":
            raise NotL1Normalized("chi2 training needs l1-normalized non-negative rows")
        # stacklevel 3 skips the errstate wrapper
        warnings.warn("training on rows that are not l1-normalized histograms", stacklevel=3)
    _check_pairs(pairs, N)

    rng = np.random.default_rng(cfg.seed)
    L = rng.uniform(cfg.init_low, cfg.init_high, size=(d, D))
    b, m, r = cfg.bias, cfg.margin, cfg.learning_rate
    mon = _monitor(monitor, X, pairs, cfg)
    I, J, Y = pairs.i.tolist(), pairs.j.tolist(), pairs.y.tolist()
    absX = np.abs(X)

    report = TrainReport()
    loss_sum, active = 0.0, 0
    for it, p in enumerate(_pair_stream(rng, len(pairs), cfg.iterations), start=1):
        y, i, j = Y[p], I[p], J[p]
        if kernel == "chi2":
            # inlined kernel_rows_and_gradient; an infinite denominator zeroes 0/0 terms
            aL = np.abs(L)
            den = aL + absX[i]
            den[den == 0] = np.inf
            qi = X[i] / den
            den = aL + absX[j]
            den[den == 0] = np.inf
            qj = X[j] / den
            diff = 2.0 * ((L * qi).sum(axis=1) - (L * qj).sum(axis=1))
        else:
            diff = L @ X[i] - L @ X[j]
        slack = y * (b - float(diff @ diff))
        if slack < m:
            loss_sum += m - slack
            active += 1
            if kernel == "chi2":
                dgrad = 2.0 * (qi * np.abs(qi) - qj * np.abs(qj))
            else:
                dgrad = X[i] - X[j]
            L -= (r * y) * diff[:, None] * dgrad
            if cfg.update_bias:
                b += r * y
        if cfg.eval_every and it % cfg.eval_every == 0:
            _guard(L, "landmarks")
            snap = NonlinearModel(L, b, m, kernel)
            report.objective_trace.append((it, objective(snap, *mon)))
            log.info("iter %d objective %.6g", it, report.objective_trace[-1][1])
    _guard(L, "landmarks")
    if not np.isfinite(b):
        raise NumericError("bias diverged")
    return NonlinearModel(L, b, m, kernel), _finish(report, loss_sum, active, cfg.iterations)


@np.errstate(over="ignore", invalid="ignore")
def train_linear(features, pairs, d: int, cfg: TrainConfig | None = None, monitor=None):
    """Linear projection learned with the same SGD loop; returns ``(LinearModel, TrainReport)``."""
    cfg = (cfg or TrainConfig()).resolved(LINEAR_DEFAULTS)
    X = as_array(features)
    N, D = X.shape
    if d < 1:
        raise InputError("d must be at least 1")
    _check_pairs(pairs, N)

    rng = np.random.default_rng(cfg.seed)
    L = rng.uniform(cfg.init_low, cfg.init_high, size=(d, D))
    b, m, r = cfg.bias, cfg.margin, cfg.learning_rate
    mon = _monitor(monitor, X, pairs, cfg)
    I, J, Y = pairs.i.tolist(), pairs.j.tolist(), pairs.y.tolist()

    report = TrainReport()
    loss_sum, active = 0.0, 0
    for it, p in enumerate(_pair_stream(rng, len(pairs), cfg.iterations), start=1):
        y = Y[p]
        delta = X[I[p]] - X[J[p]]
        e = L @ delta
        slack = y * (b - float(e @ e))
        if slack < m:
            loss_sum += m - slack
            active += 1
            L -= (r * y) * e[:, None] * delta
            if cfg.update_bias:
                b += r * y
        if cfg.eval_every and it % cfg.eval_every == 0:
            _guard(L, "projection")
            report.objective_trace.append((it, objective(LinearModel(L, b, m), *mon)))
    _guard(L, "projection")
    if not np.isfinite(b):
        raise NumericError("bias diverged")
    return LinearModel(L, b, m), _finish(report, loss_sum, active, cfg.iterations)


@np.errstate(over="ignore", invalid="ignore")
def train_kml(features, pairs, d: int, kernel: str = "chi2", cfg: TrainConfig | None = None,
              monitor=None):
    """Exact kernelized metric learning over all N training rows as anchors.

    The N x N kernel matrix is precomputed, so N is capped at 20,000. The
    coefficient matrix starts uniform in ``[init_low, init_high) / N``.
    """
    check_kernel(kernel)
    cfg = (cfg or TrainConfig()).resolved(NML_DEFAULTS)
    X = as_array(features)
    N, D = X.shape
    if N > MAX_ANCHORS:
        raise TooManyAnchors(f"{N} anchors exceeds the limit of {MAX_ANCHORS}")
    if d < 1:
        raise InputError("d must be at least 1")
    _check_pairs(pairs, N)

    rng = np.random.default_rng(cfg.seed)
    A = rng.uniform(cfg.init_low, cfg.init_high, size=(d, N)) / N
    b, m, r = cfg.bias, cfg.margin, cfg.learning_rate
    K = kernel_matrix(kernel, X, X)
    mon = _monitor(monitor, X, pairs, cfg)
    I, J, Y = pairs.i.tolist(), pairs.j.tolist(), pairs.y.tolist()

    report = TrainReport()
    loss_sum, active = 0.0, 0
    for it, p in enumerate(_pair_stream(rng, len(pairs), cfg.iterations), start=1):
        y = Y[p]
        dk = K[I[p]] - K[J[p]]
        e = A @ dk
        slack = y * (b - float(e @ e))
        if slack < m:
            loss_sum += m - slack
            active += 1
            A -= (r * y) * e[:, None] * dk
            if cfg.update_bias:
                b += r * y
        if cfg.eval_every and it % cfg.eval_every == 0:
            _guard(A, "coefficients")
            snap = KernelizedModel(A, X, b, m, kernel)
            report.objective_trace.append((it, objective(snap, *mon)))
    _guard(A, "coefficients")
    if not np.isfinite(b):
        raise NumericError("bias diverged")
    return KernelizedModel(A, X, b, m, kernel), _finish(report, loss_sum, active, cfg.iterations)


# ------------------------------------------------------------ gradient check

@dataclass
class GradCheckReport:
    kernel: str
    trials: int
    max_rel_error: float
    errors: list[float]

    def passed(self, threshold: float) -> bool:
        return self.max_rel_error < threshold


GRADCHECK_THRESHOLDS = {"chi2": 1e-4, "linear": 1e-6}


def _pair_loss(L, xi, xj, y, b, m, kernel):
    # scalar kernel calls keep this independent of the batched training path
    d2 = 0.0
    for lt in L:
        d2 += (kernel_value(kernel, lt, xi) - kernel_value(kernel, lt, xj)) ** 2
    return max(0.0, m - y * (b - d2))


def numeric_landmark_gradient(L, xi, xj, y, b, m, kernel, step=1e-6):
    """Central differences of one pair's hinge loss w.r.t. every landmark entry."""
    L = np.array(L, dtype=np.float64)
    G = np.empty_like(L)
    for t in range(L.shape[0]):
        for c in range(L.shape[1]):
            orig = L[t, c]
            L[t, c] = orig + step
            up = _pair_loss(L, xi, xj, y, b, m, kernel)
            L[t, c] = orig - step
            down = _pair_loss(L, xi, xj, y, b, m, kernel)
            L[t, c] = orig
            G[t, c] = (up - down) / (2 * step)
    return G


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def _sample_away_from_zero(rng, shape, low, high, floor):
    v = rng.uniform(low, high, size=shape)
    bad = np.abs(v) <= floor
    while bad.any():
        v[bad] = rng.uniform(low, high, size=int(bad.sum()))
        bad = np.abs(v) <= floor
    return v


def grad_check(kernel: str = "chi2", d: int = 4, D: int = 16, trials: int = 100,
               seed: int = 0, step: float = 1e-6, bias: float = 0.1,
               margin: float = 0.02) -> GradCheckReport:
    """Compare analytic pair subgradients with central differences.

    Each trial draws landmarks with every |entry| > 1e-3 and two histograms
    with every coordinate > 1e-3, picks the label that makes the pair active,
    and redraws if the pair sits within 1e-3 of the hinge kink.
    """
    check_kernel(kernel)
    if trials < 1:
        raise InputError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    errors = []
    while len(errors) < trials:
        L = _sample_away_from_zero(rng, (d, D), -0.5, 0.5, 1e-3)
        xi = rng.uniform(1e-3, 1.0, D)
        xj = rng.uniform(1e-3, 1.0, D)
        xi, xj = xi / xi.sum(), xj / xj.sum()
        model = NonlinearModel(L, bias, margin, kernel)
        d2 = model.dist2(xi, xj)
        y = 1 if bias - d2 < margin else -1
        if abs(y * (bias - d2) - margin) <= 1e-3:
            continue
        G, _ = nml_pair_subgradient(model, xi, xj, y)
        Gn = numeric_landmark_gradient(L, xi, xj, y, bias, margin, kernel, step)
        errors.append(relative_error(G, Gn))
    return GradCheckReport(kernel, trials, max(errors), errors)
