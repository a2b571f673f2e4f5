"""Leave-one-out category retrieval and mean precision@K."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import as_array, as_labels
from .errors import InputError, KExceedsGallery

DISTANCES = ("l2_on_embedding", "l1_raw", "l2_raw", "chi2_raw")
DEFAULT_K = (1, 10, 20, 30)


@dataclass(frozen=True)
class RetrievalConfig:
    k_values: tuple[int, ...] = DEFAULT_K
    distance: str = "l2_on_embedding"

    def __post_init__(self):
        ks = tuple(sorted(int(k) for k in self.k_values))
        if not ks or ks[0] < 1 or len(set(ks)) != len(ks):
            raise InputError(f"k_values must be distinct positive integers, got {self.k_values}")
        if self.distance not in DISTANCES:
            raise InputError(f"unknown distance {self.distance!r}")
        object.__setattr__(self, "k_values", ks)


@dataclass
class EvalReport:
    # K -> class -> precision@K
    per_class_precision: dict[int, dict[int, float]] = field(default_factory=dict)
    mprec: dict[int, float] = field(default_factory=dict)
    num_queries: int = 0


def query_distances(E: np.ndarray, q: int, distance: str) -> np.ndarray:
    """Distances from row q to every row of E (including itself)."""
    diff = E - E[q]
    if distance in ("l2_on_embedding", "l2_raw"):
        return np.einsum("ij,ij->i", diff, diff)
    if distance == "l1_raw":
        return np.abs(diff).sum(axis=1)
    if distance == "chi2_raw":
        den = np.abs(E) + np.abs(E[q])
        return np.divide(diff * diff, den, out=np.zeros(den.shape), where=den > 0).sum(axis=1)
    raise InputError(f"unknown distance {distance!r}")


def rank_gallery(E: np.ndarray, q: int, distance: str) -> np.ndarray:
    """Indices of all rows except q, nearest first; ties go to the lower index."""
    dist = query_distances(E, q, distance)
    order = np.argsort(dist, kind="stable")
    return order[order != q]


def retrieve(embedded, labels, cfg: RetrievalConfig | None = None) -> EvalReport:
    """Use every row as a query against all other rows and score precision@K.

    Per-class precision is the mean over that class's queries, and mprec@K is
    the unweighted mean over classes.
    """
    cfg = cfg or RetrievalConfig()
    E = as_array(embedded)
    N = E.shape[0]
    labels = as_labels(labels, N)
    if N < 2:
        raise InputError("retrieval needs at least two rows")
    kmax = cfg.k_values[-1]
    if kmax > N - 1:
        raise KExceedsGallery(f"K={kmax} exceeds gallery size {N - 1}")

    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < kmax + 1]
    if small.size:
        warnings.warn(f"{small.size} class(es) have fewer than K+1={kmax + 1} members; "
                      "their precision@K is capped below 1", stacklevel=2)

    ks = np.asarray(cfg.k_values)
    hits = np.empty((N, ks.size))
    for q in range(N):
        top = rank_gallery(E, q, cfg.distance)[:kmax]
        cum = np.cumsum(labels[top] == labels[q])
        hits[q] = cum[ks - 1] / ks

    report = EvalReport(num_queries=N)
    for col, k in enumerate(cfg.k_values):
        per_class = {int(c): float(hits[labels == c, col].mean()) for c in classes}
        report.per_class_precision[k] = per_class
        report.mprec[k] = float(np.mean(list(per_class.values())))
    return report


def eval_pipeline(model, features, labels, cfg: RetrievalConfig | None = None) -> EvalReport:
    """Embed every row with `model` (None means no projection) and run retrieval.

    Features must already carry whatever normalization the model expects.
    """
    X = as_array(features)
    E = X if model is None else model.embed(X)
    return retrieve(E, labels, cfg)


def write_report(report: EvalReport, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>_per_class.csv`` (K, class, precision) and
    ``<prefix>_summary.csv`` (K, mprec)."""
    prefix = str(prefix)
    per_class = Path(prefix + "_per_class.csv")
    summary = Path(prefix + "_summary.csv")
    with per_class.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "class", "precision"])
        for k, row in report.per_class_precision.items():
            for c, p in sorted(row.items()):
                w.writerow([k, c, repr(p)])
    with summary.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["K", "mprec"])
        for k, v in report.mprec.items():
            w.writerow([k, repr(v)])
    return per_class, summary


def read_summary(path) -> dict[int, float]:
    with Path(path).open() as fh:
        return {int(r["K"]): float(r["mprec"]) for r in csv.DictReader(fh)}
