import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlembed.errors import InputError, KExceedsGallery
from nlembed.evaluate import (
    RetrievalConfig,
    eval_pipeline,
    query_distances,
    rank_gallery,
    read_summary,
    retrieve,
    write_report,
)
from nlembed.model import LinearModel


def brute_force_mprec(E, labels, k):
    # per query: sort (distance, index) tuples, skip self, count hits in the top k
    per_class = {}
    for q in range(len(E)):
        order = sorted((float(np.sum((E[g] - E[q]) ** 2)), g) for g in range(len(E)) if g != q)
        hits = sum(labels[g] == labels[q] for _, g in order[:k])
        per_class.setdefault(labels[q], []).append(hits / k)
    return float(np.mean([np.mean(v) for v in per_class.values()]))


@pytest.mark.filterwarnings("ignore:.*fewer than K")
def test_hand_example():
    # points on a line: 0, 1, 2 in class 0 and 10, 11 in class 1
    E = np.array([[0.0], [1.0], [2.0], [10.0], [11.0]])
    labels = np.array([0, 0, 0, 1, 1])
    rep = retrieve(E, labels, RetrievalConfig((1, 2)))
    # K=1: every query's nearest neighbour shares its class
    assert rep.mprec[1] == 1.0
    # K=2: class 0 queries all score 1; class 1 queries get 1 hit of 2
    assert rep.per_class_precision[2] == {0: 1.0, 1: 0.5}
    assert rep.mprec[2] == 0.75
    assert rep.num_queries == 5


def test_ties_go_to_lower_index():
    E = np.array([[0.0], [1.0], [-1.0], [1.0]])
    np.testing.assert_array_equal(rank_gallery(E, 0, "l2_raw"), [1, 2, 3])


def test_raw_distances():
    E = np.array([[0.5, 0.5], [1.0, 0.0]])
    np.testing.assert_allclose(query_distances(E, 0, "l1_raw"), [0.0, 1.0])
    np.testing.assert_allclose(query_distances(E, 0, "l2_raw"), [0.0, 0.5])
    # (0.5)^2 / 1.5 + (0.5)^2 / 0.5
    np.testing.assert_allclose(query_distances(E, 0, "chi2_raw"), [0.0, 0.25 / 1.5 + 0.5])


def test_config_and_gallery_errors():
    with pytest.raises(InputError):
        RetrievalConfig((0,))
    with pytest.raises(InputError):
        RetrievalConfig((1, 1))
    with pytest.raises(InputError):
        RetrievalConfig(distance="cosine")
    assert RetrievalConfig((10, 1)).k_values == (1, 10)
    with pytest.raises(KExceedsGallery):
        retrieve(np.zeros((3, 2)), [0, 0, 1], RetrievalConfig((3,)))


def test_small_class_warns():
    E = np.arange(12, dtype=float)[:, None]
    with pytest.warns(UserWarning, match="fewer than K"):
        retrieve(E, [0] * 10 + [1] * 2, RetrievalConfig((3,)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_mprec_matches_brute_force_and_is_bounded(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(4, 25))
    E = rng.normal(size=(n, int(rng.integers(1, 4))))
    labels = rng.integers(0, 3, size=n)
    k = int(rng.integers(1, n))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = retrieve(E, labels, RetrievalConfig((k,), "l2_raw"))
    assert 0.0 <= rep.mprec[k] <= 1.0
    assert rep.mprec[k] == pytest.approx(brute_force_mprec(E, labels, k), abs=1e-12)


def test_reference_l2_equals_identity_model(rng):
    X = rng.random((30, 5))
    labels = rng.integers(0, 3, 30)
    cfg_raw = RetrievalConfig((1, 5), "l2_raw")
    cfg_emb = RetrievalConfig((1, 5), "l2_on_embedding")
    a = eval_pipeline(None, X, labels, cfg_raw)
    b = eval_pipeline(LinearModel(np.eye(5)), X, labels, cfg_emb)
    assert a.per_class_precision == b.per_class_precision


@pytest.mark.filterwarnings("ignore:.*fewer than K")
def test_report_files(tmp_path):
    E = np.array([[0.0], [1.0], [2.0], [10.0], [11.0]])
    rep = retrieve(E, [0, 0, 0, 1, 1], RetrievalConfig((1, 2)))
    per_class, summary = write_report(rep, tmp_path / "run")
    assert per_class.read_text().splitlines()[0] == "K,class,precision"
    assert read_summary(summary) == rep.mprec


def test_scalar_line_example():
    E = np.array([[0.0], [0.1], [1.0], [1.1]])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert retrieve(E, [0, 0, 1, 1], RetrievalConfig((1,))).mprec[1] == 1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gallery_permutation_leaves_mprec_unchanged(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 30))
    E = rng.normal(size=(n, 3))
    labels = rng.integers(0, 3, n)
    perm = rng.permutation(n)
    cfg = RetrievalConfig((1, 3), "l2_raw")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a = retrieve(E, labels, cfg)
        b = retrieve(E[perm], labels[perm], cfg)
    for k in cfg.k_values:
        assert a.mprec[k] == pytest.approx(b.mprec[k], abs=1e-12)


def test_nml_beats_pca_on_separable_blobs():
    from nlembed.data import generate_pairs, l2_normalize
    from nlembed.pca import fit_pca
    from nlembed.synth import synth_blobs, train_test_split
    from nlembed.train import TrainConfig, train_nml

    X, y = synth_blobs(3, 100, 32, seed=0)
    Xtr, ytr, Xte, yte = train_test_split(X, y, 0.5, seed=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pairs = generate_pairs(ytr, 500_000, seed=2)
    # full default training: 1,000,000 iterations, lr 0.01, b=0.1, m=0.02
    nml, _ = train_nml(Xtr, pairs, 8, "chi2", TrainConfig(seed=3))
    pca = fit_pca(l2_normalize(Xtr), 8)
    cfg = RetrievalConfig((10,))
    a = eval_pipeline(nml, Xte, yte, cfg).mprec[10]
    b = eval_pipeline(pca, l2_normalize(Xte), yte, cfg).mprec[10]
    assert a >= b, f"NML mprec@10 {a:.4f} below PCA {b:.4f}"
