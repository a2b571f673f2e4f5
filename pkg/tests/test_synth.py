import numpy as np
import pytest

from nlembed.data import is_histogram_rows
from nlembed.errors import InputError
from nlembed.synth import synth_blobs, synth_nonlinear, train_test_split


def test_blobs_shapes_and_histograms():
    X, y = synth_blobs(3, 10, 9, seed=1)
    assert X.shape == (30, 9) and X.norm_state == "l1"
    assert is_histogram_rows(X.values)
    np.testing.assert_array_equal(np.bincount(y), [10, 10, 10])


def test_blobs_noise_free_rows_are_prototypes():
    X, y = synth_blobs(2, 3, 4, separation=np.inf, noise=0.0)
    np.testing.assert_allclose(X.values[0], [0.5, 0.0, 0.5, 0.0])
    np.testing.assert_allclose(X.values[3], [0.0, 0.5, 0.0, 0.5])


def test_nonlinear_classes_share_coordinate_moments():
    # before normalization both laws have mean 1 and variance 1 per coordinate
    X, y = synth_nonlinear(per_class=4000, dims=8, seed=0)
    means = [X.values[y == c].mean() for c in (0, 1)]
    assert means[0] == pytest.approx(1 / 8, rel=1e-9)
    assert means[1] == pytest.approx(1 / 8, rel=1e-9)
    assert is_histogram_rows(X.values)
    # the difference is in how many coordinates sit near zero
    assert (X.values[y == 0] == 0).mean() == pytest.approx(0.5, abs=0.02)
    assert (X.values[y == 1] == 0).mean() == 0.0


def test_generators_are_seeded():
    a, _ = synth_nonlinear(seed=3)
    b, _ = synth_nonlinear(seed=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_generator_errors():
    with pytest.raises(InputError):
        synth_blobs(1, 10, 4)
    with pytest.raises(InputError):
        synth_nonlinear(classes=3)


def test_split_is_stratified_and_disjoint():
    X, y = synth_blobs(3, 10, 6, seed=0)
    Xtr, ytr, Xte, yte = train_test_split(X, y, 0.3, seed=2)
    np.testing.assert_array_equal(np.bincount(yte), [3, 3, 3])
    np.testing.assert_array_equal(np.bincount(ytr), [7, 7, 7])
    rows = {tuple(r) for r in Xtr.values} | {tuple(r) for r in Xte.values}
    assert len(rows) == 30


def test_nonlinear_classes_defeat_a_linear_classifier():
    from sklearn.linear_model import LogisticRegression

    X, y = synth_nonlinear(per_class=400, dims=16, seed=0)
    Xt, yt = synth_nonlinear(per_class=400, dims=16, seed=1)
    clf = LogisticRegression(max_iter=2000).fit(X.values, y)
    assert clf.score(Xt.values, yt) < 0.8
