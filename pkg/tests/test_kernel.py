import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlembed.errors import DimensionMismatch, InputError
from nlembed.kernel import (
    kernel_gradient,
    kernel_matrix,
    kernel_rows,
    kernel_rows_and_gradient,
    kernel_rows_gradient,
    kernel_value,
)

from .conftest import random_histograms


def chi2_loop(a, x):
    # plain-Python reference
    total = 0.0
    for ac, xc in zip(a, x):
        den = abs(ac) + abs(xc)
        if den > 0:
            total += 2.0 * ac * xc / den
    return total


def hist(n):
    return arrays(np.float64, n, elements=st.floats(0.0, 1.0)).filter(
        lambda v: v.sum() > 1e-3).map(lambda v: v / v.sum())


def signed(n):
    return arrays(np.float64, n, elements=st.floats(-1.0, 1.0))


def test_chi2_examples():
    assert kernel_value("chi2", [0.5, 0.5], [0.5, 0.5]) == pytest.approx(1.0)
    assert kernel_value("chi2", [1.0, 0.0], [0.0, 1.0]) == 0.0
    assert kernel_value("chi2", [0.0, 0.0], [0.0, 0.0]) == 0.0
    # 2 * 0.25 * 0.75 / 1.0 + 2 * 0.75 * 0.25 / 1.0
    assert kernel_value("chi2", [0.25, 0.75], [0.75, 0.25]) == pytest.approx(0.75)


def test_gradient_example():
    # d/da of 2 a x / (a + x) at a = x = 0.5 is 2 x^2 / (2x)^2 = 0.5
    np.testing.assert_allclose(kernel_gradient("chi2", [0.5], [0.5]), [0.5])
    np.testing.assert_array_equal(kernel_gradient("chi2", [0.0], [0.0]), [0.0])
    np.testing.assert_array_equal(kernel_gradient("linear", [1.0, 2.0], [3.0, 4.0]), [3.0, 4.0])


def test_errors():
    with pytest.raises(InputError):
        kernel_value("rbf", [1.0], [1.0])
    with pytest.raises(DimensionMismatch):
        kernel_value("chi2", [1.0, 0.0], [1.0])
    with pytest.raises(DimensionMismatch):
        kernel_rows("chi2", np.ones((2, 3)), np.ones(4))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 12).flatmap(lambda n: st.tuples(signed(n), signed(n))))
def test_chi2_matches_loop_and_is_symmetric(ax):
    a, x = ax
    v = kernel_value("chi2", a, x)
    assert v == pytest.approx(chi2_loop(a, x), abs=1e-12)
    assert v == kernel_value("chi2", x, a)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 16).flatmap(lambda n: st.tuples(hist(n), hist(n))))
def test_chi2_bounds_on_histograms(ab):
    a, x = ab
    v = kernel_value("chi2", a, x)
    assert -1e-12 <= v <= 1.0 + 1e-12
    assert kernel_value("chi2", a, a) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gradient_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(1e-2, 1.0, 6) * rng.choice([-1, 1], 6)
    x = rng.uniform(1e-2, 1.0, 6)
    h = 1e-6
    num = np.empty(6)
    for c in range(6):
        e = np.zeros(6)
        e[c] = h
        num[c] = (chi2_loop(a + e, x) - chi2_loop(a - e, x)) / (2 * h)
    np.testing.assert_allclose(kernel_gradient("chi2", a, x), num, rtol=1e-6, atol=1e-9)


def test_gradient_does_not_underflow():
    g = kernel_gradient("chi2", [1e-200], [1e-200])
    assert g[0] == pytest.approx(0.5)


def test_rows_matrix_and_fused_agree(rng):
    L = rng.uniform(-0.5, 0.5, (5, 9))
    L[0, :3] = 0.0
    X = random_histograms(rng, 7, 9)
    X[0, :3] = 0.0
    K = kernel_matrix("chi2", X, L)
    for n, x in enumerate(X):
        rows = kernel_rows("chi2", L, x)
        np.testing.assert_allclose(rows, [chi2_loop(l, x) for l in L], atol=1e-12)
        np.testing.assert_allclose(K[n], rows, atol=1e-12)
        k, g = kernel_rows_and_gradient("chi2", L, x)
        np.testing.assert_allclose(k, rows, atol=1e-12)
        np.testing.assert_allclose(g, kernel_rows_gradient("chi2", L, x), atol=1e-12)
        for t in range(L.shape[0]):
            np.testing.assert_allclose(g[t], kernel_gradient("chi2", L[t], x), atol=1e-12)


def test_linear_rows_and_matrix(rng):
    L = rng.normal(size=(3, 4))
    X = rng.normal(size=(5, 4))
    np.testing.assert_allclose(kernel_matrix("linear", X, L), X @ L.T)
    k, g = kernel_rows_and_gradient("linear", L, X[0])
    np.testing.assert_allclose(k, L @ X[0])
    np.testing.assert_allclose(g, np.tile(X[0], (3, 1)))


def test_kernel_matrix_blocks_match_unblocked(rng, monkeypatch):
    import nlembed.kernel as kmod

    A = random_histograms(rng, 30, 5)
    B = random_histograms(rng, 11, 5)
    full = kernel_matrix("chi2", A, B)
    monkeypatch.setattr(kmod, "_BLOCK_ELEMS", 60)
    np.testing.assert_array_equal(kernel_matrix("chi2", A, B), full)


def test_value_and_gradient_examples():
    # 2 * 0.5 * 1 / 1.5 + 0
    assert kernel_value("chi2", [0.5, 0.5], [1.0, 0.0]) == pytest.approx(2 / 3)
    # 2 * 1 * 1 / 1.5^2 and 0 where x_c = 0
    np.testing.assert_allclose(kernel_gradient("chi2", [0.5, 0.5], [1.0, 0.0]), [2 / 2.25, 0.0])
    # at a_c = 0 with x_c != 0 the subgradient is 2 sign(x_c)
    np.testing.assert_allclose(kernel_gradient("chi2", [0.0, 0.0], [0.3, -0.2]), [2.0, -2.0])
