"""The compiled and numpy kernels must agree on every input."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arselect import _backend, _kernels_py

compiled = pytest.importorskip("arselect._kernels")


def _naive_gram(x, K):
    n = x.size
    N = n - K
    S = np.empty((K + 1, K + 1))
    for i in range(K + 1):
        for j in range(K + 1):
            S[i, j] = sum(x[t + 1 - i] * x[t + 1 - j] for t in range(K - 1, n - 1)) / N
    return S


def test_backend_prefers_compiled():
    assert _backend.BACKEND == "cython"


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(2, 40), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_gram_backends_agree(K, extra, B, seed):
    n = K + extra
    X = np.random.default_rng(seed).standard_normal((B, n))
    a = _kernels_py.lagged_gram(X, K)
    b = compiled.lagged_gram(X, K)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a[0], _naive_gram(X[0], K), rtol=1e-10, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 15), st.integers(0, 2**32 - 1))
def test_fit_backends_agree(K, seed):
    X = np.random.default_rng(seed).standard_normal((3, 4 * K + 20))
    S = compiled.lagged_gram(X, K)
    for r1, r2 in zip(_kernels_py.nested_fit(S), compiled.nested_fit(S)):
        np.testing.assert_allclose(r1, r2, rtol=1e-10, atol=1e-12)


def test_degenerate_rows_agree():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 50))
    X[1] = 1.0  # singular at order 2
    X[3, :] = np.tile([1.0, -1.0], 25)  # singular at order 2 as well
    S = compiled.lagged_gram(X, 6)
    s1, c1, st1 = _kernels_py.nested_fit(S)
    s2, c2, st2 = compiled.nested_fit(S)
    assert st1.tolist() == st2.tolist() == [0, 2, 0, 2]
    np.testing.assert_array_equal(np.isnan(s1), np.isnan(s2))
    np.testing.assert_array_equal(np.isnan(c1), np.isnan(c2))
    np.testing.assert_allclose(s1[~np.isnan(s1)], s2[~np.isnan(s2)], rtol=1e-12)
    assert not np.isnan(s2[1, 0])
