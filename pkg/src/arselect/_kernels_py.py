"""Pure numpy implementation of the nested least-squares kernels.

Both functions operate on a batch of paths at once. ``_kernels.pyx`` provides a
compiled version with the same signatures; :mod:`arselect._backend` picks one.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def lagged_gram(X, K):
    """Augmented lagged Gram matrices over the window ``t = K..n-1``.

    Row/column 0 is the target ``x_{t+1}``; index ``i >= 1`` is ``x_{t+1-i}``.
    Entries are divided by ``N = n - K``. Only the first row is summed
    directly; the rest follows from shifting the window one step per diagonal.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    B, n = X.shape
    N = n - K
    S = np.empty((B, K + 1, K + 1))
    # cols[:, j] = x_{t+1-j} over the window, i.e. X[:, K-j : n-j]
    cols = sliding_window_view(X, N, axis=1)[:, ::-1]
    S[:, 0, :] = np.einsum("bn,bjn->bj", cols[:, 0], cols, optimize=False)
    S[:, :, 0] = S[:, 0, :]
    for i in range(K):
        # S[i+1, j+1] = S[i, j] + X[K-1-i] X[K-1-j] - X[n-1-i] X[n-1-j]
        j = np.arange(i, K)
        head = X[:, K - 1 - i][:, None] * X[:, K - 1 - j]
        tail = X[:, n - 1 - i][:, None] * X[:, n - 1 - j]
        S[:, i + 1, j + 1] = S[:, i, j] + head - tail
        S[:, j + 1, i + 1] = S[:, i + 1, j + 1]
    S /= N
    return S


def nested_fit(S, rel_tol=1e-12):
    """All nested least-squares fits from augmented Gram matrices.

    Returns ``(sigma2, coef, status)``: ``sigma2[b, k-1]`` is the order-k
    residual mean square, ``coef[b, k-1, :k]`` the order-k coefficients in
    the ``x_{t+1} + sum a_i x_{t+1-i}`` convention, and ``status[b]`` is 0 or
    the first order whose Cholesky pivot fell below ``rel_tol * G[0, 0]``.
    """
    S = np.asarray(S, dtype=np.float64)
    B, K1, _ = S.shape
    K = K1 - 1
    G = S[:, 1:, 1:]
    bvec = S[:, 0, 1:]
    c0 = S[:, 0, 0]
    floor = rel_tol * G[:, 0, 0]
    L = np.zeros((B, K, K))
    status = np.zeros(B, dtype=np.int32)
    for j in range(K):
        piv = G[:, j, j] - np.einsum("bk,bk->b", L[:, j, :j], L[:, j, :j])
        bad = (piv <= floor) & (status == 0)
        status[bad] = j + 1
        piv = np.where(status == 0, piv, 1.0)
        d = np.sqrt(piv)
        L[:, j, j] = d
        if j + 1 < K:
            L[:, j + 1 :, j] = (
                G[:, j + 1 :, j] - np.einsum("bik,bk->bi", L[:, j + 1 :, :j], L[:, j, :j])
            ) / d[:, None]
    # w = L^{-1} b and Linv by forward substitution
    w = np.zeros((B, K))
    Linv = np.zeros((B, K, K))
    for j in range(K):
        w[:, j] = (bvec[:, j] - np.einsum("bk,bk->b", L[:, j, :j], w[:, :j])) / L[:, j, j]
        Linv[:, j, j] = 1.0 / L[:, j, j]
        if j:
            Linv[:, j, :j] = -np.einsum("bk,bki->bi", L[:, j, :j], Linv[:, :j, :j]) / L[:, j, j][:, None]
    sigma2 = c0[:, None] - np.cumsum(w * w, axis=1)
    # a(k)_i = -sum_{j=i}^{k} Linv[j, i] w_j
    coef = -np.cumsum(Linv * w[:, :, None], axis=1)
    for b in np.flatnonzero(status):
        k = status[b]
        sigma2[b, k - 1 :] = np.nan
        coef[b, k - 1 :] = np.nan
    return sigma2, coef, status
