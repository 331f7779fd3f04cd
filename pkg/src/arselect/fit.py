"""Nested least-squares AR fits over a common window and exact identities.

Every order ``k = 1..K_n`` regresses ``x_{t+1}`` on ``x_t..x_{t+1-k}`` for the
same ``t = K_n..n-1`` (1-based), so all fits are leading blocks of one Gram
matrix and a single Cholesky factorisation yields every order.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import _backend
from .errors import InvalidWindowError, RankDegeneracyError
from .process import ARCoeffs, AutocovTable, SamplePath
from .theory import OrderKProjection, TheoreticalCurve, quadratic_R_norm

#: Cholesky pivots below this multiple of the lag-0 sample moment are singular.
PIVOT_RTOL = 1e-12


def _as_array(path) -> NDArray[np.float64]:
    x = path.x if isinstance(path, SamplePath) else path
    return np.asarray(x, dtype=np.float64)


@dataclass(frozen=True)
class DesignSummary:
    """Sample moments over the window ``j = K_n..n-1``, each divided by ``N``.

    ``G`` is the lagged Gram matrix (its leading k-block serves order k),
    ``b`` the cross moments with ``x_{j+1}`` and ``c0`` the target's mean square.
    """

    n: int
    K_n: int
    N: int
    G: NDArray[np.float64]
    b: NDArray[np.float64]
    c0: float

    @property
    def augmented(self) -> NDArray[np.float64]:
        S = np.empty((self.K_n + 1, self.K_n + 1))
        S[0, 0] = self.c0
        S[0, 1:] = S[1:, 0] = self.b
        S[1:, 1:] = self.G
        return S


def design_summary(path, K_n: int) -> DesignSummary:
    x = _as_array(path)
    n = x.size
    if K_n < 1 or K_n >= n:
        raise InvalidWindowError(f"need 1 <= K_n < n, got K_n={K_n}, n={n}")
    S = _backend.lagged_gram(x[None, :], K_n)[0]
    return DesignSummary(n, K_n, n - K_n, S[1:, 1:].copy(), S[0, 1:].copy(), float(S[0, 0]))


@dataclass(frozen=True)
class FitSequence:
    """Least-squares fits of every order.

    ``coef[k-1, :k]`` holds ``a_hat(k)``; ``sigma2_hat[k-1]`` its residual mean
    square and ``sigma2_tilde[k-1] = N / (N - k) * sigma2_hat[k-1]``.
    """

    coef: NDArray[np.float64]
    sigma2_hat: NDArray[np.float64]
    sigma2_tilde: NDArray[np.float64]
    summary: DesignSummary

    @property
    def K_n(self) -> int:
        return self.summary.K_n

    @property
    def n(self) -> int:
        return self.summary.n

    @property
    def N(self) -> int:
        return self.summary.N

    def a_hat(self, k: int) -> NDArray[np.float64]:
        return self.coef[k - 1, :k]

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "sigma2_hat", "sigma2_tilde", "coefficients"])
        for k in range(1, self.K_n + 1):
            coefs = "[" + ", ".join(repr(float(v)) for v in self.a_hat(k)) + "]"
            w.writerow([k, repr(float(self.sigma2_hat[k - 1])), repr(float(self.sigma2_tilde[k - 1])), coefs])


def tilde_factor(N: int, K: int) -> NDArray[np.float64]:
    k = np.arange(1, K + 1)
    return N / (N - k)


def fit_all_orders(summary: DesignSummary, rel_tol: float = PIVOT_RTOL) -> FitSequence:
    sig, coef, status = _backend.nested_fit(summary.augmented[None], rel_tol)
    if status[0]:
        k = int(status[0])
        raise RankDegeneracyError(f"Gram matrix is rank-degenerate at order {k}", order=k)
    sig = sig[0]
    return FitSequence(coef[0], sig, sig * tilde_factor(summary.N, summary.K_n), summary)


def fit_path(path, K_n: int) -> FitSequence:
    return fit_all_orders(design_summary(path, K_n))


def predict_one(path, a_hat_k) -> float:
    """One-step forecast ``-sum_i a_hat_i x_{n+1-i}``."""
    x = _as_array(path)
    a = np.asarray(a_hat_k, dtype=float)
    k = a.size
    if k > x.size:
        raise ValueError("order exceeds the sample length")
    if k == 0:
        return 0.0
    return float(-(x[: -k - 1 : -1] @ a))


def pseudo_innovation_stats(path, proj: OrderKProjection, K_n: int):
    """Errors ``e_{t+1,k} = x_{t+1} + x_t(k)' a(k)`` over the window and their mean square."""
    x = _as_array(path)
    n = x.size
    k = proj.k
    eps = x[K_n:n].copy()
    for i in range(1, k + 1):
        eps += proj.a_k[i - 1] * x[K_n - i : n - i]
    return float(np.mean(eps**2)), eps


def normal_equation_residual(fits: FitSequence) -> float:
    """``max_k ||G(k) a_hat(k) + b(k)|| / ||b||`` over all orders."""
    G, b = fits.summary.G, fits.summary.b
    scale = np.linalg.norm(b) or 1.0
    worst = 0.0
    for k in range(1, fits.K_n + 1):
        r = G[:k, :k] @ fits.a_hat(k) + b[:k]
        worst = max(worst, float(np.linalg.norm(r)) / scale)
    return worst


def _gram_distance(fits: FitSequence, proj: OrderKProjection, k: int) -> float:
    d = fits.a_hat(k) - proj.a_k
    return float(d @ fits.summary.G[:k, :k] @ d)


def innovation_identity_residual(path, proj: OrderKProjection, fits: FitSequence, k: int) -> float:
    """Relative gap in ``sigma2_hat_k = S2_k - ||a_hat(k) - a(k)||^2_{G(k)}``."""
    if proj.k != k:
        raise ValueError("projection order does not match k")
    S2, _ = pseudo_innovation_stats(path, proj, fits.K_n)
    sh = fits.sigma2_hat[k - 1]
    return abs(sh - (S2 - _gram_distance(fits, proj, k))) / abs(sh)


def decomposition_check(path, proj: OrderKProjection, fits: FitSequence, curve: TheoreticalCurve, k: int) -> float:
    """Relative residual of the exact decomposition of ``S_n(k) = (N + 2k) sigma2_hat_k``.

    The right-hand side is ``N L_n(k) + 2k (sigma2_hat_k - sigma2)
    + (k sigma2 - N ||a_hat(k) - a(k)||^2_{G(k)}) + N sigma2 + N (S2_k - sigma2_k)``
    where ``proj`` is the order-k population projection.
    """
    if proj.k != k:
        raise ValueError("projection order does not match k")
    N = fits.N
    s2 = curve.sigma2
    sh = fits.sigma2_hat[k - 1]
    lhs = (N + 2 * k) * sh
    q = _gram_distance(fits, proj, k)
    S2, _ = pseudo_innovation_stats(path, proj, fits.K_n)
    rhs = N * curve.L[k - 1] + 2 * k * (sh - s2) + (k * s2 - N * q) + N * s2 + N * (S2 - proj.sigma2_k)
    return abs(lhs - rhs) / abs(lhs)


def empirical_R_distance(a_hat_k, ar: ARCoeffs, gamma: AutocovTable) -> float:
    """``||a_hat(k) - a||_R^2``: the independent-copy conditional excess MSPE."""
    a_hat_k = np.asarray(a_hat_k, dtype=float)
    L = max(a_hat_k.size, ar.M)
    d = np.zeros(L)
    d[: ar.M] -= ar.a
    d[: a_hat_k.size] += a_hat_k
    if ar.tail_bound * gamma.gamma[0] > 1e-10:
        warnings.warn(
            f"AR truncation tail {ar.tail_bound:.3g} may bias the R-distance", RuntimeWarning, stacklevel=2
        )
    return quadratic_R_norm(d, gamma)


class RDistance:
    """Batched ``||a_hat(k) - a||_R^2`` for every order at once.

    Splits the truncated ``a`` at ``K``: the head enters a ``K x K`` quadratic
    form, the tail contributes a fixed cross term and constant.
    """

    def __init__(self, ar: ARCoeffs, gamma: AutocovTable, K: int):
        from scipy.linalg import toeplitz

        M = max(ar.M, K)
        if gamma.M < M - 1:
            raise ValueError("autocovariance table too short")
        a = np.zeros(M)
        a[: ar.M] = ar.a
        g = gamma.gamma
        self.K = K
        self.head = a[:K]
        self.T_head = toeplitz(g[:K])
        tail = a[K:]
        # cross[i] = sum_{j >= K} gamma_{j-i} a_j
        self.cross = np.array([g[K - i : K - i + tail.size] @ tail for i in range(K)])
        self.const = quadratic_R_norm(tail, gamma)

    def __call__(self, coef: NDArray[np.float64]) -> NDArray[np.float64]:
        """``coef`` has shape ``(B, K, K)`` as returned by the kernels."""
        D = coef - self.head  # entries above the diagonal are zero padding
        quad = np.einsum("bki,ij,bkj->bk", D, self.T_head, D, optimize=True)
        return quad - 2.0 * (D @ self.cross) + self.const
