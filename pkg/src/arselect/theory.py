"""Population quantities: best finite-order predictors and the loss curve.

``L_n(k) = (alpha - 1) k sigma2 / N + ||a - a(k)||_R^2`` with ``N = n - K_n``;
``alpha = 2`` gives the plain curve. The approximation error
``||a - a(k)||_R^2`` is the order-k prediction error variance minus
``sigma2``, taken from the Levinson-Durbin recursion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import NumericalDegeneracyError, PrecisionError
from .process import AutocovTable, ProcessSpec, autocovariances


@dataclass(frozen=True)
class OrderKProjection:
    """Best linear predictor of order ``k``: ``x_{k+1} + x_k(k)' a_k = e_{k+1,k}``."""

    k: int
    a_k: NDArray[np.float64]
    sigma2_k: float


def levinson(gamma: AutocovTable, kmax: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Levinson-Durbin recursion for orders ``1..kmax``.

    Returns ``(coef, err)`` where ``coef[k-1, :k]`` is ``a(k)`` (sign convention
    of the AR form) and ``err[k]`` is the order-k prediction error variance,
    with ``err[0] = gamma_0``.
    """
    g = gamma.gamma
    if kmax > gamma.M:
        raise PrecisionError(f"autocovariance table covers {gamma.M} lags, need {kmax}", required=kmax)
    if not g[0] > 0:
        raise NumericalDegeneracyError("gamma_0 must be positive")
    phi = np.zeros(kmax)
    prev = np.zeros(kmax)
    coef = np.zeros((kmax, kmax))
    err = np.empty(kmax + 1)
    err[0] = g[0]
    for k in range(1, kmax + 1):
        acc = g[k] - np.dot(prev[: k - 1], g[k - 1 : 0 : -1])
        refl = acc / err[k - 1]
        if not abs(refl) < 1.0:
            raise NumericalDegeneracyError(f"Toeplitz segment of order {k} is not positive definite")
        phi[: k - 1] = prev[: k - 1] - refl * prev[: k - 1][::-1]
        phi[k - 1] = refl
        err[k] = err[k - 1] * (1.0 - refl * refl)
        if not err[k] > 0:
            raise NumericalDegeneracyError(f"prediction error variance vanished at order {k}")
        coef[k - 1, :k] = -phi[:k]
        prev[:k] = phi[:k]
    return coef, err


def yule_walker(gamma: AutocovTable, k: int) -> OrderKProjection:
    if k < 1:
        raise ValueError("k must be >= 1")
    coef, err = levinson(gamma, k)
    return OrderKProjection(k, coef[k - 1, :k].copy(), float(err[k]))


def fit_norms(gamma: AutocovTable, kmax: int) -> NDArray[np.float64]:
    """``||a - a(k)||_R^2`` for ``k = 1..kmax`` (clipped at zero)."""
    _, err = levinson(gamma, kmax)
    return np.maximum(err[1:] - gamma.sigma2, 0.0)


def fit_norm(gamma: AutocovTable, k: int) -> float:
    return float(fit_norms(gamma, k)[k - 1])


def quadratic_R_norm(d, gamma: AutocovTable) -> float:
    """``sum_{i,j} d_i d_j gamma_{|i-j|}`` for a finite coefficient sequence."""
    d = np.asarray(d, dtype=float)
    L = d.size
    if L == 0:
        return 0.0
    if L - 1 > gamma.M:
        raise PrecisionError(f"need autocovariances up to lag {L - 1}, have {gamma.M}", required=L - 1)
    g = gamma.gamma[:L]
    kern = np.concatenate((g[:0:-1], g))
    Td = np.convolve(d, kern)[L - 1 : 2 * L - 1]
    return float(d @ Td)


@dataclass(frozen=True)
class TheoreticalCurve:
    n: int
    K_n: int
    N: int
    L: NDArray[np.float64]
    fit_norm: NDArray[np.float64]
    k_star: int
    alpha: float
    sigma2: float

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "fit_norm", "L_n", "k_star"])
        for k in range(1, self.K_n + 1):
            w.writerow([k, repr(float(self.fit_norm[k - 1])), repr(float(self.L[k - 1])), int(k == self.k_star)])


def curve_from_fit_norms(fn, sigma2: float, n: int, K_n: int, alpha: float = 2.0) -> TheoreticalCurve:
    N = n - K_n
    k = np.arange(1, K_n + 1)
    L = (alpha - 1.0) * k * sigma2 / N + fn[:K_n]
    return TheoreticalCurve(n, K_n, N, L, np.asarray(fn[:K_n]), int(np.argmin(L)) + 1, float(alpha), sigma2)


def loss_curve(spec: ProcessSpec, n: int, K_n: int, alpha: float = 2.0, tol: float = 1e-12) -> TheoreticalCurve:
    """Loss curve over ``k = 1..K_n``; ``k_star`` is the smallest minimiser."""
    if not 1 <= K_n < n:
        raise ValueError(f"need 1 <= K_n < n, got K_n={K_n}, n={n}")
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    gamma = autocovariances(spec, K_n, tol)
    return curve_from_fit_norms(fit_norms(gamma, K_n), spec.sigma2, n, K_n, alpha)


def kstar_asymptotic_exponential(beta: float, N: float) -> float:
    """Leading term ``log(N) / beta`` for squared-coefficient tails ``~ exp(-beta k)``."""
    if beta <= 0 or N < 3:
        raise ValueError("need beta > 0 and N >= 3")
    return math.log(N) / beta


def kstar_asymptotic_algebraic(sigma2: float, C4: float, beta: float, N: float) -> float:
    """``(N C4 beta / sigma2)^(1/(beta+1))`` for fit norms ``~ C4 k^-beta``."""
    if min(sigma2, C4, beta, N) <= 0:
        raise ValueError("all arguments must be positive")
    if beta <= 1:
        raise ValueError("beta must exceed 1")
    return (N * C4 * beta / sigma2) ** (1.0 / (beta + 1.0))


def basin_profile(curve: TheoreticalCurve) -> list[tuple[int, float]]:
    """``N (L(k) - L(k_star)) / |k - k_star|`` for every ``k != k_star``."""
    if curve.K_n < 2:
        raise ValueError("basin profile needs K_n >= 2")
    ks = curve.k_star
    base = curve.L[ks - 1]
    out = []
    for k in range(1, curve.K_n + 1):
        if k != ks:
            out.append((k, float(curve.N * (curve.L[k - 1] - base) / abs(k - ks))))
    return out


def default_max_order(N: int, exponent: float = 0.45) -> int:
    """Maximal order ``floor(N**exponent)`` used by the asymptotics checks."""
    return max(1, int(math.floor(N**exponent + 1e-9)))


def asymptotics_check(spec: ProcessSpec, N_grid, fit_at: int = 200) -> list[dict]:
    """Brute-force ``k_star`` against the closed-form leading terms.

    Exponential rules use ``beta = -2 log|rho|`` and a ``5 log log N`` band.
    Algebraic rules use ``beta = 2 gamma_exp - 1`` with ``C4`` read off
    ``fit_norm(fit_at) * fit_at**beta`` and a ``max(3, 0.15 * formula)`` band.
    """
    if spec.kind != "explicit_ar" or spec.rule not in ("exponential", "algebraic"):
        raise ValueError("asymptotics check needs an exponential or algebraic coefficient rule")
    rows = []
    Ns = [int(N) for N in N_grid]
    kmax = max(default_max_order(N) for N in Ns)
    depth = max(kmax, fit_at) if spec.rule == "algebraic" else kmax
    gamma = autocovariances(spec, depth)
    fn = fit_norms(gamma, depth)
    if spec.rule == "algebraic":
        beta = 2.0 * spec.gamma_exp - 1.0
        C4 = float(fn[fit_at - 1] * fit_at**beta)
    else:
        beta = -2.0 * math.log(abs(spec.rho))
        C4 = float("nan")
    for N in Ns:
        K = default_max_order(N)
        curve = curve_from_fit_norms(fn, spec.sigma2, N + K, K)
        if spec.rule == "exponential":
            formula = kstar_asymptotic_exponential(beta, N)
            band = 5.0 * math.log(math.log(N))
        else:
            formula = kstar_asymptotic_algebraic(spec.sigma2, C4, beta, N)
            band = max(3.0, 0.15 * formula)
        rows.append(
            dict(N=N, K_n=K, k_star=curve.k_star, formula=formula, band=band, beta=beta, C4=C4,
                 ok=abs(curve.k_star - formula) <= band)
        )
    return rows

