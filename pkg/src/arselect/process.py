"""Data-generating processes: coefficient expansions, autocovariances, simulation.

Sign conventions
----------------
ARMA specs follow ``x_t = sum phi_i x_{t-i} + e_t - sum theta_j e_{t-j}``, so
``MA(1)`` with ``theta = 0.8`` is ``x_t = e_t - 0.8 e_{t-1}``.

AR(infinity) coefficients always use the form ``x_t + sum a_i x_{t-i} = e_t``;
the MA(infinity) coefficients use ``x_t = sum_{i>=0} b_i e_{t-i}`` with ``b_0 = 1``.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.signal import lfilter

from .errors import InvalidSpecError, PrecisionError

DEFAULT_TOL = 1e-12
MAX_TERMS = 4096
MIN_BURNIN = 1000
#: Absolute error allowed on every autocovariance before a PrecisionError.
DEFAULT_PRECISION = 1e-10

NoiseSampler = Callable[[np.random.Generator, tuple], NDArray[np.float64]]


def gaussian_noise(rng: np.random.Generator, shape) -> NDArray[np.float64]:
    return rng.standard_normal(shape)


def student_t_noise(df: float) -> NoiseSampler:
    """Unit-variance Student-t sampler (requires ``df > 2``)."""
    if df <= 2:
        raise ValueError("df must exceed 2 for a finite variance")
    scale = math.sqrt((df - 2.0) / df)

    def sample(rng, shape):
        return scale * rng.standard_t(df, shape)

    return sample


@dataclass(frozen=True)
class ProcessSpec:
    """A stationary linear process with noise variance ``sigma2``.

    ``kind`` is ``"arma"`` (uses ``phi``/``theta``) or ``"explicit_ar"`` with
    ``rule`` one of ``"exponential"`` (``a_i = c * rho**i``), ``"algebraic"``
    (``a_i = c * i**-gamma_exp``) or ``"list"`` (``coeffs`` are ``a_1..a_p``).
    Use the classmethod constructors rather than filling fields by hand.
    """

    kind: str
    phi: tuple = ()
    theta: tuple = ()
    sigma2: float = 1.0
    rule: Optional[str] = None
    c: float = 0.0
    rho: float = 0.0
    gamma_exp: float = 0.0
    coeffs: tuple = ()
    noise: Optional[NoiseSampler] = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        object.__setattr__(self, "coeffs", tuple(float(v) for v in self.coeffs))
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise InvalidSpecError(f"sigma2 must be positive, got {self.sigma2}")
        if self.kind == "arma":
            _check_unit_roots(self.phi, "AR")
            _check_unit_roots(self.theta, "MA")
        elif self.kind == "explicit_ar":
            self._check_rule()
            ar = _ar_expansion(self, DEFAULT_TOL, MAX_TERMS)
            _stationarity_screen(ar.a)
        else:
            raise InvalidSpecError(f"unknown process kind {self.kind!r}")

    def _check_rule(self):
        if self.rule == "exponential":
            if not abs(self.rho) < 1:
                raise InvalidSpecError("exponential rule needs |rho| < 1")
        elif self.rule == "algebraic":
            if not self.gamma_exp > 1:
                raise InvalidSpecError("algebraic rule needs gamma_exp > 1 for summability")
        elif self.rule == "list":
            pass
        else:
            raise InvalidSpecError(f"unknown coefficient rule {self.rule!r}")

    # -- constructors ---------------------------------------------------
    @classmethod
    def arma(cls, phi=(), theta=(), sigma2=1.0, noise=None) -> "ProcessSpec":
        return cls("arma", phi=tuple(phi), theta=tuple(theta), sigma2=sigma2, noise=noise)

    @classmethod
    def white_noise(cls, sigma2=1.0) -> "ProcessSpec":
        return cls.arma(sigma2=sigma2)

    @classmethod
    def ar1(cls, phi, sigma2=1.0) -> "ProcessSpec":
        return cls.arma(phi=(phi,), sigma2=sigma2)

    @classmethod
    def ma1(cls, theta, sigma2=1.0) -> "ProcessSpec":
        return cls.arma(theta=(theta,), sigma2=sigma2)

    @classmethod
    def arma11(cls, phi, theta, sigma2=1.0) -> "ProcessSpec":
        return cls.arma(phi=(phi,), theta=(theta,), sigma2=sigma2)

    @classmethod
    def exponential(cls, c, rho, sigma2=1.0) -> "ProcessSpec":
        return cls("explicit_ar", rule="exponential", c=c, rho=rho, sigma2=sigma2)

    @classmethod
    def algebraic(cls, c, gamma_exp, sigma2=1.0) -> "ProcessSpec":
        return cls("explicit_ar", rule="algebraic", c=c, gamma_exp=gamma_exp, sigma2=sigma2)

    @classmethod
    def explicit(cls, coeffs, sigma2=1.0) -> "ProcessSpec":
        return cls("explicit_ar", rule="list", coeffs=tuple(coeffs), sigma2=sigma2)

    # -- helpers ----------------------------------------------------------
    @property
    def is_white_noise(self) -> bool:
        if self.kind == "arma":
            return not any(self.phi) and not any(self.theta)
        return self.rule == "list" and not any(self.coeffs)

    @property
    def is_finite_ar(self) -> bool:
        if self.kind == "arma":
            return not any(self.theta)
        return self.rule == "list"

    @property
    def label(self) -> str:
        if self.kind == "arma":
            if self.is_white_noise:
                return "whitenoise"
            return f"arma({_fmt(self.phi)};{_fmt(self.theta)})"
        if self.rule == "exponential":
            return f"expdecay({self.c:g},{self.rho:g})"
        if self.rule == "algebraic":
            return f"algdecay({self.c:g},{self.gamma_exp:g})"
        return f"ar({_fmt(self.coeffs)})"


def _fmt(values) -> str:
    return ",".join(f"{v:g}" for v in values)


def _poly(coefs) -> NDArray[np.float64]:
    """Lag polynomial ``1 - c_1 z - ... - c_m z^m`` as an ascending array."""
    return np.concatenate(([1.0], -np.asarray(coefs, dtype=float)))


def _check_unit_roots(coefs, name):
    poly = _poly(coefs)
    nz = np.flatnonzero(poly)
    poly = poly[: nz[-1] + 1]
    if poly.size <= 1:
        return
    roots = np.roots(poly[::-1])
    if np.any(np.abs(roots) <= 1.0 + 1e-10):
        raise InvalidSpecError(
            f"{name} polynomial has a root with modulus <= 1 "
            f"(min |z| = {np.abs(roots).min():.6g}); spec is not "
            + ("causal" if name == "AR" else "invertible")
        )


def _decay_radius(coefs) -> float:
    """Largest ``1/|root|`` of the lag polynomial; 0 when there are no roots."""
    poly = _poly(coefs)
    nz = np.flatnonzero(poly)
    poly = poly[: nz[-1] + 1]
    if poly.size <= 1:
        return 0.0
    return float(np.max(1.0 / np.abs(np.roots(poly[::-1]))))


def _stationarity_screen(a: NDArray[np.float64], grid: int = 720, floor: float = 1e-6):
    if a.size == 0:
        return
    z = np.exp(2j * np.pi * np.arange(grid) / grid)
    vals = np.polynomial.polynomial.polyval(z, np.concatenate(([1.0], a)))
    at_one = 1.0 + a.sum()
    if np.min(np.abs(vals)) < floor or abs(at_one) < floor:
        raise InvalidSpecError("A(z) vanishes (numerically) on the unit circle")
    # A is analytic inside the disk, so zero winding means no zeros with |z| < 1.
    phase = np.unwrap(np.angle(np.append(vals, vals[0])))
    winding = round((phase[-1] - phase[0]) / (2 * np.pi))
    if winding != 0:
        raise InvalidSpecError(f"A(z) has {winding} zero(s) inside the unit disk")


# ---------------------------------------------------------------------------
# Coefficient expansions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ARCoeffs:
    """Truncated ``a_1..a_M``; ``tail_bound`` bounds ``sum_{i>M} a_i**2``."""

    a: NDArray[np.float64]
    tail_bound: float
    truncation_tol: float

    @property
    def M(self) -> int:
        return int(self.a.size)


@dataclass(frozen=True)
class MACoeffs:
    """Truncated ``b_0..b_M`` with ``b_0 = 1``."""

    b: NDArray[np.float64]
    tail_bound: float

    @property
    def M(self) -> int:
        return int(self.b.size - 1)


def _impulse(num, den, length) -> NDArray[np.float64]:
    imp = np.zeros(length)
    imp[0] = 1.0
    return lfilter(num, den, imp)


def _truncate(seq: NDArray[np.float64], tol: float) -> int:
    """Number of leading entries kept: everything up to the last ``|s| > tol``."""
    big = np.flatnonzero(np.abs(seq) > tol)
    return int(big[-1] + 1) if big.size else 0


def _truncate_after(seq: NDArray[np.float64], tol: float) -> int:
    """Like :func:`_truncate` but also keeps the first entry at or below ``tol``,
    so the last kept term is itself within tolerance when the series allows it."""
    return min(seq.size, _truncate(seq, tol) + 1)


def _geometric_tail(seq: NDArray[np.float64], keep: int, radius: float) -> float:
    """Sum of squares beyond ``keep``: the computed remainder plus a geometric
    extrapolation past the end of ``seq`` with ratio ``radius``."""
    rest = float(np.sum(seq[keep:] ** 2))
    if radius >= 1:
        return math.inf
    last = abs(seq[-1]) if seq.size else 0.0
    if radius > 0 and last > 0:
        # modest factor covers repeated roots
        rest += 4.0 * last**2 * radius**2 / (1.0 - radius**2)
    return rest


def _empirical_tail(seq: NDArray[np.float64], keep: int) -> float:
    """Tail bound when no closed-form decay rate is known.

    Fits a power law to the last decade of ``seq`` and integrates it past the end.
    """
    rest = float(np.sum(seq[keep:] ** 2))
    m = seq.size
    lo = max(1, m // 10)
    idx = np.arange(lo, m)
    mag = np.abs(seq[lo:])
    ok = mag > 0
    if ok.sum() < 2:
        return rest
    slope = np.polyfit(np.log(idx[ok]), np.log(mag[ok]), 1)[0]
    p = -slope
    if p <= 0.5:
        return math.inf
    return rest + float(mag[-1] ** 2) * m / (2 * p - 1)


@functools.lru_cache(maxsize=256)
def _ar_expansion(spec: ProcessSpec, tol: float, cap: int) -> ARCoeffs:
    if spec.kind == "arma":
        if not any(spec.theta):
            a = -np.asarray(spec.phi, dtype=float)
            a = a[: _truncate(a, 0.0)]
            return ARCoeffs(a, 0.0, tol)
        full = _impulse(_poly(spec.phi), _poly(spec.theta), cap + 1)[1:]
        keep = _truncate_after(full, tol)
        tail = _geometric_tail(full, keep, _decay_radius(spec.theta))
        achieved = max(tol, abs(full[keep - 1]), float(np.max(np.abs(full[keep:]), initial=0.0)))
        return ARCoeffs(full[:keep].copy(), tail, achieved)
    if spec.rule == "list":
        a = np.asarray(spec.coeffs, dtype=float)
        return ARCoeffs(a[: _truncate(a, 0.0)], 0.0, tol)
    c = spec.c
    if c == 0:
        return ARCoeffs(np.zeros(0), 0.0, tol)
    if spec.rule == "exponential":
        rho = spec.rho
        if rho == 0:
            return ARCoeffs(np.zeros(0), 0.0, tol)
        need = math.ceil(math.log(tol / abs(c)) / math.log(abs(rho)))
        M = int(min(cap, max(need, 1)))
        i = np.arange(1, M + 1)
        a = c * rho**i
        tail = c**2 * rho ** (2 * (M + 1)) / (1 - rho**2)
        return ARCoeffs(a, float(tail), max(tol, abs(a[-1])))
    g = spec.gamma_exp
    need = math.ceil((abs(c) / tol) ** (1.0 / g))
    M = int(min(cap, max(need, 1)))
    i = np.arange(1, M + 1, dtype=float)
    a = c * i**-g
    tail = c**2 * M ** (1 - 2 * g) / (2 * g - 1)
    return ARCoeffs(a, float(tail), max(tol, abs(a[-1])))


def ar_coefficients(spec: ProcessSpec, tol: float = DEFAULT_TOL, cap: int = MAX_TERMS) -> ARCoeffs:
    """AR(infinity) coefficients ``a_i`` of ``spec``, truncated where ``|a_i| <= tol``.

    For ARMA specs these are the power-series coefficients of
    ``phi(z) / theta(z)``. When the series has not decayed below ``tol`` by
    ``cap`` terms, the achieved tolerance is recorded in ``truncation_tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    return _ar_expansion(spec, float(tol), int(cap))


@functools.lru_cache(maxsize=256)
def _ma_expansion(spec: ProcessSpec, tol: float, cap: int) -> MACoeffs:
    if spec.kind == "arma":
        if not any(spec.phi):
            b = _poly(spec.theta)
            return MACoeffs(b[: max(1, _truncate(b, 0.0))], 0.0)
        full = _impulse(_poly(spec.theta), _poly(spec.phi), cap + 1)
        keep = max(1, _truncate(full, tol))
        return MACoeffs(full[:keep].copy(), _geometric_tail(full, keep, _decay_radius(spec.phi)))
    ar = _ar_expansion(spec, tol, cap)
    if ar.M == 0:
        return MACoeffs(np.ones(1), 0.0)
    full = _impulse([1.0], np.concatenate(([1.0], ar.a)), cap + 1)
    keep = max(1, _truncate(full, tol))
    if spec.rule == "exponential" or spec.rule == "list":
        tail = _geometric_tail(full, keep, _ar_radius(ar.a))
    else:
        tail = _empirical_tail(full, keep)
    return MACoeffs(full[:keep].copy(), tail)


def _ar_radius(a: NDArray[np.float64]) -> float:
    """Decay radius of ``1/A(z)`` for a finite coefficient list."""
    if a.size == 0:
        return 0.0
    poly = np.concatenate(([1.0], a))
    return float(np.max(1.0 / np.abs(np.roots(poly[::-1]))))


def ma_coefficients(spec: ProcessSpec, tol: float = DEFAULT_TOL, cap: int = MAX_TERMS) -> MACoeffs:
    """MA(infinity) coefficients ``b_0 = 1, b_1, ...`` truncated at ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    return _ma_expansion(spec, float(tol), int(cap))


# ---------------------------------------------------------------------------
# Autocovariances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AutocovTable:
    """``gamma[h] = E(x_t x_{t+h})`` for ``h = 0..M``."""

    gamma: NDArray[np.float64]
    sigma2: float
    error_bound: float = 0.0

    @property
    def M(self) -> int:
        return int(self.gamma.size - 1)

    def toeplitz(self, k: int) -> NDArray[np.float64]:
        from scipy.linalg import toeplitz

        if k > self.gamma.size:
            raise PrecisionError(f"table covers lags up to {self.M}, need {k - 1}", required=k - 1)
        return toeplitz(self.gamma[:k])


def autocovariances_from_ma(b: NDArray[np.float64], sigma2: float, M: int) -> NDArray[np.float64]:
    """``gamma_h = sigma2 * sum_i b_i b_{i+h}`` for ``h = 0..M`` (finite ``b``)."""
    L = b.size
    full = np.correlate(b, b, mode="full")[L - 1 :]
    out = np.zeros(M + 1)
    m = min(M + 1, L)
    out[:m] = full[:m]
    return sigma2 * out


def _arma11_closed_form(phi: float, theta: float, sigma2: float, M: int) -> NDArray[np.float64]:
    g = np.empty(M + 1)
    g[0] = sigma2 * (1 - 2 * phi * theta + theta**2) / (1 - phi**2)
    if M >= 1:
        g1 = sigma2 * (1 - phi * theta) * (phi - theta) / (1 - phi**2)
        g[1:] = g1 * phi ** np.arange(M)
    return g


def autocovariances(
    spec: ProcessSpec,
    M: int,
    tol: float = DEFAULT_TOL,
    precision: float = DEFAULT_PRECISION,
) -> AutocovTable:
    """Autocovariances up to lag ``M``.

    Closed forms cover ARMA(1,1) and its MA(1)/AR(1)/white-noise special cases;
    everything else goes through the MA(infinity) expansion. Raises
    :class:`PrecisionError` when the dropped tail could move some ``gamma_h``
    by more than ``precision``.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if spec.kind == "arma" and len(spec.phi) <= 1 and len(spec.theta) <= 1:
        phi = spec.phi[0] if spec.phi else 0.0
        theta = spec.theta[0] if spec.theta else 0.0
        return AutocovTable(_arma11_closed_form(phi, theta, spec.sigma2, M), spec.sigma2)
    ma = ma_coefficients(spec, tol)
    # dropped terms of gamma_h pair b_i (i > M_b - h) with b_{i+h} (i + h > M_b)
    near = float(np.sum(ma.b[max(0, ma.b.size - M) :] ** 2)) + ma.tail_bound
    bound = spec.sigma2 * math.sqrt(near * ma.tail_bound)
    if bound > precision:
        raise PrecisionError(
            f"MA tail bound {ma.tail_bound:.3g} gives autocovariance error up to "
            f"{bound:.3g} > {precision:.3g}; more than {ma.M} terms required",
            required=ma.M * 2,
        )
    return AutocovTable(autocovariances_from_ma(ma.b, spec.sigma2, M), spec.sigma2, bound)


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------


@dataclass
class SamplePath:
    """Observed ``x_1..x_n`` with the innovations that produced them.

    ``pre_x``/``pre_e`` hold the values just before ``x_1`` that the exact
    one-step conditional mean needs when the order exceeds the sample.
    """

    x: NDArray[np.float64]
    innovations: NDArray[np.float64]
    pre_x: NDArray[np.float64]
    pre_e: NDArray[np.float64]
    seed: object = None
    burnin: int = 0

    @property
    def n(self) -> int:
        return int(self.x.size)

    def to_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, v in enumerate(self.x, start=1):
            w.writerow([t, repr(float(v))])


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def default_burnin(spec: ProcessSpec, tol: float = DEFAULT_TOL) -> int:
    ar = ar_coefficients(spec, tol)
    ma = ma_coefficients(spec, tol)
    return max(MIN_BURNIN, ar.M, ma.M)


def _history_lengths(spec: ProcessSpec, tol: float) -> tuple[int, int]:
    if spec.kind == "arma":
        return len(spec.phi), len(spec.theta)
    return ar_coefficients(spec, tol).M, 0


def _filter(spec: ProcessSpec, e: NDArray[np.float64], tol: float) -> NDArray[np.float64]:
    if spec.kind == "arma":
        if spec.is_white_noise:
            return e.copy()
        return lfilter(_poly(spec.theta), _poly(spec.phi), e, axis=-1)
    ar = ar_coefficients(spec, tol)
    if ar.M == 0:
        return e.copy()
    return lfilter([1.0], np.concatenate(([1.0], ar.a)), e, axis=-1)


def simulate_batch(
    spec: ProcessSpec,
    length: int,
    seeds,
    burnin: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Simulate one path per seed, starting from zeros ``burnin`` steps early.

    Returns ``(x, e)`` with shape ``(len(seeds), burnin + length)``; the first
    ``burnin`` columns are the warm-up.
    """
    if burnin is None:
        burnin = default_burnin(spec, tol)
    total = burnin + length
    noise = spec.noise or gaussian_noise
    scale = math.sqrt(spec.sigma2)
    e = np.empty((len(seeds), total))
    for row, seed in enumerate(seeds):
        e[row] = scale * noise(_rng(seed), (total,))
    return _filter(spec, e, tol), e


def simulate(
    spec: ProcessSpec,
    n: int,
    seed=0,
    burnin: Optional[int] = None,
    tol: float = DEFAULT_TOL,
) -> SamplePath:
    """Stationary-regime sample of length ``n`` with innovations retained.

    The same ``(spec, n, seed, burnin)`` always reproduces the same path.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if burnin is None:
        burnin = default_burnin(spec, tol)
    x, e = simulate_batch(spec, n, [seed], burnin, tol)
    return _path_from_rows(spec, x[0], e[0], burnin, n, seed, tol)


def _path_from_rows(spec, x_row, e_row, burnin, n, seed, tol) -> SamplePath:
    hx, he = _history_lengths(spec, tol)
    return SamplePath(
        x=x_row[burnin : burnin + n].copy(),
        innovations=e_row[burnin : burnin + n].copy(),
        pre_x=x_row[max(0, burnin - hx) : burnin].copy(),
        pre_e=e_row[max(0, burnin - he) : burnin].copy(),
        seed=seed,
        burnin=burnin,
    )


def conditional_mean_batch(
    spec: ProcessSpec,
    x_hist: NDArray[np.float64],
    e_hist: NDArray[np.float64],
    tol: float = DEFAULT_TOL,
) -> NDArray[np.float64]:
    """Exact ``E(x_{t+1} | past)`` where the last column of each row is time ``t``."""
    x_hist = np.atleast_2d(x_hist)
    e_hist = np.atleast_2d(e_hist)
    if spec.kind == "arma":
        out = np.zeros(x_hist.shape[0])
        for i, ph in enumerate(spec.phi, start=1):
            out += ph * x_hist[:, -i]
        for j, th in enumerate(spec.theta, start=1):
            out -= th * e_hist[:, -j]
        return out
    a = ar_coefficients(spec, tol).a
    if a.size == 0:
        return np.zeros(x_hist.shape[0])
    return -(x_hist[:, -1 : -a.size - 1 : -1] @ a)


def conditional_mean_next(spec: ProcessSpec, path: SamplePath, tol: float = DEFAULT_TOL) -> float:
    """Exact one-step conditional mean of ``x_{n+1}`` from the retained state."""
    hx, he = _history_lengths(spec, tol)
    xs = np.concatenate((path.pre_x, path.x))
    es = np.concatenate((path.pre_e, path.innovations))
    if xs.size < hx or es.size < he:
        raise ValueError(
            f"path lacks the state this spec needs ({hx} past values, {he} past innovations)"
        )
    return float(conditional_mean_batch(spec, xs, es, tol)[0])
