"""Monte Carlo harness for same- and independent-realization prediction efficiency.

Each replication simulates ``x_1..x_{n+1}``, fits every order on ``x_1..x_n``
and records, for each order ``k``:

* ``d_k^2`` with ``d_k = E(x_{n+1} | past) - x_hat_{n+1}(k)``: the exact
  conditional excess MSPE of the same-realization forecast;
* ``(x_{n+1} - x_hat_{n+1}(k))^2 - sigma2``: its raw, noisier counterpart;
* ``||a_hat(k) - a||_R^2``: the exact conditional excess MSPE when the same
  coefficients forecast an independent copy.

Replications are processed in fixed-size chunks whose composition depends only
on the replication index, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from . import _backend
from .criteria import AIC, CriterionId, score_array, select_from_scores
from .errors import ConfigError, NumericalDegeneracyError
from .fit import PIVOT_RTOL, RDistance
from .process import (
    DEFAULT_TOL,
    ProcessSpec,
    ar_coefficients,
    autocovariances,
    conditional_mean_batch,
    default_burnin,
    simulate_batch,
)

log = logging.getLogger(__name__)

CHUNK = 500
MAX_DROP_FRACTION = 1e-3
STANDARD_CELLS = ((60, 7), (120, 10), (200, 14), (500, 22), (1000, 31))
BASELINE_CELL = (60, 7)
#: The baseline denominator minimises over orders 1..6 only.
BASELINE_ORDERS = 6
TABLE1_PHIS = (-0.9, -0.7, -0.5, 0.5, 0.7, 0.9)
TABLE1_THETAS = (0.8, 0.6, -0.6, -0.8)
MA_THETAS = (0.8, 0.6, -0.6, -0.8)


def default_K(n: int) -> int:
    """Largest integer not exceeding ``sqrt(n)``."""
    return math.isqrt(n)


def seed_stream(master_seed: int, cell, rep: int) -> np.random.SeedSequence:
    """Independent stream for one replication of one cell.

    ``cell`` is an int or a tuple of ints (typically ``(n, K_n)``); the
    mapping ``(master_seed, cell, rep) -> stream`` is injective.
    """
    key = tuple(cell) if isinstance(cell, (tuple, list)) else (cell,)
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(v) for v in key) + (int(rep),))


@dataclass
class ExperimentConfig:
    spec: ProcessSpec
    cells: Sequence[tuple[int, int]] = STANDARD_CELLS
    reps: int = 2000
    master_seed: int = 1
    criteria: Sequence[CriterionId] = (AIC,)
    baseline_cell: tuple[int, int] = BASELINE_CELL
    estimator_mode: str = "conditional"
    jobs: int = 1
    tol: float = DEFAULT_TOL
    burnin: Optional[int] = None

    def __post_init__(self):
        self.cells = [(int(n), int(K)) for n, K in self.cells]
        for n, K in self.cells:
            if not 1 <= K < n:
                raise ConfigError(f"cell ({n}, {K}) needs 1 <= K_n < n")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")
        if self.estimator_mode not in ("conditional", "raw"):
            raise ConfigError(f"unknown estimator mode {self.estimator_mode!r}")
        if not self.criteria:
            raise ConfigError("at least one criterion is required")
        self.criteria = list(self.criteria)
        self.jobs = max(1, int(self.jobs))


@dataclass
class CriterionStats:
    histogram: NDArray[np.int64]
    pe: float
    pe_se: float
    pei: float
    pei_se: float
    r_star: float
    r_star_se: float
    r_star_I: float
    r_star_I_se: float


@dataclass
class CellResult:
    spec: ProcessSpec
    n: int
    K_n: int
    reps: int
    used: int
    dropped: int
    mode: str
    m_hat: NDArray[np.float64]
    m_hat_se: NDArray[np.float64]
    m_hat_I: NDArray[np.float64]
    m_hat_I_se: NDArray[np.float64]
    m_hat_cond: NDArray[np.float64]
    m_hat_cond_se: NDArray[np.float64]
    m_hat_raw: NDArray[np.float64]
    m_hat_raw_se: NDArray[np.float64]
    criteria: dict = field(default_factory=dict)

    @property
    def cell(self) -> tuple[int, int]:
        return (self.n, self.K_n)

    @property
    def min_m_hat(self) -> float:
        return float(self.m_hat.min())

    @property
    def min_m_hat_se(self) -> float:
        return float(self.m_hat_se[int(np.argmin(self.m_hat))])

    def stats(self, criterion=AIC) -> CriterionStats:
        key = criterion.label if isinstance(criterion, CriterionId) else str(criterion)
        return self.criteria[key]


# ---------------------------------------------------------------------------
# Replication chunks
# ---------------------------------------------------------------------------


@dataclass
class _CellPlan:
    spec: ProcessSpec
    n: int
    K: int
    master_seed: int
    criteria: list
    tol: float
    burnin: int
    rdist: RDistance


def _plan(config: ExperimentConfig, n: int, K: int) -> _CellPlan:
    spec = config.spec
    ar = ar_coefficients(spec, config.tol)
    gamma = autocovariances(spec, max(ar.M, K), config.tol)
    burnin = config.burnin if config.burnin is not None else default_burnin(spec, config.tol)
    return _CellPlan(spec, n, K, config.master_seed, config.criteria, config.tol, burnin, RDistance(ar, gamma, K))


def _run_chunk(plan: _CellPlan, lo: int, hi: int) -> dict:
    n, K, burnin = plan.n, plan.K, plan.burnin
    seeds = [seed_stream(plan.master_seed, (n, K), r) for r in range(lo, hi)]
    xs, es = simulate_batch(plan.spec, n + 1, seeds, burnin, plan.tol)
    X = np.ascontiguousarray(xs[:, burnin : burnin + n])
    x_next = xs[:, burnin + n]
    cmean = conditional_mean_batch(plan.spec, xs[:, : burnin + n], es[:, : burnin + n], plan.tol)
    sig, coef, status = _backend.nested_fit(_backend.lagged_gram(X, K), PIVOT_RTOL)
    ok = status == 0
    sig, coef = sig[ok], coef[ok]
    recent = X[ok][:, : -K - 1 : -1]
    pred = -np.einsum("bki,bi->bk", coef, recent)
    cond = (cmean[ok, None] - pred) ** 2
    raw = (x_next[ok, None] - pred) ** 2 - plan.spec.sigma2
    indep = plan.rdist(coef)
    khat = np.stack([select_from_scores(score_array(c, sig, n, K)) for c in plan.criteria], axis=1)
    return dict(cond=cond, raw=raw, indep=indep, khat=khat, dropped=int((~ok).sum()))


def _ratio(num: NDArray[np.float64], den: NDArray[np.float64]) -> tuple[float, float]:
    """Ratio of means with a delta-method standard error."""
    m = num.size
    nb, db = num.mean(), den.mean()
    if db == 0:
        return math.nan, math.nan
    r = nb / db
    if m < 2:
        return float(r), math.nan
    resid = num - r * den
    return float(r), float(resid.std(ddof=1) / math.sqrt(m) / abs(db))


def _mean_se(v: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    m = v.shape[0]
    se = v.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.full(v.shape[1:], np.nan)
    return v.mean(axis=0), se


def _aggregate(config: ExperimentConfig, n: int, K: int, parts: list[dict]) -> CellResult:
    cond = np.concatenate([p["cond"] for p in parts])
    raw = np.concatenate([p["raw"] for p in parts])
    indep = np.concatenate([p["indep"] for p in parts])
    khat = np.concatenate([p["khat"] for p in parts])
    dropped = sum(p["dropped"] for p in parts)
    if dropped > MAX_DROP_FRACTION * config.reps:
        raise NumericalDegeneracyError(
            f"cell ({n}, {K}): {dropped} of {config.reps} replications had a singular Gram matrix"
        )
    if dropped:
        log.warning("cell (%d, %d): dropped %d degenerate replications", n, K, dropped)
    loss = cond if config.estimator_mode == "conditional" else raw
    m_cond, se_cond = _mean_se(cond)
    m_raw, se_raw = _mean_se(raw)
    m_I, se_I = _mean_se(indep)
    m_hat, m_se = (m_cond, se_cond) if loss is cond else (m_raw, se_raw)
    rows = np.arange(loss.shape[0])
    best = int(np.argmin(m_hat))
    best_I = int(np.argmin(m_I))
    per_rep_min = loss.min(axis=1)
    per_rep_min_I = indep.min(axis=1)
    stats = {}
    for j, crit in enumerate(config.criteria):
        pick = khat[:, j] - 1
        num = loss[rows, pick]
        num_I = indep[rows, pick]
        pe = _ratio(num, loss[:, best])
        pei = _ratio(num_I, indep[:, best_I])
        rs = _ratio(num, per_rep_min)
        rsi = _ratio(num_I, per_rep_min_I)
        stats[crit.label] = CriterionStats(
            np.bincount(pick, minlength=K), *pe, *pei, *rs, *rsi
        )
    return CellResult(
        config.spec, n, K, config.reps, loss.shape[0], dropped, config.estimator_mode,
        m_hat, m_se, m_I, se_I, m_cond, se_cond, m_raw, se_raw, stats,
    )


def _chunks(reps: int):
    return [(lo, min(lo + CHUNK, reps)) for lo in range(0, reps, CHUNK)]


def _run_task(args):
    plan, lo, hi = args
    return _run_chunk(plan, lo, hi)


def run_cells(config: ExperimentConfig, cells=None) -> list[CellResult]:
    """Run every requested cell; output does not depend on ``config.jobs``."""
    cells = list(config.cells if cells is None else cells)
    tasks, owners = [], []
    for idx, (n, K) in enumerate(cells):
        plan = _plan(config, n, K)
        for lo, hi in _chunks(config.reps):
            tasks.append((plan, lo, hi))
            owners.append(idx)
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            outputs = list(pool.map(_run_task, tasks))
    else:
        outputs = [_run_task(t) for t in tasks]
    results = []
    for idx, (n, K) in enumerate(cells):
        parts = [o for o, owner in zip(outputs, owners) if owner == idx]
        results.append(_aggregate(config, n, K, parts))
        log.info("cell (%d, %d) done: %s", n, K, config.spec.label)
    return results


def run_cell(config: ExperimentConfig, cell) -> CellResult:
    return run_cells(config, [tuple(cell)])[0]


def gamma_opt(results: Sequence[CellResult], baseline: CellResult) -> list[tuple[float, float]]:
    """``min_k m_hat(k)`` of each cell relative to the baseline's ``min_{k<=6}``.

    The baseline cell itself is reported as exactly 1.
    """
    k0 = min(BASELINE_ORDERS, baseline.K_n)
    j = int(np.argmin(baseline.m_hat[:k0]))
    den, den_se = float(baseline.m_hat[j]), float(baseline.m_hat_se[j])
    out = []
    for res in results:
        if res.spec != baseline.spec:
            raise ConfigError("gamma_opt needs every cell to come from the baseline's spec")
        if res.cell == baseline.cell:
            out.append((1.0, 0.0))
            continue
        num, num_se = res.min_m_hat, res.min_m_hat_se
        r = num / den
        out.append((r, math.hypot(num_se / den, r * den_se / den)))
    return out


# ---------------------------------------------------------------------------
# Tabular output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("phi0", "theta0", "n", "K_n", "statistic", "value", "stderr")


@dataclass(frozen=True)
class Row:
    phi0: str
    theta0: str
    n: int
    K_n: int
    statistic: str
    value: float
    stderr: float

    @property
    def key(self):
        return (self.phi0, self.theta0, self.n, self.K_n, self.statistic)


def _num(v: float) -> str:
    return f"{v:g}"


def spec_columns(spec: ProcessSpec) -> tuple[str, str]:
    if spec.kind == "arma":
        phi = ";".join(_num(v) for v in spec.phi) or "0"
        theta = ";".join(_num(v) for v in spec.theta) or "0"
        return phi, theta
    return spec.label, ""


def cell_rows(res: CellResult, per_order: bool = True) -> list[Row]:
    phi, theta = spec_columns(res.spec)
    base = (phi, theta, res.n, res.K_n)
    rows = [Row(*base, "min_m_hat", res.min_m_hat, res.min_m_hat_se),
            Row(*base, "dropped", float(res.dropped), 0.0)]
    for label, st in res.criteria.items():
        rows += [
            Row(*base, f"pe:{label}", st.pe, st.pe_se),
            Row(*base, f"pei:{label}", st.pei, st.pei_se),
            Row(*base, f"r_star:{label}", st.r_star, st.r_star_se),
            Row(*base, f"r_star_I:{label}", st.r_star_I, st.r_star_I_se),
        ]
    if per_order:
        for k in range(1, res.K_n + 1):
            rows += [
                Row(*base, f"m_hat:k={k}", float(res.m_hat[k - 1]), float(res.m_hat_se[k - 1])),
                Row(*base, f"m_hat_I:k={k}", float(res.m_hat_I[k - 1]), float(res.m_hat_I_se[k - 1])),
            ]
        for label, st in res.criteria.items():
            for k in range(1, res.K_n + 1):
                rows.append(Row(*base, f"khat_count:{label}:k={k}", float(st.histogram[k - 1]), 0.0))
    return rows


def write_rows(rows: Sequence[Row], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.phi0, r.theta0, r.n, r.K_n, r.statistic, repr(float(r.value)), repr(float(r.stderr))])


def _cells_arg(cells):
    return list(STANDARD_CELLS if cells is None else cells)


def table1(reps=20000, master_seed=1, phis=TABLE1_PHIS, thetas=TABLE1_THETAS, cells=None,
           jobs=1, mode="conditional") -> list[Row]:
    """PE of AIC (``pe:aic``) and ``gamma_opt`` for the ARMA(1,1) grid."""
    cells = _cells_arg(cells)
    run = cells if BASELINE_CELL in cells else [BASELINE_CELL] + cells
    rows = []
    for phi in phis:
        for theta in thetas:
            spec = ProcessSpec.arma11(phi, theta)
            cfg = ExperimentConfig(spec, run, reps, master_seed, [AIC], estimator_mode=mode, jobs=jobs)
            results = run_cells(cfg)
            base = next(r for r in results if r.cell == BASELINE_CELL)
            ratios = gamma_opt(results, base)
            for res, (g, g_se) in zip(results, ratios):
                if res.cell not in cells:
                    continue
                st = res.stats(AIC)
                rows.append(Row(_num(phi), _num(theta), res.n, res.K_n, "pe:aic", st.pe, st.pe_se))
                rows.append(Row(_num(phi), _num(theta), res.n, res.K_n, "gamma_opt", g, g_se))
    return rows


def ma1_results(reps=20000, master_seed=1, thetas=MA_THETAS, cells=None, jobs=1,
                mode="conditional") -> dict[float, list[CellResult]]:
    out = {}
    for theta in thetas:
        cfg = ExperimentConfig(ProcessSpec.ma1(theta), _cells_arg(cells), reps, master_seed, [AIC],
                               estimator_mode=mode, jobs=jobs)
        out[theta] = run_cells(cfg)
    return out


def _ma1_rows(results, attr, statistic) -> list[Row]:
    rows = []
    for theta, cell_results in results.items():
        for res in cell_results:
            st = res.stats(AIC)
            rows.append(Row("0", _num(theta), res.n, res.K_n, statistic,
                            getattr(st, attr), getattr(st, attr + "_se")))
    return rows


def table2(reps=20000, master_seed=1, thetas=MA_THETAS, cells=None, jobs=1, mode="conditional",
           results=None) -> list[Row]:
    """``r_star`` of AIC on MA(1) paths."""
    results = results or ma1_results(reps, master_seed, thetas, cells, jobs, mode)
    return _ma1_rows(results, "r_star", "r_star:aic")


def table3(reps=20000, master_seed=1, thetas=MA_THETAS, cells=None, jobs=1, mode="conditional",
           results=None) -> list[Row]:
    """``r_star_I`` of AIC on MA(1) paths."""
    results = results or ma1_results(reps, master_seed, thetas, cells, jobs, mode)
    return _ma1_rows(results, "r_star_I", "r_star_I:aic")


# ---------------------------------------------------------------------------
# Reference values and diff reports
# ---------------------------------------------------------------------------


def _norm_key(phi0, theta0, n, K, statistic):
    def norm(v):
        v = str(v).strip()
        try:
            return ";".join(_num(float(p)) for p in v.split(";")) if v else v
        except ValueError:
            return v

    return (norm(phi0), norm(theta0), int(n), int(K), statistic.strip())


def load_reference(source) -> dict:
    """Reference CSV (``phi0, theta0, n, K_n, statistic, value[, tol]``).

    ``source`` is a path or ``"bundled"`` for the bundled reference values.
    """
    if source == "bundled":
        text = resources.files("arselect").joinpath("data/reference_values.csv").read_text()
        lines = text.splitlines()
    else:
        with open(source, newline="") as fh:
            lines = fh.read().splitlines()
    ref = {}
    for rec in csv.DictReader(lines):
        try:
            key = _norm_key(rec["phi0"], rec["theta0"], rec["n"], rec["K_n"], rec["statistic"])
            tol = rec.get("tol")
            ref[key] = (float(rec["value"]), float(tol) if tol not in (None, "") else None)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"malformed reference row {rec}: {exc}") from None
    return ref


def diff_rows(rows: Sequence[Row], reference: dict, se_mult: float = 4.0, rel: float = 0.05) -> list[dict]:
    """Compare rows to a reference; the default band is ``se_mult*stderr + rel*|ref|``."""
    out = []
    for r in rows:
        key = _norm_key(r.phi0, r.theta0, r.n, r.K_n, r.statistic)
        if key not in reference:
            continue
        ref, tol = reference[key]
        band = tol if tol is not None else se_mult * r.stderr + rel * abs(ref)
        out.append(dict(row=r, reference=ref, diff=r.value - ref, band=band, ok=abs(r.value - ref) <= band))
    return out
