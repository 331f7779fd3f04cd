"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical
degeneracy, 3 reference-diff failure (only with ``--reference``).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import logging
import os
import sys

import numpy as np

from . import config as cfgmod
from . import mc
from .criteria import CORE_CRITERIA, parse_criteria, score, write_scores
from .errors import (
    ConfigError,
    DegenerateFitError,
    InvalidSpecError,
    InvalidWindowError,
    NumericalDegeneracyError,
    PrecisionError,
    RankDegeneracyError,
)
from .fit import (
    decomposition_check,
    design_summary,
    fit_all_orders,
    innovation_identity_residual,
    normal_equation_residual,
)
from .process import autocovariances, simulate
from .theory import asymptotics_check, basin_profile, loss_curve, yule_walker

log = logging.getLogger("arselect")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_DIFF = 0, 1, 2, 3
IDENTITY_TOL = 1e-8
NORMAL_EQ_TOL = 1e-10


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _cells(text):
    return cfgmod.parse_cells(text)


def _spec_and_seed(args):
    if args.config:
        spec, seed = cfgmod.load_spec(args.config)
        if args.spec:
            raise ConfigError("give either --spec or --config, not both")
    elif args.spec:
        spec, seed = cfgmod.parse_spec(args.spec), None
    else:
        raise ConfigError("a process is required: use --spec or --config")
    if args.seed is not None:
        seed = args.seed
    return spec, 1 if seed is None else seed


def _kmax(args, n):
    K = args.kmax if args.kmax is not None else mc.default_K(n)
    if not 1 <= K < n:
        raise ConfigError(f"--kmax must satisfy 1 <= kmax < n, got {K} with n={n}")
    return K


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        try:
            fh = open(path, "w", newline="")
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc.strerror}") from None
        with fh:
            yield fh


def _load_path(args):
    if args.input:
        try:
            x = np.loadtxt(args.input, delimiter=",", skiprows=1, usecols=1, ndmin=1)
        except OSError:
            raise ConfigError(f"input file not found: {args.input}") from None
        except ValueError as exc:
            raise ConfigError(f"malformed path CSV {args.input}: {exc}") from None
        return x
    spec, seed = _spec_and_seed(args)
    if args.n is None:
        raise ConfigError("--n is required when simulating")
    return simulate(spec, args.n, seed).x


# -- commands ------------------------------------------------------------------


def cmd_simulate(args):
    spec, seed = _spec_and_seed(args)
    if args.n is None or args.n < 1:
        raise ConfigError("--n must be a positive integer")
    path = simulate(spec, args.n, seed, args.burnin)
    with _output(args.out) as fh:
        path.to_csv(fh)
    return EXIT_OK


def cmd_fit(args):
    x = _load_path(args)
    fits = fit_all_orders(design_summary(x, _kmax(args, x.size)))
    with _output(args.out) as fh:
        fits.to_csv(fh)
    return EXIT_OK


def cmd_select(args):
    x = _load_path(args)
    fits = fit_all_orders(design_summary(x, _kmax(args, x.size)))
    crits = parse_criteria(args.criteria) if args.criteria else list(CORE_CRITERIA)
    results = [score(c, fits) for c in crits]
    if args.out:
        with _output(args.out) as fh:
            write_scores(results, fh)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["criterion", "k_hat"])
    for r in results:
        w.writerow([r.criterion.label, r.k_hat])
    return EXIT_OK


def _curve(args):
    spec, _ = _spec_and_seed(args)
    if args.n is None:
        raise ConfigError("--n is required")
    return loss_curve(spec, args.n, _kmax(args, args.n), args.alpha)


def cmd_theory_curve(args):
    curve = _curve(args)
    with _output(args.out) as fh:
        curve.to_csv(fh)
    return EXIT_OK


def cmd_basin(args):
    curve = _curve(args)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "ratio", "k_star"])
        for k, ratio in basin_profile(curve):
            w.writerow([k, repr(ratio), curve.k_star])
    return EXIT_OK


def cmd_identity_check(args):
    spec, seed = _spec_and_seed(args)
    n = args.n or 200
    K = _kmax(args, n)
    gamma = autocovariances(spec, K)
    curve = loss_curve(spec, n, K)
    projs = [yule_walker(gamma, k) for k in range(1, K + 1)]
    worst_dec = worst_ne = worst_inn = 0.0
    for p in range(args.paths):
        path = simulate(spec, n, mc.seed_stream(seed, 0, p))
        fits = fit_all_orders(design_summary(path, K))
        worst_ne = max(worst_ne, normal_equation_residual(fits))
        for k, proj in enumerate(projs, start=1):
            worst_dec = max(worst_dec, decomposition_check(path, proj, fits, curve, k))
            worst_inn = max(worst_inn, innovation_identity_residual(path, proj, fits, k))
    print(f"decomposition_max_residual,{worst_dec:.3e}")
    print(f"normal_equation_max_residual,{worst_ne:.3e}")
    print(f"innovation_identity_max_residual,{worst_inn:.3e}")
    ok = worst_dec <= IDENTITY_TOL and worst_inn <= IDENTITY_TOL and worst_ne <= NORMAL_EQ_TOL
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_asymptotics_check(args):
    spec, _ = _spec_and_seed(args)
    grid = [int(v) for v in _floats(args.grid)]
    try:
        rows = asymptotics_check(spec, grid, args.fit_at)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "K_n", "k_star", "formula", "band", "ok"])
        for r in rows:
            w.writerow([r["N"], r["K_n"], r["k_star"], repr(r["formula"]), repr(r["band"]), int(r["ok"])])
    return EXIT_OK


def _emit(rows, args):
    with _output(args.out) as fh:
        mc.write_rows(rows, fh)
    if not args.reference:
        return EXIT_OK
    report = mc.diff_rows(rows, mc.load_reference(args.reference))
    if not report:
        log.warning("no rows matched the reference file")
    bad = 0
    for item in report:
        r = item["row"]
        flag = "ok" if item["ok"] else "FAIL"
        print(f"{flag} {r.phi0} {r.theta0} {r.n}/{r.K_n} {r.statistic}: "
              f"{r.value:.4f} vs {item['reference']:.4f} (band {item['band']:.4f})", file=sys.stderr)
        bad += not item["ok"]
    return EXIT_DIFF if bad else EXIT_OK


def cmd_table1(args):
    rows = mc.table1(args.reps, args.seed if args.seed is not None else 1,
                     phis=_floats(args.phi) if args.phi else mc.TABLE1_PHIS,
                     thetas=_floats(args.theta) if args.theta else mc.TABLE1_THETAS,
                     cells=_cells(args.cells) if args.cells else None, jobs=args.jobs, mode=args.mode)
    return _emit(rows, args)


def _ma_table(args, fn):
    rows = fn(args.reps, args.seed if args.seed is not None else 1,
              thetas=_floats(args.theta) if args.theta else mc.MA_THETAS,
              cells=_cells(args.cells) if args.cells else None, jobs=args.jobs, mode=args.mode)
    return _emit(rows, args)


def cmd_table2(args):
    return _ma_table(args, mc.table2)


def cmd_table3(args):
    return _ma_table(args, mc.table3)


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    cfg = cfgmod.load_experiment(
        args.config,
        reps=args.reps, master_seed=args.seed, jobs=args.jobs,
        estimator_mode=args.mode, criteria=parse_criteria(args.criteria) if args.criteria else None,
        cells=_cells(args.cells) if args.cells else None,
    )
    cells = list(cfg.cells)
    if cfg.baseline_cell not in cells:
        cells = [cfg.baseline_cell] + cells
    results = mc.run_cells(cfg, cells)
    base = next(r for r in results if r.cell == cfg.baseline_cell)
    rows = []
    for res, (g, g_se) in zip(results, mc.gamma_opt(results, base)):
        if res.cell not in cfg.cells:
            continue
        phi, theta = mc.spec_columns(res.spec)
        rows += mc.cell_rows(res)
        rows.append(mc.Row(phi, theta, res.n, res.K_n, "gamma_opt", g, g_se))
    return _emit(rows, args)


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="arselect", description="Least-squares AR order selection experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    proc = _Parser(add_help=False)
    proc.add_argument("--spec", help="process string, e.g. ma1:0.8 or arma11:0.9,0.6")
    proc.add_argument("--config", help="INI file with a [process] section")
    proc.add_argument("--seed", type=int)
    proc.add_argument("--out", help="output CSV (default stdout)")

    order = _Parser(add_help=False)
    order.add_argument("--n", type=int)
    order.add_argument("--kmax", type=int, help="maximal order K_n (default floor(sqrt(n)))")

    data = _Parser(add_help=False)
    data.add_argument("--input", help="path CSV with columns t,x instead of simulating")

    experiment = _Parser(add_help=False)
    experiment.add_argument("--reps", type=int, default=20000)
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--jobs", type=int, default=1)
    experiment.add_argument("--mode", choices=("conditional", "raw"), default="conditional")
    experiment.add_argument("--cells", help="comma list of n:K_n pairs")
    experiment.add_argument("--out", help="output CSV (default stdout)")
    experiment.add_argument("--reference", help="reference CSV, or 'bundled' for the bundled values")

    s = sub.add_parser("simulate", parents=[proc, order], help="write a simulated path")
    s.add_argument("--burnin", type=int)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("fit", parents=[proc, order, data], help="fit every order up to K_n")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", parents=[proc, order, data], help="selected order per criterion")
    s.add_argument("--criteria", help="comma list, e.g. aic,fpe,aic_alpha:3")
    s.set_defaults(func=cmd_select)

    for name, fn, text in (("theory-curve", cmd_theory_curve, "theoretical loss curve and k_star"),
                           ("basin", cmd_basin, "loss growth away from k_star")):
        s = sub.add_parser(name, parents=[proc, order], help=text)
        s.add_argument("--alpha", type=float, default=2.0)
        s.set_defaults(func=fn)

    s = sub.add_parser("identity-check", parents=[proc, order], help="max residual of the exact identities")
    s.add_argument("--paths", type=int, default=100)
    s.set_defaults(func=cmd_identity_check)

    s = sub.add_parser("asymptotics-check", parents=[proc], help="brute-force k_star vs closed forms")
    s.add_argument("--grid", default="1000,10000,100000")
    s.add_argument("--fit-at", type=int, default=200)
    s.set_defaults(func=cmd_asymptotics_check)

    s = sub.add_parser("table1", parents=[experiment], help="PE and gamma_opt on the ARMA(1,1) grid")
    s.add_argument("--phi")
    s.add_argument("--theta")
    s.set_defaults(func=cmd_table1)

    for name, fn, text in (("table2", cmd_table2, "MA(1) r_star, same realization"),
                           ("table3", cmd_table3, "MA(1) r_star_I, independent realization")):
        s = sub.add_parser(name, parents=[experiment], help=text)
        s.add_argument("--theta")
        s.set_defaults(func=fn)

    s = sub.add_parser("run", parents=[experiment], help="run an experiment config")
    s.add_argument("--config", required=True)
    s.add_argument("--criteria")
    s.set_defaults(func=cmd_run, reps=None)
    return p


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
            raise ConfigError("--jobs must be >= 1")
        return args.func(args)
    except (ConfigError, InvalidSpecError, InvalidWindowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankDegeneracyError, NumericalDegeneracyError, DegenerateFitError, PrecisionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:  # output piped into head and friends
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
