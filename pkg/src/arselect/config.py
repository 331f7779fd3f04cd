"""Process specs and experiment configs: compact strings and INI files.

Spec strings (``--spec``)::

    whitenoise            ar1:0.5            ma1:0.8
    arma11:0.9,0.6        arma:phi=0.5,-0.2;theta=0.8
    expdecay:0.5,0.8      algdecay:0.5,2     ar:0.5,-0.25

Any of them accepts a trailing ``@sigma2`` (``ma1:0.8@2``).

INI schema::

    [process]
    kind = arma            ; arma | explicit_ar
    phi = 0.5              ; comma lists
    theta = 0.8
    sigma2 = 1
    rule = exponential     ; explicit_ar only: exponential | algebraic | list
    c = 0.5
    rho = 0.8
    gamma_exp = 2
    coeffs = 0.5, -0.25
    seed = 1

    [experiment]
    cells = 60:7, 120:10, 200   ; bare n uses K_n = floor(sqrt(n))
    reps = 2000
    criteria = aic, fpe, aic_alpha:3
    mode = conditional          ; conditional | raw
    baseline = 60:7
    jobs = 1
"""

from __future__ import annotations

import configparser
import io
from typing import Optional

from .criteria import AIC, parse_criteria
from .errors import ConfigError, InvalidSpecError
from .mc import BASELINE_CELL, STANDARD_CELLS, ExperimentConfig, default_K
from .process import ProcessSpec

PROCESS_KEYS = {"kind", "phi", "theta", "sigma2", "rule", "c", "rho", "gamma_exp", "coeffs", "seed"}
EXPERIMENT_KEYS = {"cells", "reps", "criteria", "mode", "baseline", "jobs", "seed"}


def _floats(text: str, what: str) -> tuple[float, ...]:
    items = [t for t in text.replace(" ", "").split(",") if t]
    try:
        return tuple(float(t) for t in items)
    except ValueError:
        raise ConfigError(f"{what}: expected a comma list of numbers, got {text!r}") from None


def _float(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{what}: expected a number, got {text!r}") from None


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _build(factory, *args, **kw) -> ProcessSpec:
    try:
        return factory(*args, **kw)
    except InvalidSpecError as exc:
        raise ConfigError(f"invalid process: {exc}") from None


def parse_spec(text: str) -> ProcessSpec:
    """Parse a compact spec string (see module docstring)."""
    body, _, var = text.strip().partition("@")
    sigma2 = _float(var, "sigma2") if var else 1.0
    name, _, arg = body.partition(":")
    name = name.strip().lower()
    if name in ("whitenoise", "wn"):
        if arg:
            raise ConfigError("whitenoise takes no parameters")
        return _build(ProcessSpec.white_noise, sigma2)
    if name == "arma":
        parts = {}
        for item in filter(None, arg.split(";")):
            key, eq, val = item.partition("=")
            if not eq or key.strip() not in ("phi", "theta"):
                raise ConfigError(f"arma spec expects phi=...;theta=..., got {text!r}")
            parts[key.strip()] = _floats(val, key.strip())
        return _build(ProcessSpec.arma, parts.get("phi", ()), parts.get("theta", ()), sigma2)
    vals = _floats(arg, name)
    expected = {"ar1": 1, "ma1": 1, "arma11": 2, "expdecay": 2, "algdecay": 2}
    if name in expected and len(vals) != expected[name]:
        raise ConfigError(f"{name} takes {expected[name]} parameter(s), got {len(vals)}")
    if name == "ar1":
        return _build(ProcessSpec.ar1, vals[0], sigma2)
    if name == "ma1":
        return _build(ProcessSpec.ma1, vals[0], sigma2)
    if name == "arma11":
        return _build(ProcessSpec.arma11, *vals, sigma2)
    if name == "expdecay":
        return _build(ProcessSpec.exponential, *vals, sigma2)
    if name == "algdecay":
        return _build(ProcessSpec.algebraic, *vals, sigma2)
    if name == "ar":
        return _build(ProcessSpec.explicit, vals, sigma2)
    raise ConfigError(f"unknown process {name!r} in spec {text!r}")


def spec_from_section(sec) -> ProcessSpec:
    unknown = set(sec) - PROCESS_KEYS
    if unknown:
        raise ConfigError(f"unknown [process] keys: {', '.join(sorted(unknown))}")
    kind = sec.get("kind", "arma").strip()
    sigma2 = _float(sec.get("sigma2", "1"), "sigma2")
    if kind == "arma":
        return _build(ProcessSpec.arma, _floats(sec.get("phi", ""), "phi"),
                      _floats(sec.get("theta", ""), "theta"), sigma2)
    if kind != "explicit_ar":
        raise ConfigError(f"unknown process kind {kind!r}")
    rule = sec.get("rule", "").strip()
    if rule == "exponential":
        return _build(ProcessSpec.exponential, _float(sec.get("c", ""), "c"), _float(sec.get("rho", ""), "rho"), sigma2)
    if rule == "algebraic":
        return _build(ProcessSpec.algebraic, _float(sec.get("c", ""), "c"),
                      _float(sec.get("gamma_exp", ""), "gamma_exp"), sigma2)
    if rule == "list":
        return _build(ProcessSpec.explicit, _floats(sec.get("coeffs", ""), "coeffs"), sigma2)
    raise ConfigError(f"unknown coefficient rule {rule!r}")


def parse_cells(text: str) -> list[tuple[int, int]]:
    cells = []
    for item in filter(None, (t.strip() for t in text.split(","))):
        n, sep, K = item.partition(":")
        n = _int(n, "cell n")
        cells.append((n, _int(K, "cell K_n") if sep else default_K(n)))
    if not cells:
        raise ConfigError("no cells given")
    return cells


def _read(source) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        if hasattr(source, "read"):
            cp.read_file(source)
        else:
            with open(source) as fh:
                cp.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {source}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    return cp


def load_spec(source) -> tuple[ProcessSpec, Optional[int]]:
    """Spec and optional seed from the ``[process]`` section."""
    cp = _read(source)
    if not cp.has_section("process"):
        raise ConfigError("config lacks a [process] section")
    sec = cp["process"]
    seed = _int(sec["seed"], "seed") if "seed" in sec else None
    return spec_from_section(sec), seed


def load_experiment(source, **overrides) -> ExperimentConfig:
    """Full experiment from an INI file; keyword overrides win when not None."""
    cp = _read(source)
    if not cp.has_section("process"):
        raise ConfigError("config lacks a [process] section")
    spec = spec_from_section(cp["process"])
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    unknown = set(exp) - EXPERIMENT_KEYS
    if unknown:
        raise ConfigError(f"unknown [experiment] keys: {', '.join(sorted(unknown))}")
    seed = exp.get("seed", cp["process"].get("seed", "1"))
    kw = dict(
        spec=spec,
        cells=parse_cells(exp["cells"]) if "cells" in exp else list(STANDARD_CELLS),
        reps=_int(exp.get("reps", "2000"), "reps"),
        master_seed=_int(seed, "seed"),
        criteria=parse_criteria(exp["criteria"]) if "criteria" in exp else [AIC],
        baseline_cell=parse_cells(exp["baseline"])[0] if "baseline" in exp else BASELINE_CELL,
        estimator_mode=exp.get("mode", "conditional").strip(),
        jobs=_int(exp.get("jobs", "1"), "jobs"),
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kw)


def _join(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def spec_to_ini(spec: ProcessSpec, seed: Optional[int] = None) -> str:
    cp = configparser.ConfigParser()
    sec = {"kind": spec.kind, "sigma2": repr(spec.sigma2)}
    if spec.kind == "arma":
        sec.update(phi=_join(spec.phi), theta=_join(spec.theta))
    else:
        sec["rule"] = spec.rule
        if spec.rule == "exponential":
            sec.update(c=repr(spec.c), rho=repr(spec.rho))
        elif spec.rule == "algebraic":
            sec.update(c=repr(spec.c), gamma_exp=repr(spec.gamma_exp))
        else:
            sec["coeffs"] = _join(spec.coeffs)
    if seed is not None:
        sec["seed"] = str(seed)
    cp["process"] = sec
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
