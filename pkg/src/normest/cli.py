"""Command-line front end: ``normest {rates,bandwidth,estimate,simulate,verify}``.

Configuration comes from a flat TOML file (``--config``) with command-line
flags taking precedence.  Output is JSON (floats at 17 significant digits),
an aligned table, or RFC-4180 CSV.  Exit codes: 0 ok, 1 failed check,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .checks import SUITES, run_suite
from .estimator import KernelConfig, Sample, default_workers, estimate
from .nikolskii import ClassSpec, SpecError, bandwidth, classify_regime, default_ell
from .oracle import DENSITIES, exact_norm
from .simulate import ExperimentConfig, mann_kendall_upward, run_risk_experiment

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2
SPEC_KEYS = ("d", "beta", "r", "L", "p", "q", "Q")


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written to 17 significant digits."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _table(rows: list, out) -> None:
    if not rows:
        return
    keys = list(rows[0])
    cells = [[k for k in keys]] + [[_cell(r[k]) for k in keys] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(keys))]
    for row in cells:
        out.write("  ".join(c.rjust(w) for c, w in zip(row, widths)).rstrip() + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return ",".join(_cell(x) for x in v)
    return str(v)


def _emit(record: dict, fmt: str, out) -> None:
    if fmt == "json":
        out.write(dumps(record) + "\n")
    else:
        _table([{k: v for k, v in record.items() if not isinstance(v, dict)}], out)


def _fail(msg: str, out) -> int:
    out.write(dumps({"error": msg}) + "\n")
    return EXIT_USAGE


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with p.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc


def _merged(args, cfg: dict) -> dict:
    out = dict(cfg)
    for key, val in vars(args).items():
        if val is not None and key not in ("func", "command", "config"):
            out[key] = val
    return out


def _spec(cfg: dict) -> ClassSpec:
    return ClassSpec.from_record({k: cfg[k] for k in SPEC_KEYS if k in cfg})


def _kernel(cfg: dict) -> KernelConfig:
    ell = cfg.get("ell", "auto")
    if ell != "auto":
        try:
            ell = int(ell)
        except (TypeError, ValueError):
            raise ConfigError(f"ell must be a positive integer or 'auto', got {ell!r}") from None
    return KernelConfig(base=str(cfg.get("base", "epanechnikov")), ell=ell)


def _int_list(x) -> list:
    if isinstance(x, (list, tuple)):
        return [int(v) for v in x]
    return [int(v) for v in str(x).split(",") if v.strip()]


def _float_list(x) -> list:
    if isinstance(x, (list, tuple)):
        return [float(v) for v in x]
    return [float(v) for v in str(x).split(",") if v.strip()]


def _workers(cfg: dict) -> int:
    w = cfg.get("workers")
    return default_workers() if w is None else max(1, int(w))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_rates(cfg: dict, out) -> int:
    spec = _spec(cfg)
    plan = classify_regime(spec)
    rec = {"spec": spec.to_record(), **plan.to_dict()}
    ns = _int_list(cfg.get("n", []))
    if cfg.get("format", "json") == "table":
        rows = [{"regime": plan.regime.value, "theta": float(plan.theta), "theta_star": float(plan.theta_star),
                 "n": n, "phi_n": plan.phi_n(n)} for n in ns] or [
                {"regime": plan.regime.value, "theta": float(plan.theta), "theta_star": float(plan.theta_star)}]
        _table(rows, out)
    else:
        rec["phi_n"] = [{"n": n, "phi_n": plan.phi_n(n)} for n in ns]
        out.write(dumps(rec) + "\n")
    return EXIT_OK


def cmd_bandwidth(cfg: dict, out) -> int:
    spec = _spec(cfg)
    if "n" not in cfg:
        raise ConfigError("bandwidth needs --n")
    plan = bandwidth(spec, int(_int_list(cfg["n"])[0]))
    _emit({"spec": spec.to_record(), **plan.to_dict()}, cfg.get("format", "json"), out)
    return EXIT_OK


def read_sample_csv(path: str, header: bool = False) -> Sample:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"sample file not found: {path}")
    with p.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if header:
        rows = rows[1:]
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ConfigError(f"sample file {path} has no data rows")
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"non-numeric entry in {path}: {exc}") from None
    return Sample(data)


def cmd_estimate(cfg: dict, out) -> int:
    if "input" not in cfg:
        raise ConfigError("estimate needs --input")
    S = read_sample_csv(cfg["input"], bool(cfg.get("header", False)))
    spec = _spec({"d": S.d, **cfg})
    bw = cfg.get("bandwidth")
    if bw is not None:
        bw = _float_list(bw)
        if len(bw) != S.d:
            raise ConfigError(f"--bandwidth needs {S.d} values, got {len(bw)}")
    res = estimate(S, spec, _kernel(cfg), bandwidth=bw, workers=_workers(cfg))
    rec = res.to_dict()
    rec["theta_star"] = float(classify_regime(spec).theta_star)
    _emit(rec, cfg.get("format", "json"), out)
    return EXIT_OK


def experiment_from_config(cfg: dict) -> ExperimentConfig:
    for key in ("density", "n_grid", "replicates"):
        if key not in cfg:
            raise ConfigError(f"simulate config is missing {key!r}")
    if cfg["density"] not in DENSITIES:
        raise ConfigError(f"unknown density {cfg['density']!r}; choose from {sorted(DENSITIES)}")
    h = cfg.get("h")
    return ExperimentConfig(
        density=cfg["density"],
        spec=_spec(cfg),
        n_grid=tuple(_int_list(cfg["n_grid"])),
        replicates=int(cfg["replicates"]),
        seed=int(cfg.get("seed", 0)),
        bandwidth_mode=str(cfg.get("bandwidth_mode", "plan")),
        h=None if h is None else tuple(_float_list(h)),
        kernel=_kernel(cfg),
        density_params=dict(cfg.get("density_params", {})),
    )


def summarize_risk(table, slope_margin: float = 0.12) -> dict:
    checks = {
        "rate": table.fitted_slope <= -table.theta_star + slope_margin,
        "risk_reduction": table.risk_reduction_violations() == 0,
        "decomposition": all(g <= 5 for g in table.decomposition_gaps()),
    }
    summary = {
        "fitted_slope": table.fitted_slope,
        "slope_ci": list(table.slope_ci),
        "theta_star": table.theta_star,
        "norm": table.norm,
        "risk_reduction_violations": table.risk_reduction_violations(),
    }
    if table.theta_star == 0.5:
        pval = mann_kendall_upward([r.empirical_risk * math.sqrt(r.n) for r in table.rows])
        summary["mann_kendall_p"] = pval
        checks["trend_free"] = pval >= 0.05
    summary["checks"] = checks
    summary["passed"] = all(checks.values())
    return summary


def cmd_simulate(cfg: dict, out) -> int:
    exp = experiment_from_config(cfg)
    table = run_risk_experiment(exp, workers=_workers(cfg))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\r\n").writerows(
        [[_cell(v) for v in row] for row in table.to_csv_rows()])
    summary = summarize_risk(table)
    if cfg.get("output"):
        Path(cfg["output"]).write_text(buf.getvalue(), newline="")
    else:
        out.write(buf.getvalue())
    text = dumps(summary) + "\n"
    if cfg.get("summary"):
        Path(cfg["summary"]).write_text(text)
    else:
        out.write(text)
    return EXIT_OK if summary["passed"] else EXIT_CHECK


def cmd_verify(cfg: dict, out) -> int:
    suite = cfg.get("suite", "all")
    names = list(SUITES) if suite == "all" else [suite]
    if any(n not in SUITES for n in names):
        raise ConfigError(f"unknown suite {suite!r}; choose from {sorted(SUITES)} or 'all'")
    results = [c for n in names for c in run_suite(n)]
    if cfg.get("format", "table") == "json":
        out.write(dumps({"checks": [c.to_dict() for c in results],
                         "passed": all(c.passed for c in results)}) + "\n")
    else:
        _table([{"suite": c.suite, "check": c.name, "value": c.value, "threshold": c.threshold,
                 "status": "pass" if c.passed else "FAIL"} for c in results], out)
    return EXIT_OK if all(c.passed for c in results) else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _spec_flags(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("class spec (overrides --config)")
    g.add_argument("--d", type=int)
    g.add_argument("--beta", help="comma-separated smoothness per axis")
    g.add_argument("--r", help="comma-separated integrability per axis; 'inf' allowed")
    g.add_argument("--L", help="comma-separated radii per axis")
    g.add_argument("--p", type=int)
    g.add_argument("--q", help="sup-norm index; 'inf' allowed")
    g.add_argument("--Q", type=float)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="normest", description="Lp-norm estimation of a density from samples.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat TOML config file")
        sp.set_defaults(func=func)
        return sp

    sp = add("rates", cmd_rates, "regime, theta, theta* and phi_n")
    _spec_flags(sp)
    sp.add_argument("--n", help="comma-separated sample sizes for phi_n")
    sp.add_argument("--format", choices=("json", "table"))

    sp = add("bandwidth", cmd_bandwidth, "rate-optimal bandwidth plan")
    _spec_flags(sp)
    sp.add_argument("--n")
    sp.add_argument("--format", choices=("json", "table"))

    sp = add("estimate", cmd_estimate, "estimate the norm from a CSV sample")
    _spec_flags(sp)
    sp.add_argument("--input", help="CSV with n rows and d numeric columns")
    sp.add_argument("--header", action="store_true", default=None)
    sp.add_argument("--bandwidth", help="comma-separated h override (d values)")
    sp.add_argument("--base", choices=("box", "epanechnikov"))
    sp.add_argument("--ell")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--format", choices=("json", "table"))

    sp = add("simulate", cmd_simulate, "Monte Carlo risk experiment")
    _spec_flags(sp)
    sp.add_argument("--density", choices=sorted(DENSITIES))
    sp.add_argument("--n-grid", dest="n_grid")
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--bandwidth-mode", dest="bandwidth_mode", choices=("plan", "fixed"))
    sp.add_argument("--h")
    sp.add_argument("--base", choices=("box", "epanechnikov"))
    sp.add_argument("--ell")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--output", help="CSV path (default stdout)")
    sp.add_argument("--summary", help="JSON summary path (default stdout)")

    sp = add("verify", cmd_verify, "run invariant suites")
    sp.add_argument("--suite", choices=sorted(SUITES) + ["all"])
    sp.add_argument("--format", choices=("json", "table"))
    return ap


def main(argv: Optional[list] = None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        cfg = _merged(args, load_config(args.config))
        return args.func(cfg, out)
    except (SpecError, ConfigError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
        return _fail(f"missing key {msg!r}" if isinstance(exc, KeyError) else msg, out)


if __name__ == "__main__":
    sys.exit(main())
