"""Command-line front end.

Each subcommand writes one JSON report (config echo, versions, results with
error estimates) and one plot-ready CSV.  Exit codes: 0 success, 1 input
error, 2 failed check.
"""

import argparse
import csv
import io
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .exponent import EXPONENT_NAMES, check_log_holder, exponent_from_spec
from .experiments import (DEFAULT_S_LIST, bbm_sweep, counterexample_run, majorant_check,
                          pointwise_limit_study)
from .fields import FIELD_NAMES, domain_from_spec, field_from_spec
from .quadrature import QuadratureSpec, fractional_modular
from .spaces import NotInSpaceError, k_constant, lebesgue_norm, sandwich_check

SCHEMA_VERSION = 1
COMMANDS = ("knp-table", "modular", "norm", "bbm-sweep", "pointwise", "majorant",
            "counterexample", "log-holder")
DOMAIN_NAMES = ("interval:<a>:<b>", "box:<n>:<a>:<b>", "ball:<n>:<R>", "annulus:<n>:<r>:<R>")
SPEC_KEYS = ("rel_tol", "abs_tol", "max_evals", "base_level", "grading_exponent", "s_cap",
             "angular_panels", "workers")

DEFAULTS = dict(
    field="bump:1:1", exponent="const:2", domain="interval:-2:2", n=None, s=None, eps=None,
    p=None, points=None, L=10.0, q=1.5, pbar=7 / 6, pinf=4.0, s0=0.5, r_out=8.0,
    format="json", output=None,
)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


def _floats(text):
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    items = [t for t in str(text).split(",") if t.strip()]
    try:
        return [float(t) for t in items]
    except ValueError:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise InputError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _points(text):
    """``0.3,0.5`` (scalars) or ``0.1 0.2;0.3 0.4`` (vectors separated by ';')."""
    if isinstance(text, (list, tuple)):
        return [np.atleast_1d(np.asarray(v, float)) for v in text]
    if ";" in text or " " in text.strip():
        return [np.array(_floats(chunk.replace(" ", ","))) for chunk in text.split(";") if chunk.strip()]
    return [np.array([v]) for v in _floats(text)]


def build_parser():
    ap = argparse.ArgumentParser(prog="varexp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON file with option values (or a previous report)")
    ap.add_argument("--field", help="field catalog name: " + ", ".join(FIELD_NAMES))
    ap.add_argument("--exponent", help="exponent catalog name: " + ", ".join(EXPONENT_NAMES))
    ap.add_argument("--domain", help="domain: " + ", ".join(DOMAIN_NAMES))
    ap.add_argument("--n", help="dimension(s), comma-separated for knp-table")
    ap.add_argument("--p", help="exponent values for knp-table")
    ap.add_argument("--s", help="s value(s), comma-separated")
    ap.add_argument("--eps", help="cutoff value(s), comma-separated")
    ap.add_argument("--points", help="sample points: 0.3,0.5 or '0.1 0.2;0.3 0.4'")
    ap.add_argument("--L", type=float, help="log-Hölder constant")
    ap.add_argument("--q", type=float, help="counterexample singularity order")
    ap.add_argument("--pbar", type=float, help="counterexample exponent near the diagonal")
    ap.add_argument("--pinf", type=float, help="counterexample exponent far from the diagonal")
    ap.add_argument("--s0", type=float, help="reference s for decay and majorant fits")
    ap.add_argument("--r-out", dest="r_out", type=float, help="counterexample outer radius")
    ap.add_argument("--rel-tol", dest="rel_tol", type=float)
    ap.add_argument("--abs-tol", dest="abs_tol", type=float)
    ap.add_argument("--max-evals", dest="max_evals", type=int)
    ap.add_argument("--base-level", dest="base_level", type=int)
    ap.add_argument("--grading-exponent", dest="grading_exponent", type=float)
    ap.add_argument("--s-cap", dest="s_cap", type=float)
    ap.add_argument("--angular-panels", dest="angular_panels", type=int)
    ap.add_argument("--workers", type=int, help="worker threads (default: VAREXP_THREADS)")
    ap.add_argument("--output", help="report path prefix; writes <prefix>.json and <prefix>.csv")
    ap.add_argument("--format", choices=("json", "csv"), help="what to print on stdout")
    return ap


def resolve_config(args):
    """Merge defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS)
    for key in SPEC_KEYS:
        cfg.setdefault(key, None)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config!r}: {exc}") from None
        if isinstance(loaded, dict) and "config" in loaded and "schema_version" in loaded:
            loaded = loaded["config"]
        if not isinstance(loaded, dict):
            raise InputError("config must be a JSON object")
        unknown = set(loaded) - set(cfg) - {"command"}
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
    for key, val in vars(args).items():
        if key in ("command", "config"):
            continue
        if val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    return cfg


def quad_spec(cfg):
    kw = {k: cfg[k] for k in SPEC_KEYS if cfg.get(k) is not None}
    try:
        return QuadratureSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from None


def _catalog(kind, text, n):
    lookup = {"field": field_from_spec, "exponent": exponent_from_spec}[kind]
    names = {"field": FIELD_NAMES, "exponent": EXPONENT_NAMES}[kind]
    try:
        return lookup(text, n)
    except KeyError:
        raise InputError(f"unknown {kind} {text!r}; known: {', '.join(names)}") from None


def _domain(cfg):
    try:
        return domain_from_spec(cfg["domain"])
    except KeyError:
        raise InputError(f"unknown domain {cfg['domain']!r}; known: {', '.join(DOMAIN_NAMES)}") from None


def _s_list(cfg, spec, default=None, single=False):
    if cfg.get("s") is None:
        if default is None:
            raise InputError("--s is required")
        vals = list(default)
    else:
        vals = _floats(cfg["s"])
    if not vals:
        raise InputError("s list is empty")
    bad = [s for s in vals if not 0 < s <= spec.s_cap]
    if bad:
        raise InputError(f"s values must lie in (0, {spec.s_cap}]: {bad}")
    if single and len(vals) != 1:
        raise InputError("this command takes a single --s value")
    return vals


def _setup(cfg):
    dom = _domain(cfg)
    n = dom.dimension
    return dom, _catalog("field", cfg["field"], n), _catalog("exponent", cfg["exponent"], n)


# ---------------------------------------------------------------------------
# commands: each returns (results dict, csv header, csv rows, check_ok)
# ---------------------------------------------------------------------------


def cmd_knp_table(cfg, spec):
    ns = _ints(cfg["n"] if cfg.get("n") is not None else "1,2,3")
    ps = _floats(cfg["p"] if cfg.get("p") is not None else "1.1,1.5,2,3,3.7")
    if not ns or not ps:
        raise InputError("n and p lists must be non-empty")
    rows = []
    for n in ns:
        for p in ps:
            k = k_constant(n, p)
            rows.append([n, p, k.value_gamma, k.value_sphere, k.rel_gap])
    header = ["n", "p", "k_gamma", "k_sphere", "rel_gap"]
    return {"table": [dict(zip(header, r)) for r in rows]}, header, rows, True


def cmd_modular(cfg, spec):
    dom, u, p = _setup(cfg)
    (s,) = _s_list(cfg, spec, single=True)
    eps = cfg.get("eps")
    eps = _floats(eps)[0] if eps is not None else None
    r = fractional_modular(u, dom, s, p, spec, inner_cutoff=eps)
    res = {"s": s, "modular": r.value, "error_estimate": r.error_estimate, "evals": r.evals,
           "cells": r.cells, "inconclusive": r.inconclusive, "truncation_note": r.truncation_note}
    header = ["s", "modular", "error_estimate"]
    return res, header, [[s, r.value, r.error_estimate]], True


def cmd_norm(cfg, spec):
    dom, u, p = _setup(cfg)
    (s,) = _s_list(cfg, spec, single=True)
    sw = sandwich_check(u, dom, s, p, spec)
    lp = lebesgue_norm(u, dom, p, spec)
    res = {"s": s, "lebesgue_norm": lp.norm, "lebesgue_modular_at_norm": lp.modular_at_norm,
           "seminorm": sw.seminorm, "seminorm_modular_at_norm": sw.modular_at_norm,
           "norm": lp.norm + sw.seminorm, "modular": sw.modular,
           "modular_error": sw.modular_error, "sandwich_lower": sw.lower,
           "sandwich_upper": sw.upper, "sandwich_tolerance": sw.tolerance,
           "sandwich_holds": sw.holds, "p_minus": sw.p_minus, "p_plus": sw.p_plus}
    header = ["s", "lebesgue_norm", "seminorm", "norm", "modular", "sandwich_lower",
              "sandwich_upper"]
    row = [s, lp.norm, sw.seminorm, lp.norm + sw.seminorm, sw.modular, sw.lower, sw.upper]
    return res, header, [row], sw.holds


def cmd_bbm_sweep(cfg, spec):
    dom, u, p = _setup(cfg)
    s_list = _s_list(cfg, spec, DEFAULT_S_LIST)
    rep = bbm_sweep(u, dom, p, s_list, spec, log_holder_L=cfg["L"])
    L = rep.local_limit.value
    rows = [[s, m.value, m.error_estimate, L, e]
            for s, m, e in zip(rep.s_values, rep.modulars, rep.rel_errors)]
    res = {"s_values": rep.s_values, "modulars": [m.value for m in rep.modulars],
           "error_estimates": [m.error_estimate for m in rep.modulars],
           "local_limit": L, "local_limit_error": rep.local_limit.error_estimate,
           "rel_errors": rep.rel_errors, "converging": rep.converging,
           "extrapolated_limit": rep.extrapolated_limit,
           "extrapolated_rel_error": rep.extrapolated_rel_error,
           "log_holder_verdict": None if rep.log_holder is None else rep.log_holder.verdict,
           "warnings": rep.warnings, "note": rep.note}
    return res, ["s", "modular", "error_estimate", "local_limit", "rel_error"], rows, True


def cmd_pointwise(cfg, spec):
    dom, u, p = _setup(cfg)
    s_list = _s_list(cfg, spec, DEFAULT_S_LIST)
    if cfg.get("points") is None:
        raise InputError("--points is required")
    study = pointwise_limit_study(u, _points(cfg["points"]), dom, p, s_list, spec)
    rows, table = [], []
    for row in study.rows:
        for s, v, e, ae in zip(study.s_values, row.values, row.errors, row.abs_errors):
            rows.append([" ".join(repr(c) for c in row.x), s, v, e, row.target, ae])
        table.append({"x": list(row.x), "target": row.target, "values": row.values,
                      "error_estimates": row.errors, "abs_errors": row.abs_errors,
                      "rel_errors": row.rel_errors, "monotone": row.monotone})
    res = {"s_values": study.s_values, "points": table, "flagged": [list(x) for x in study.flagged]}
    return res, ["x", "s", "F_s", "error_estimate", "target", "abs_error"], rows, True


def cmd_majorant(cfg, spec):
    dom, u, p = _setup(cfg)
    s_list = _s_list(cfg, spec, (0.9, 0.99))
    pts = _points(cfg["points"]) if cfg.get("points") is not None else (4.0, 8.0, 16.0)
    rep = majorant_check(u, dom, p, cfg["s0"], s_list, pts, spec)
    rows = []
    for s in [rep.s0, *rep.s_values]:
        for x, v, e, b in zip(rep.points, rep.values[s], rep.errors[s], rep.bound):
            rows.append([" ".join(repr(c) for c in x), s, v, e, b])
    res = {"s0": rep.s0, "s_values": rep.s_values, "points": [list(x) for x in rep.points],
           "constant": rep.constant, "exponent": rep.exponent, "radius": rep.radius,
           "bound": rep.bound, "violations": [list(v) for v in rep.violations], "ok": rep.ok}
    return res, ["x", "s", "F_s", "error_estimate", "bound"], rows, rep.ok


def cmd_counterexample(cfg, spec):
    n = _ints(cfg["n"])[0] if cfg.get("n") is not None else 2
    eps = _floats(cfg["eps"]) if cfg.get("eps") is not None else [1e-2, 1e-3, 1e-4]
    (s,) = _s_list(cfg, spec, (0.5,), single=True)
    rep = counterexample_run(n, cfg["q"], cfg["pbar"], cfg["pinf"], eps, s, spec, cfg["r_out"])
    rows = [[e, m, err, sb, sc] for e, m, err, sb, sc in
            zip(rep.cutoffs, rep.modulars, rep.errors, rep.sobolev_by_eps, rep.sobolev_cut)]
    res = {k: getattr(rep, k) for k in (
        "cutoffs", "modulars", "errors", "slope_vs_log", "decade_slopes", "sobolev_modular",
        "sobolev_error", "sobolev_by_eps", "sobolev_cut", "sobolev_change", "lebesgue_modular",
        "divergent_exponents", "not_in_space", "not_in_space_message", "verdict")}
    ok = rep.verdict == "diverges-log" and rep.not_in_space
    return res, ["eps", "modular", "error_estimate", "sobolev_modular", "sobolev_cut"], rows, ok


def cmd_log_holder(cfg, spec):
    dom = _domain(cfg)
    p = _catalog("exponent", cfg["exponent"], dom.dimension)
    rep = check_log_holder(p, dom, cfg["L"])
    res = {"max_ratio": rep.max_ratio, "worst_point": rep.worst_point.tolist(),
           "worst_radius": rep.worst_radius, "sample_count": rep.sample_count,
           "skipped": rep.skipped, "verdict": rep.verdict, "L": rep.L}
    header = ["max_ratio", "worst_radius", "sample_count", "skipped", "verdict"]
    row = [rep.max_ratio, rep.worst_radius, rep.sample_count, rep.skipped, rep.verdict]
    return res, header, [row], True


HANDLERS = {
    "knp-table": cmd_knp_table, "modular": cmd_modular, "norm": cmd_norm,
    "bbm-sweep": cmd_bbm_sweep, "pointwise": cmd_pointwise, "majorant": cmd_majorant,
    "counterexample": cmd_counterexample, "log-holder": cmd_log_holder,
}


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def fmt_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def to_json(obj, indent=0):
    """JSON with every float printed to 17 significant digits."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else json.dumps(fmt_float(x))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def versions():
    return {"varexp": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def run(cfg):
    """Execute a resolved config; returns (exit code, report dict, csv text)."""
    spec = quad_spec(cfg)
    results, header, rows, ok = HANDLERS[cfg["command"]](cfg, spec)
    report = {"schema_version": SCHEMA_VERSION, "command": cfg["command"],
              "config": {k: v for k, v in cfg.items() if k not in ("output", "format")},
              "versions": versions(), "results": results, "check_passed": bool(ok)}
    return (0 if ok else 2), report, to_csv(header, rows)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        code, report, table = run(cfg)
    except NotInSpaceError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2
    except (InputError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    text = to_json(report) + "\n"
    if cfg.get("output"):
        base = Path(cfg["output"])
        if base.suffix in (".json", ".csv"):
            base = base.with_suffix("")
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".json").write_text(text, encoding="utf-8")
        base.with_suffix(".csv").write_text(table, encoding="utf-8", newline="")
    sys.stdout.write(text if cfg.get("format", "json") == "json" else table)
    if code == 2:
        print("check failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
