"""Command-line runner producing self-describing JSON experiment records.

Every subcommand wraps one library operation and prints a single RunRecord
(JSON) or a flat table (CSV).  Exit codes: 0 when the computed quantity
satisfies the inequality or identity being checked, 2 when it does not, 1
for usage errors (unknown flags, inadmissible parameters, unreadable
config).  ``sweep`` runs a Cartesian grid of one subcommand from a JSON or
YAML config and writes one JSON line per task plus a summary line.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernels
from .algebraic import DEFAULT_SEED, estimate_optimal_c, verify_lower_bound
from .criticality import (
    DeficitCurve,
    decay_study,
    deficit_free,
    deficit_free_quadrature,
    hardy_log_terms,
)
from .fields import (
    AdmissibilityError,
    Params,
    WeightSpec,
    hardy_constant,
    make_exterior_log_grid,
    make_log_radial_grid,
    make_polar_grid,
)
from .magnetic import (
    FIELD_KINDS,
    PROBES,
    FieldSpec,
    ab_hardy_upper_bound,
    conjecture_probe,
    f_max,
    mean_value_check,
    mu_R_estimate,
    mu_R_oracle_p2,
    numeric_f_max,
)
from .profiles import BumpSum, random_bump_sum, random_polar_function
from .supersolution import (
    RadialProfile,
    exterior_hardy_check,
    exterior_sharpness_probe,
    kelvin_check,
    remainder_inequality_check,
    residual_profile,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2
STATUSES = ("ok", "violation", "error")


class UsageError(Exception):
    """Bad flags, inadmissible parameters or an unreadable config."""


# ---------------------------------------------------------------------------
# records


@dataclass
class RunRecord:
    """One experiment: what was asked, what came out, and how it was run."""

    task: str
    params: dict
    result: dict
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.task, str) or not self.task:
            raise ValueError("task must be a non-empty string")
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}, got {self.status!r}")
        for name in ("params", "result", "meta"):
            if not isinstance(getattr(self, name), dict):
                raise ValueError(f"{name} must be a dict")
        for key in ("seed", "grid", "tol", "wall_time", "version"):
            if key not in self.meta:
                raise ValueError(f"meta is missing {key!r}")

    def to_dict(self) -> dict:
        return {"task": self.task, "params": self.params, "result": self.result,
                "status": self.status, "meta": self.meta}

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        extra = set(d) - {"task", "params", "result", "status", "meta"}
        if extra:
            raise ValueError(f"unexpected record keys {sorted(extra)}")
        return cls(d["task"], d["params"], d["result"], d.get("status", "ok"), d.get("meta", {}))

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_dict(json.loads(text))


def _clean(x):
    """Plain JSON types; non-finite floats become strings so output stays valid JSON."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _flatten(prefix: str, x, out: dict) -> None:
    if isinstance(x, dict):
        for k, v in x.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(x, (list, tuple)) and any(isinstance(v, (dict, list, tuple)) for v in x):
        for i, v in enumerate(x):
            _flatten(f"{prefix}.{i}", v, out)
    else:
        out[prefix] = x


def record_to_csv(rec: RunRecord) -> str:
    """Curves become their rows; other records a key,value table of the result."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = rec.result.get("rows")
    if isinstance(rows, list) and rows and isinstance(rows[0], dict):
        cols = list(rows[0])
        w.writerow(cols)
        for row in rows:
            w.writerow([_clean(row[c]) for c in cols])
        return buf.getvalue()
    flat: dict = {}
    _flatten("", _clean(rec.result), flat)
    w.writerow(["key", "value"])
    for k, v in flat.items():
        w.writerow([k, json.dumps(v) if isinstance(v, (list, tuple)) else v])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# argument types


def _float_list(text: str) -> list:
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _mode_list(text: str) -> list:
    """Either lo:hi (inclusive) or a comma-separated list of integers."""
    try:
        if ":" in text:
            lo, hi = (int(s) for s in text.split(":"))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi or a list of integers, got {text!r}")


def _positive_int(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if n < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return n


def _params(args, **kw) -> Params:
    try:
        return Params(args.p, kw.get("d", getattr(args, "d", 2)), getattr(args, "beta", None), getattr(args, "R", None))
    except AdmissibilityError as exc:
        raise UsageError(str(exc))


def _require(ok: bool, message: str) -> None:
    if not ok:
        raise UsageError(message)


# ---------------------------------------------------------------------------
# tasks
#
# Each task takes the parsed flags and returns (result dict, satisfied, grid
# description, tolerance used, seed used or None).


def _rows(curve: DeficitCurve) -> dict:
    return curve.to_dict()


def task_hardy_free(args):
    par = _params(args)
    p, d = par.p, par.d
    eps = sorted(args.eps, reverse=True)
    _require(all(0 < e < 1 for e in eps), "--eps values must lie in (0, 1)")
    if p < d:
        tol = 1e-6 if args.tol is None else args.tol
        mu = hardy_constant(p, d)
        rows = []
        for e in eps:
            terms = hardy_log_terms(e, par)
            rows.append({"epsilon": e, "quotient": terms.quotient, "excess": terms.quotient / mu - 1.0})
        best = min(rows, key=lambda r: r["quotient"])
        result = {"value": best["quotient"], "witness": {"epsilon": best["epsilon"]}, "mu": mu,
                  "bound_direction": "upper-bound-on-inf", "family": "hardy-log", "rows": rows}
        ok = all(r["quotient"] >= mu - tol for r in rows)
        return result, ok, {"kind": "gauss-panels", "panels_per_piece": 64, "order": 16}, tol, None
    tol = 1e-8 if args.tol is None else args.tol
    n = args.grid_nodes or 1 << 14
    rows = []
    for e in eps:
        closed = deficit_free(e, par)
        quad = deficit_free_quadrature(e, par, n)
        rows.append({"epsilon": e, "deficit": closed, "quadrature": quad,
                     "deficit_x_log": closed * math.log(1.0 / e), "rel_diff": abs(quad - closed) / closed})
    result = {"value": rows[-1]["deficit"], "family": "plateau-log", "rows": rows,
              "decreasing": all(b["deficit"] < a["deficit"] for a, b in zip(rows, rows[1:]))}
    ok = all(r["rel_diff"] <= tol for r in rows) and result["decreasing"]
    return result, ok, {"kind": "simpson-log", "nodes": n}, tol, None


def task_hardy_exterior(args):
    par = _params(args)
    p, d = par.p, par.d
    R = 1.0 if args.R is None else args.R
    tol = 1e-8 if args.tol is None else args.tol
    n = args.grid_nodes or 1 << 13
    samples = 20 if args.samples is None else args.samples
    rng = np.random.default_rng(args.seed)
    grid = make_exterior_log_grid(R, 1e-3, 10.0, n, d)
    ratios = []
    for _ in range(samples):
        t_lo, t_hi = math.log(R) + math.log1p(1e-3), math.log(R) + math.log1p(9.0)
        u = random_bump_sum(rng, t_lo, t_hi).sample(grid)
        ratios.append(exterior_hardy_check(u, p, d, R, tol).ratio)
    rep_const = exterior_hardy_check(BumpSum.single(R * 1.5, R * 3.0).sample(grid), p, d, R, tol).constant
    result = {"value": min(ratios) if ratios else None, "constant": rep_const, "ratios": ratios,
              "bound_direction": "upper-bound-on-inf"}
    ok = all(r >= rep_const - tol for r in ratios)
    if p == d and args.eps:
        probe = exterior_sharpness_probe(d, sorted(args.eps, reverse=True))
        result["sharpness"] = [{"epsilon": e, "quotient": q} for e, q in zip(sorted(args.eps, reverse=True), probe)]
        ok = ok and all(q >= rep_const - tol for q in probe)
    return result, ok, {"kind": "exterior-log", "nodes": n, "ell": [1e-3, 10.0]}, tol, args.seed


def task_criticality(args):
    par = _params(args)
    _require(args.kind is not None, "--kind is required")
    eps = sorted(args.eps, reverse=True)
    _require(all(0 < e < 1 for e in eps), "--eps values must lie in (0, 1)")
    tol = 1e-10 if args.tol is None else args.tol
    try:
        curve = decay_study(args.kind, par, eps)
    except AdmissibilityError as exc:
        raise UsageError(str(exc))
    result = _rows(curve)
    norm = curve.normalized
    result["normalized_spread"] = float(norm.max() / norm.min()) if np.all(norm > 0) else None
    ok = all(r[1] >= -tol for r in curve.rows) and all(math.isfinite(r[2]) for r in curve.rows)
    return result, ok, {"kind": "gauss-panels" if args.kind == "hardy-log" else "closed-form"}, tol, None


def task_algebraic_constant(args):
    _require(args.p >= 2, "algebraic-constant needs --p >= 2")
    tol = 1e-10 if args.tol is None else args.tol
    est = estimate_optimal_c(args.p, tol=tol)
    floor = 1.0 / (2.0 ** (args.p - 1.0) - 1.0)
    result = est.to_dict()
    result["proven_floor"] = floor
    ok = est.value >= floor - 1e-12
    return result, ok, {"kind": "s-theta scan", "nodes": [est.samples]}, tol, None


def task_algebraic_verify(args):
    _require(args.p >= 2, "algebraic-verify needs --p >= 2")
    c = 1.0 / (2.0 ** (args.p - 1.0) - 1.0) if args.c is None else args.c
    _require(c > 0, "--c must be positive")
    n = 10**5 if args.samples is None else args.samples
    hit = verify_lower_bound(args.p, c, n, seed=args.seed)
    result = {"c": c, "samples": n, "counterexample": None if hit is None else hit.to_dict()}
    return result, hit is None, {"kind": "log-uniform magnitudes", "range": [1e-3, 1e3]}, 1e-12, args.seed


def task_ab_hardy(args):
    _require(args.beta is not None, "--beta is required")
    modes = args.modes or list(range(-5, 6))
    budget = 1500 if args.budget is None else args.budget
    try:
        est = ab_hardy_upper_bound(args.beta, args.p, modes=modes, budget=budget)
    except AdmissibilityError as exc:
        raise UsageError(str(exc))
    tol = 1e-3 if args.tol is None else args.tol
    result = est.to_dict()
    # the diamagnetic inequality puts the magnetic constant above the free one
    ok = est.value >= est.meta["free_constant"] - tol
    if args.p == 2:
        ok = ok and est.value >= est.meta["dist_sq"] - tol
    return result, ok, {"kind": "graded gauss panels in log r", "t_min": -40.0}, tol, None


def task_mean_value(args):
    _require(args.beta is not None, "--beta is required")
    _require(1 < args.p < 2, "mean-value needs 1 < --p < 2")
    n = 50 if args.samples is None else args.samples
    nr = args.grid_nodes or 400
    rng = np.random.default_rng(args.seed)
    grid = make_polar_grid(math.exp(-2.5), math.exp(2.5), nr, 64)
    ratios = []
    for _ in range(n):
        u = random_polar_function(rng, -2.0, 2.0).sample(grid)
        ratios.append(mean_value_check(u, args.beta, args.p).ratio)
    t_num, f_num = numeric_f_max(args.beta, args.p)
    closed = f_max(args.beta, args.p)
    tol = 1e-3 if args.tol is None else args.tol
    result = {"value": min(ratios) if ratios else None, "ratios": ratios, "f_max": closed,
              "f_max_numeric": f_num, "t_numeric": t_num, "f_max_error": abs(f_num - closed)}
    ok = all(r >= 1.0 - tol for r in ratios) and abs(f_num - closed) <= 1e-10
    return result, ok, {"kind": "polar", "n_r": nr, "n_theta": 64, "r": [math.exp(-2.5), math.exp(2.5)]}, tol, args.seed


def task_mu_R(args):
    _require(args.beta is not None, "--beta is required")
    R = 1.0 if args.R is None else args.R
    _require(R > 0, "--R must be positive")
    try:
        res = mu_R_estimate(R, args.beta, args.p, modes=args.modes, n_nodes=args.grid_nodes or 1500)
    except AdmissibilityError as exc:
        raise UsageError(str(exc))
    tol = 1e-3 if args.tol is None else args.tol
    result = res.to_dict()
    ok = res.converged
    if args.p == 2:
        modes = args.modes or [int(math.floor(args.beta)), int(math.floor(args.beta)) + 1]
        oracle = min(mu_R_oracle_p2(R, args.beta, n) for n in modes)
        result["oracle"] = oracle
        result["rel_error"] = abs(res.value - oracle) / oracle if oracle > 0 else abs(res.value)
        ok = ok and result["rel_error"] <= tol
    return result, ok, {"kind": "log-radial", "nodes": args.grid_nodes or 1500, "r": [R * 1e-8, R]}, tol, None


def _log_order(errs, ratio=2.0):
    return [math.log(a / b, ratio) if a > 0 and b > 0 else None for a, b in zip(errs, errs[1:])]


def task_supersolution(args):
    par = _params(args)
    p, d = par.p, par.d
    kind = args.kind or ("log" if p == d else "power")
    n = args.grid_nodes or 1 << 12
    if kind == "power":
        _require(p != d, "the power supersolution needs p != d")
        tol = 1e-10 if args.tol is None else args.tol
        v = RadialProfile.power(-(d - p) / p)
        grid = make_log_radial_grid(1e-6, 1e6, n, d)
        res = residual_profile(v, WeightSpec("inverse-p-power", scale=hardy_constant(p, d)), p, d, grid, method="closed")
        result = {"value": res.max_relative, "min_relative": float(np.min(res.residual / res.scale)), "profile": "r^-(d-p)/p",
                  "weight": "mu/|x|^p"}
        return result, res.max_relative <= tol, {"kind": "log-radial", "nodes": n, "r": [1e-6, 1e6]}, tol, None
    _require(kind == "log", "--kind must be power or log")
    _require(p == d, "the log supersolution needs p = d")
    R = 1.0 if args.R is None else args.R
    tol = 1.8 if args.tol is None else args.tol
    v = RadialProfile.log_power((d - 1.0) / d, R)
    W = WeightSpec("exterior-log", scale=((d - 1.0) / d) ** d, R=R)
    errs = []
    # nested grids uniform in log r over log(r/R) in [0.1, 10]
    sizes = [n, 2 * n - 1, 4 * n - 3]
    for m in sizes:
        grid = make_log_radial_grid(R * math.exp(0.1), R * math.exp(10.0), m, d)
        errs.append(residual_profile(v, W, p, d, grid, method="fd").max_relative)
    orders = _log_order(errs)
    result = {"value": errs[-1], "errors": errs, "nodes": sizes, "observed_orders": orders,
              "profile": "log(r/R)^((d-1)/d)", "weight": "((d-1)/d)^d/(r^d log^d(r/R))"}
    ok = all(o is not None and o >= tol for o in orders)
    return result, ok, {"kind": "log-radial", "nodes": sizes, "log_r_over_R": [0.1, 10.0]}, tol, None


def task_remainder(args):
    par = _params(args)
    p, d = par.p, par.d
    _require(2 <= p < d, "remainder needs 2 <= p < d")
    c = 1.0 / (2.0 ** (p - 1.0) - 1.0) if args.c is None else args.c
    n = 20 if args.samples is None else args.samples
    nodes = args.grid_nodes or 1 << 12
    tol = 1e-6 if args.tol is None else args.tol
    rng = np.random.default_rng(args.seed)
    grid = make_log_radial_grid(math.exp(-4.5), math.exp(4.5), nodes, d)
    margins = [remainder_inequality_check(random_bump_sum(rng, -4.0, 4.0).sample(grid), p, d, c) for _ in range(n)]
    result = {"value": min(margins) if margins else None, "c": c, "margins": margins}
    ok = all(m >= -tol for m in margins)
    return result, ok, {"kind": "log-radial", "nodes": nodes, "t": [-4.5, 4.5]}, tol, args.seed


def task_kelvin(args):
    d = args.d
    _require(d >= 2, "kelvin needs --d >= 2")
    _require(args.p is None or args.p == d, "kelvin needs p = d")
    R = 1.0 if args.R is None else args.R
    _require(R > 0, "--R must be positive")
    n = args.grid_nodes or 1 << 13
    tol = 1e-6 if args.tol is None else args.tol
    rng = np.random.default_rng(args.seed)
    u = random_bump_sum(rng, math.log(R) - 4.0, math.log(R) - 0.05)
    e_mis, h_mis = kelvin_check(u, d, R, n)
    result = {"value": max(e_mis, h_mis), "energy_mismatch": e_mis, "hardy_mismatch": h_mis,
              "support": list(u.support)}
    return result, max(e_mis, h_mis) <= tol, {"kind": "log-radial pair", "nodes": [n, n + n // 3 + 1]}, tol, args.seed


def task_conjecture(args):
    _require(args.which in PROBES, f"--which must be one of {PROBES}")
    par = _params(args)
    kind = args.field or ("none" if args.which == "conj1" else ("ab-line" if par.d == 3 else "ab"))
    strength = 0.5 if args.beta is None else args.beta
    budget = 400 if args.budget is None else args.budget
    try:
        est = conjecture_probe(args.which, par, FieldSpec(kind, strength), budget=budget)
    except (AdmissibilityError, ValueError) as exc:
        raise UsageError(str(exc))
    result = est.to_dict()
    result["evidence_only"] = True
    ok = math.isfinite(est.value) and est.value > 0
    return result, ok, {"kind": "graded gauss panels in log r", "t_min": -40.0}, 0.0, None


TASKS = {
    "hardy-free": task_hardy_free,
    "hardy-exterior": task_hardy_exterior,
    "criticality": task_criticality,
    "algebraic-constant": task_algebraic_constant,
    "algebraic-verify": task_algebraic_verify,
    "ab-hardy": task_ab_hardy,
    "mean-value": task_mean_value,
    "mu-R": task_mu_R,
    "supersolution": task_supersolution,
    "remainder": task_remainder,
    "kelvin": task_kelvin,
    "conjecture": task_conjecture,
}

_HELP = {
    "hardy-free": "free Hardy quotient along the log cutoff family (p < d) or the plateau deficit (p >= d)",
    "hardy-exterior": "exterior Hardy ratios on seeded bumps outside B_R",
    "criticality": "deficit curve of a cutoff family",
    "algebraic-constant": "best constant of the vector inequality",
    "algebraic-verify": "seeded counterexample search for a candidate constant",
    "ab-hardy": "Aharonov-Bohm Hardy quotient minimized over modes",
    "mean-value": "mean value inequality on seeded polar test functions",
    "mu-R": "ball quotient with free boundary in an AB field",
    "supersolution": "residual of an explicit supersolution",
    "remainder": "remainder inequality margins on seeded bumps",
    "kelvin": "energy and Hardy term before and after inversion in |x| = R",
    "conjecture": "evidence probes for magnetic Hardy-type statements",
}

# flags accepted by each task, beyond --format/--out
_FLAGS = {
    "hardy-free": ("p", "d", "eps", "tol", "grid-nodes"),
    "hardy-exterior": ("p", "d", "R", "eps", "tol", "grid-nodes", "samples", "seed"),
    "criticality": ("kind", "p", "d", "eps", "tol"),
    "algebraic-constant": ("p", "tol"),
    "algebraic-verify": ("p", "c", "samples", "seed"),
    "ab-hardy": ("p", "beta", "modes", "budget", "tol"),
    "mean-value": ("p", "beta", "samples", "seed", "tol", "grid-nodes"),
    "mu-R": ("p", "beta", "R", "modes", "tol", "grid-nodes"),
    "supersolution": ("kind", "p", "d", "R", "tol", "grid-nodes"),
    "remainder": ("p", "d", "c", "samples", "seed", "tol", "grid-nodes"),
    "kelvin": ("d", "p", "R", "tol", "grid-nodes", "seed"),
    "conjecture": ("which", "p", "d", "beta", "field", "budget"),
}

_REQUIRED = {"p": {"hardy-free", "hardy-exterior", "criticality", "algebraic-constant", "algebraic-verify",
                   "ab-hardy", "mean-value", "mu-R", "supersolution", "remainder", "conjecture"},
             "d": {"kelvin"}}

_DEFAULT_D = {"ab-hardy": 2, "mean-value": 2, "mu-R": 2}


# ---------------------------------------------------------------------------
# parsing


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(message)


def _add_flag(sp, name: str, task: str) -> None:
    req = task in _REQUIRED.get(name, ())
    if name == "p":
        sp.add_argument("--p", type=float, required=req, default=None)
    elif name == "d":
        sp.add_argument("--d", type=int, required=req, default=_DEFAULT_D.get(task, 3))
    elif name == "beta":
        sp.add_argument("--beta", type=float)
    elif name == "R":
        sp.add_argument("--R", type=float)
    elif name == "eps":
        sp.add_argument("--eps", type=_float_list, default=[1e-2, 1e-3, 1e-4])
    elif name == "tol":
        sp.add_argument("--tol", type=float)
    elif name == "grid-nodes":
        sp.add_argument("--grid-nodes", type=_positive_int, dest="grid_nodes")
    elif name == "samples":
        sp.add_argument("--samples", type=_positive_int)
    elif name == "seed":
        sp.add_argument("--seed", type=_positive_int, default=DEFAULT_SEED)
    elif name == "c":
        sp.add_argument("--c", type=float)
    elif name == "kind":
        choices = ("plateau-log", "hardy-log") if task == "criticality" else ("power", "log")
        sp.add_argument("--kind", choices=choices)
    elif name == "modes":
        sp.add_argument("--modes", type=_mode_list)
    elif name == "budget":
        sp.add_argument("--budget", type=_positive_int)
    elif name == "which":
        sp.add_argument("--which", choices=PROBES, required=True)
    elif name == "field":
        sp.add_argument("--field", choices=FIELD_KINDS)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hardylab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hardylab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for task, flags in _FLAGS.items():
        sp = sub.add_parser(task, help=_HELP[task])
        for name in flags:
            _add_flag(sp, name, task)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        sp.add_argument("--out")
    sw = sub.add_parser("sweep", help="run a Cartesian parameter grid from a config file")
    sw.add_argument("--config", required=True)
    sw.add_argument("--seed", type=_positive_int)
    sw.add_argument("--jobs", type=_positive_int, default=1)
    sw.add_argument("--out")
    return parser


def _task_parser(task: str) -> argparse.ArgumentParser:
    parser = build_parser()
    return parser._subparsers._group_actions[0].choices[task]


def _params_of(task: str, args) -> dict:
    out = {}
    for name in _FLAGS[task]:
        key = name.replace("-", "_")
        out[key] = getattr(args, key, None)
    return out


def run_task(task: str, args) -> RunRecord:
    """Run one subcommand on parsed flags and wrap the outcome in a RunRecord."""
    start = time.perf_counter()
    result, ok, grid, tol, seed = TASKS[task](args)
    meta = {"seed": seed, "grid": grid, "tol": tol, "wall_time": time.perf_counter() - start,
            "version": __version__, "backend": kernels.BACKEND}
    return RunRecord(task, _clean(_params_of(task, args)), _clean(result), "ok" if ok else "violation", meta)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# sweeps


def load_config(path: str) -> dict:
    """Read a JSON or YAML sweep config."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}")
    try:
        if path.endswith((".yaml", ".yml")):
            import yaml

            cfg = yaml.safe_load(text)
        else:
            cfg = json.loads(text)
    except Exception as exc:
        raise UsageError(f"cannot parse config {path!r}: {exc}")
    if not isinstance(cfg, dict):
        raise UsageError("config must be a mapping")
    return cfg


def _to_argv(settings: dict) -> list:
    argv = []
    for key, val in settings.items():
        if isinstance(val, bool):
            raise UsageError(f"flag {key!r} cannot be a boolean")
        if isinstance(val, (list, tuple)):
            val = ",".join(str(v) for v in val)
        # the --flag=value form keeps negative values such as -1,0,1 from reading as flags
        argv.append("--" + str(key).replace("_", "-") + "=" + str(val))
    return argv


def expand_sweep(cfg: dict, master_seed: int | None = None) -> list:
    """(task, argv) pairs for every point of the Cartesian grid, in input order.

    The grid is a mapping of flag name to list of values; keys vary in the
    order given, last key fastest.  Task i gets the seed drawn from
    SeedSequence([master, i]) unless the config fixes ``seed`` itself.
    """
    task = cfg.get("task")
    if task not in TASKS:
        raise UsageError(f"config task must be one of {sorted(TASKS)}, got {task!r}")
    grid = cfg.get("grid") or {}
    fixed = cfg.get("fixed") or {}
    if not isinstance(grid, dict) or not isinstance(fixed, dict):
        raise UsageError("config grid and fixed must be mappings")
    extra = set(cfg) - {"task", "grid", "fixed", "seed"}
    if extra:
        raise UsageError(f"unknown config keys {sorted(extra)}")
    master = master_seed if master_seed is not None else cfg.get("seed", DEFAULT_SEED)
    keys = list(grid)
    values = [grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys]
    if not keys or any(len(v) == 0 for v in values):
        return []
    seeded = "seed" in _FLAGS[task] and "seed" not in fixed and "seed" not in grid
    jobs = []
    for i, combo in enumerate(itertools.product(*values)):
        settings = dict(fixed)
        settings.update(zip(keys, combo))
        if seeded:
            settings["seed"] = int(np.random.SeedSequence([int(master), i]).generate_state(1)[0])
        jobs.append((task, _to_argv(settings)))
    return jobs


def _run_one(job) -> str:
    task, argv = job
    start = time.perf_counter()
    try:
        args = _task_parser(task).parse_args(argv)
        return run_task(task, args).to_json()
    except (UsageError, AdmissibilityError, ValueError) as exc:
        meta = {"seed": None, "grid": None, "tol": None, "wall_time": time.perf_counter() - start,
                "version": __version__}
        return RunRecord(task, {"argv": argv}, {"error": str(exc)}, "error", meta).to_json()


def run_sweep(cfg: dict, master_seed: int | None = None, jobs: int = 1) -> tuple:
    """Run a sweep; returns (JSON lines, exit code)."""
    tasks = expand_sweep(cfg, master_seed)
    if not tasks:
        return [], EXIT_OK
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            lines = list(pool.map(_run_one, tasks))
    else:
        lines = [_run_one(t) for t in tasks]
    counts = {s: 0 for s in STATUSES}
    for line in lines:
        counts[json.loads(line)["status"]] += 1
    summary = {"summary": {"task": cfg["task"], "count": len(lines), **counts}}
    lines.append(json.dumps(summary, sort_keys=True))
    code = EXIT_OK
    if counts["error"]:
        code = EXIT_USAGE
    elif counts["violation"]:
        code = EXIT_VIOLATION
    return lines, code


# ---------------------------------------------------------------------------
# entry point


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "sweep":
            lines, code = run_sweep(load_config(args.config), args.seed, max(1, args.jobs))
            _emit("".join(line + "\n" for line in lines), args.out)
            return code
        rec = run_task(args.command, args)
    except (UsageError, AdmissibilityError) as exc:
        print(f"hardylab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = record_to_csv(rec) if args.format == "csv" else rec.to_json() + "\n"
    _emit(text, args.out)
    return EXIT_OK if rec.status == "ok" else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
