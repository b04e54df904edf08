"""Command-line interface: ``proper-regret {modulus,order,verify,table1}``.

Exit codes: 0 pass, 1 verified violation, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from .downstream import TASKS, downstream_sweep
from .errors import ProperRegretError, UnsupportedError
from .generators import make_generator
from .modulus import (
    SearchBudget,
    closed_form_available,
    modulus_closed_form,
    modulus_curve,
)
from .order import (
    OrderConfig,
    counterexample_check,
    counterexample_profile,
    order_barrier_check,
    order_profile,
)
from .proper_loss import properness_certificate, savage_loss, strong_properness_test
from .reports import dumps, jsonable
from .simplex import as_pnorm, sample_simplex_array
from .verify import affine_invariance_sweep, default_curve, regret_bound_sweep, savage_identity_sweep

SUITES = ("properness", "regret-bound", "strong", "savage", "affine", "downstream")
TABLE1_ROWS = (
    ("shannon", None),
    ("sq-alpha-norm", 1.5), ("sq-alpha-norm", 2.0), ("sq-alpha-norm", 3.0),
    ("alpha-norm", 1.5), ("alpha-norm", 2.0), ("alpha-norm", 4.0),
    ("tsallis", 1.5), ("tsallis", 2.5), ("tsallis", 4.0),
    ("max-power", 1.5), ("max-power", 2.0), ("max-power", 3.0),
)


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


def parse_r_grid(text: str) -> list:
    """Parse ``a:b:step``, ``a:b:logK`` or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"bad r grid {text!r}; use a:b:step or a:b:logK")
            a, b = float(parts[0]), float(parts[1])
            if parts[2].lower().startswith("log"):
                k = int(parts[2][3:])
                if a <= 0 or b <= a or k < 2:
                    raise UsageError("log grid needs 0 < a < b and K >= 2")
                return np.geomspace(a, b, k).tolist()
            step = float(parts[2])
            if step <= 0 or b < a:
                raise UsageError("linear grid needs a <= b and step > 0")
            n = int(math.floor((b - a) / step + 1e-9))
            grid = [a + i * step for i in range(n + 1)]
            if abs(grid[-1] - b) < 1e-9 * max(1.0, abs(b)):
                grid[-1] = b
            return grid
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad r grid {text!r}: {exc}") from None


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return ""
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _spec(args):
    if args.family == "counterexample":
        raise UsageError("the counterexample family is only available for `order`")
    return make_generator(args.family, args.alpha, args.N)


def _budget(args) -> SearchBudget:
    return SearchBudget(restarts=args.restarts, seed=args.seed)


# ---------------------------------------------------------------------------


def cmd_modulus(args) -> int:
    spec = _spec(args)
    p = as_pnorm(args.p)
    grid = parse_r_grid(args.r) if args.r else np.linspace(0.0, p.diameter, 41).tolist()
    method = args.method
    has_closed = closed_form_available(spec, p)
    if method in ("closed", "both") and not has_closed:
        note = "No closed-form in general" if spec.family == "alpha-norm" else "no closed form"
        raise UsageError(f"{note} for {spec.name} with N={spec.N}, p={p}; use --method brute")
    if method == "auto":
        method = "closed" if has_closed else "brute"
    if method == "both":
        brute = modulus_curve(spec, p, grid, "brute", _budget(args), args.workers)
        closed = modulus_curve(spec, p, grid, "closed")
        agreement = np.abs(brute.omega - closed.omega)
        tol = 1e-3 if spec.N > 2 else 1e-6
        worst = float(agreement.max()) if agreement.size else 0.0
        if args.format == "csv":
            text = brute.to_csv(agreement=agreement)
        else:
            text = dumps({"brute_force": brute.to_dict(), "closed_form": closed.to_dict(),
                          "agreement": agreement, "max_discrepancy": worst, "tolerance": tol,
                          "pass": worst < tol})
        _emit(text, args.out)
        return 0 if worst < tol else 1
    curve = modulus_curve(spec, p, grid, method, _budget(args), args.workers)
    _emit(curve.to_csv() if args.format == "csv" else curve.to_json(), args.out)
    return 0


def cmd_order(args) -> int:
    cfg = OrderConfig(method=args.method if args.method in ("closed", "brute") else "auto",
                      budget=_budget(args))
    if args.family == "counterexample":
        grid = parse_r_grid(args.r or "1e-3:1:log200")
        profile = counterexample_profile(grid, cfg)
        rep = counterexample_check(profile)
        summary = dict(profile.summary(), counterexample=rep.to_dict(), **{"pass": rep.passed})
        passed = rep.passed
    else:
        spec = _spec(args)
        p = as_pnorm(args.p)
        grid = parse_r_grid(args.r) if args.r else np.geomspace(1e-3, p.diameter, 200).tolist()
        profile = order_profile(spec, p, grid, cfg)
        rep = order_barrier_check(profile)
        summary = profile.summary()
        # only a detected condition makes a failed barrier a violation
        passed = rep.passed is not False
    if args.summary:
        _emit(dumps(summary), args.summary)
    if args.format == "csv":
        _emit(profile.to_csv(), args.out)
    else:
        rows = [dict(r=a, omega=b, sigma=c, K=d)
                for a, b, c, d in zip(profile.r, profile.omega, profile.sigma, profile.K)]
        _emit(dumps({"summary": summary, "rows": rows}), args.out)
    return 0 if passed else 1


def cmd_verify(args) -> int:
    suite = args.suite
    if suite == "downstream":
        return _verify_downstream(args)
    spec = _spec(args)
    if suite == "properness":
        res = args.grid_res or (100 if spec.N == 2 else 30 if spec.N == 3 else 10)
        rep = properness_certificate(spec, res)
        out = rep.to_dict()
        out.pop("margins", None)
        passed = rep.passed
    elif suite == "regret-bound":
        reps = [regret_bound_sweep(spec, p, args.samples, args.seed,
                                   default_curve(spec, p, budget=_budget(args), workers=args.workers))
                for p in _p_list(args)]
        passed = all(r.passed for r in reps)
        out = {"kind": "regret-bound", "pass": passed, "reports": [r.to_dict() for r in reps]}
    else:
        if suite == "strong":
            rep = strong_properness_test(spec, args.kappa, args.samples, args.seed)
        elif suite == "savage":
            rep = savage_identity_sweep(spec, args.samples, args.seed)
        else:
            rep = affine_invariance_sweep(spec, args.samples, args.seed)
        out = rep.to_dict()
        passed = rep.passed
    _emit(dumps(out), args.out)
    return 0 if passed else 1


def _p_list(args) -> list:
    return [as_pnorm(x) for x in str(args.p).split(",")]


def _verify_downstream(args) -> int:
    tasks = TASKS if args.task in (None, "all") else (args.task,)
    spec = None
    if args.family is not None:
        spec = _spec(args)
    reports = []
    for p in _p_list(args):
        curve = None
        if spec is not None:
            curve = default_curve(spec, p, budget=_budget(args), workers=args.workers)
        for task in tasks:
            reports.append(downstream_sweep(task, p, args.samples, args.seed, args.N, spec, curve))
    passed = all(r.passed for r in reports)
    if len(reports) == 1:
        out = reports[0].to_dict()
    else:
        out = {"kind": "downstream", "pass": passed, "reports": [r.to_dict() for r in reports]}
    _emit(dumps(out), args.out)
    return 0 if passed else 1


def table1_rows(points: int = 40, budget: SearchBudget | None = None) -> list:
    """Closed form vs exact scan for every two-point family, plus the log-loss check."""
    rows = []
    grid = np.linspace(2.0 / points, 2.0, points)
    for family, alpha in TABLE1_ROWS:
        spec = make_generator(family, alpha, 2)
        brute = modulus_curve(spec, 1, grid, "brute", budget)
        if closed_form_available(spec, 1):
            err = float(np.max(np.abs(brute.omega - modulus_closed_form(spec, 1, grid))))
            rows.append({"row": spec.name, "family": family, "alpha": alpha,
                         "status": "closed-form", "max_abs_error": err, "pass": err < 1e-6})
        else:
            rows.append({"row": spec.name, "family": family, "alpha": alpha,
                         "status": "brute-force only", "max_abs_error": None, "pass": True,
                         "omega_at_1": float(brute.omega[np.argmin(np.abs(grid - 1.0))])})
    shannon = make_generator("shannon", None, 3)
    Qh = sample_simplex_array(3, 10, 0)
    err = max(float(np.max(np.abs(savage_loss(shannon, qh).values + np.log(qh)))) for qh in Qh)
    rows.append({"row": "shannon log-loss", "family": "shannon", "alpha": None,
                 "status": "loss cross-check", "max_abs_error": err, "pass": err < 1e-12})
    return rows


def cmd_table1(args) -> int:
    rows = table1_rows(budget=_budget(args))
    passed = all(r["pass"] for r in rows)
    if args.format == "csv":
        text = _csv(["row", "status", "max_abs_error", "pass"],
                    [(r["row"], r["status"], r["max_abs_error"], r["pass"]) for r in rows])
    else:
        text = dumps({"rows": rows, "pass": passed})
    _emit(text, args.out)
    return 0 if passed else 1


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(2)


def _common(sp, family_default: Optional[str] = "shannon", fmt: str = "csv") -> None:
    sp.add_argument("--family", default=family_default,
                    help="shannon, sq-alpha-norm, alpha-norm, tsallis, max-power, log, brier")
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--N", type=int, default=2)
    sp.add_argument("--p", default="1", help='norm index: 1, 2, inf or a decimal')
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--restarts", type=int, default=64)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default=fmt)
    sp.add_argument("--out", default=None)
    sp.add_argument("--config", default=None, help="JSON file of option values")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="proper-regret",
                     description="Moduli of convexity and regret bounds for proper losses.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("modulus", help="modulus of convexity curve")
    _common(sp)
    sp.add_argument("--r", default=None, help="a:b:step, a:b:logK or a comma list")
    sp.add_argument("--method", choices=("auto", "closed", "brute", "both"), default="auto")
    sp.set_defaults(func=cmd_modulus)

    sp = sub.add_parser("order", help="Simonenko order profile")
    _common(sp)
    sp.add_argument("--r", default=None)
    sp.add_argument("--method", choices=("auto", "closed", "brute"), default="auto")
    sp.add_argument("--summary", default=None, help="also write the JSON summary here")
    sp.set_defaults(func=cmd_order)

    sp = sub.add_parser("verify", help="verification sweeps")
    sp.add_argument("suite", choices=SUITES)
    _common(sp, family_default=None, fmt="json")
    sp.add_argument("--samples", type=int, default=10000)
    sp.add_argument("--grid-res", dest="grid_res", type=int, default=None)
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--task", default=None, help="zero-one, noisy, ranking or all")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("table1", help="closed forms vs brute force for the two-point families")
    _common(sp, fmt="json")
    sp.set_defaults(func=cmd_table1)
    return parser


def _apply_config(parser, args) -> None:
    """Fill options from ``--config``; flags given on the command line win."""
    if not args.config:
        return
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    defaults = vars(parser.parse_args([args.command] + ([args.suite] if hasattr(args, "suite") else [])))
    known = set(defaults) - {"func", "command", "config", "suite"}
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    for key, value in cfg.items():
        if getattr(args, key) == defaults[key]:
            setattr(args, key, value)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_config(parser, args)
        if args.command == "verify" and args.suite != "downstream" and args.family is None:
            args.family = "shannon"
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"proper-regret: error: {exc}\n")
        return 2
    except (ProperRegretError, ValueError, OSError) as exc:
        sys.stderr.write(f"proper-regret: error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
