"""Command-line interface.

Subcommands: simulate (Monte Carlo estimates), operator (discretized spectral
problem), oracle (closed forms), compare (cross-validate routes on one case),
sweep (convergence / monotonicity / continuity / full suite). All output is
canonical JSON with floats at 17 significant digits, so identical invocations
produce identical bytes. Exit codes: 0 success, 1 computation or validation
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from . import harness as harness_mod
from . import operator as operator_mod
from . import oracle as oracle_mod
from . import simulate as simulate_mod
from .harness import ConfigError, canonical_json
from .model import (
    ARModel,
    Exponential,
    Gaussian,
    IIDInnovation,
    MAModel,
    PointMass,
    Rademacher,
    RequestedDensityOfAtomicLaw,
    StationaryAR1Gaussian,
    SurvivalConvention,
    Uniform,
)

COMPUTE_ERRORS = (
    simulate_mod.AllPathsDied,
    simulate_mod.PopulationExtinct,
    simulate_mod.NonPositiveProbabilityInWindow,
    oracle_mod.BracketNotFound,
    operator_mod.MaxIterationsExceeded,
    RequestedDensityOfAtomicLaw,
    ConfigError,
    ValueError,
)


def _parse_floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def parse_innovation(text):
    """Parse kind[:params], e.g. uniform:-1,1  gaussian:2  exponential."""
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "uniform":
        params = _parse_floats(rest) if rest else [-1.0, 1.0]
        if len(params) != 2:
            raise ValueError("uniform takes two parameters, lo,hi")
        return Uniform(params[0], params[1])
    if kind == "gaussian":
        params = _parse_floats(rest) if rest else [1.0]
        if len(params) != 1:
            raise ValueError("gaussian takes one parameter, sd")
        return Gaussian(params[0])
    if kind == "exponential":
        if rest:
            raise ValueError("exponential takes no parameters")
        return Exponential()
    if kind == "rademacher":
        if rest:
            raise ValueError("rademacher takes no parameters")
        return Rademacher()
    raise ValueError(f"unknown innovation kind {kind!r}")


def parse_initial(text, innovation):
    kind, _, rest = text.partition(":")
    kind = kind.strip().lower()
    if kind == "iid":
        return IIDInnovation(innovation)
    if kind == "point":
        values = _parse_floats(rest)
        if not values:
            raise ValueError("point initial law needs values, e.g. point:0.0")
        return PointMass(values)
    if kind == "stationary":
        params = _parse_floats(rest)
        if len(params) != 1:
            raise ValueError("stationary initial law takes one parameter, a1")
        return StationaryAR1Gaussian(params[0])
    raise ValueError(f"unknown initial law {kind!r}")


def build_model(args):
    coeffs = _parse_floats(args.coeffs)
    innovation = parse_innovation(args.innovation)
    convention = SurvivalConvention(args.convention)
    if args.process == "ar":
        initial = parse_initial(args.init, innovation)
        return ARModel(coeffs, innovation, initial, convention)
    return MAModel(coeffs, innovation, convention)


def add_model_arguments(sub, process_required=True):
    sub.add_argument("--process", choices=["ar", "ma"], required=process_required)
    sub.add_argument("--coeffs", required=process_required,
                     help="comma-separated coefficients a_1,...")
    sub.add_argument("--innovation", default="gaussian:1",
                     help="kind[:params], e.g. uniform:-1,1 gaussian:1 exponential rademacher")
    sub.add_argument("--init", default="iid",
                     help="AR initial law: iid | point:v1,... | stationary:a1")
    sub.add_argument("--convention", choices=["ge", "gt"], default="ge",
                     help="survival event Z >= 0 (ge) or Z > 0 (gt)")


def _emit(payload, out):
    text = canonical_json(payload)
    if out:
        Path(out).write_text(text)
    sys.stdout.write(text)


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("PERSISTX_THREADS")
    return int(env) if env else None


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_simulate(args):
    model = build_model(args)
    if args.horizons:
        horizons = [int(tok) for tok in args.horizons.split(",")]
    else:
        horizons = list(range(0, args.n + 1))
    t0 = time.perf_counter()
    if args.method == "crude":
        est = simulate_mod.estimate_crude(model, horizons, args.reps, args.seed,
                                          threads=_threads(args))
    else:
        est = simulate_mod.estimate_splitting(model, horizons, args.particles, args.seed)
    if args.window:
        i0, _, i1 = args.window.partition(":")
        lam, hw = simulate_mod.fit_exponent(est, (int(i0), int(i1)))
        est.lambda_hat, est.half_width = lam, hw
        est.window = (int(i0), int(i1))
    wall = time.perf_counter() - t0
    payload = {"model": model.to_json(), "estimate": est.to_json(), "seed": args.seed}
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write("n,p_hat,se\n")
            for j, n in enumerate(est.horizons):
                fh.write("%d,%s,%s\n" % (n, harness_mod.format_float(est.p_hat[j]),
                                         harness_mod.format_float(est.se[j])))
        payload["csv"] = args.csv
    _emit(payload, args.out)
    sys.stderr.write("wall_time_s=%.3f\n" % wall)
    return 0


def cmd_operator(args):
    model = build_model(args)
    delta = args.delta
    if delta != "auto":
        delta = float(delta)
    res = operator_mod.solve_operator(
        model, m=args.M, n=args.N, delta=delta, scheme=args.scheme,
        cut_cell=not args.no_cut_cell, tol=args.tol, max_iter=args.max_iter,
    )
    payload = {"model": model.to_json(), "result": res.to_json()}
    if args.eigenfunction:
        if res.grid.d != 1:
            raise ValueError("--eigenfunction output requires a one-dimensional grid")
        with open(args.eigenfunction, "w") as fh:
            fh.write("x,psi\n")
            for x, v in zip(res.grid.nodes, res.psi):
                fh.write("%s,%s\n" % (harness_mod.format_float(x),
                                      harness_mod.format_float(v)))
        payload["eigenfunction_csv"] = args.eigenfunction
    _emit(payload, args.out)
    return 0


def cmd_oracle(args):
    convention = SurvivalConvention(args.convention)
    case = args.case
    payload = {"case": case}
    if case == "ar1-uniform":
        payload["parameters"] = {"a": args.a, "b": args.b}
        payload["exponent"] = oracle_mod.ar1_uniform_exponent(args.a, args.b)
    elif case == "ar1-exponential":
        payload["parameters"] = {"a1": args.a1}
        payload["exponent"] = oracle_mod.ar1_exponential_exponent(args.a1)
        initial = None
        if args.initial:
            innovation = Exponential()
            initial = parse_initial(args.initial, innovation)
        if args.n is not None and initial is not None:
            payload["pn"] = [
                {"n": n, "p": oracle_mod.ar1_exponential_pn(args.a1, n, initial)}
                for n in range(1, args.n + 1)
            ]
    elif case == "ma1-uniform":
        payload["parameters"] = {"a": args.a, "b": args.b}
        payload["exponent"] = oracle_mod.ma1_uniform_exponent(args.a, args.b)
    elif case == "ma1-symmetric":
        payload["parameters"] = {"c": args.c, "terms": args.terms}
        payload["exponent"] = oracle_mod.ma1_symmetric_exponent()
        payload["series_value"] = oracle_mod.ma1_symmetric_series(args.c, args.terms)
    elif case == "rademacher":
        payload["parameters"] = {"convention": convention.value}
        payload["exponent"] = oracle_mod.rademacher_exponent(convention)
        if args.n is not None:
            payload["pn"] = [
                {"n": n, "p": oracle_mod.rademacher_pn(n, convention)}
                for n in range(0, args.n + 1)
            ]
    elif case == "ma1-exponential":
        payload["parameters"] = {"a1": args.a1}
        payload["exponent"] = oracle_mod.ma1_exponential_exponent(args.a1)
    elif case == "degenerate-ma":
        payload["parameters"] = {}
        if args.n is not None:
            payload["pn"] = [
                {"n": n, "p": oracle_mod.degenerate_factorial_pn(n)}
                for n in range(0, args.n + 1)
            ]
        else:
            payload["pn"] = [
                {"n": n, "p": oracle_mod.degenerate_factorial_pn(n)} for n in range(0, 7)
            ]
    elif case == "supercritical-ar":
        coeffs = _parse_floats(args.coeffs)
        payload["parameters"] = {"coeffs": coeffs}
        payload["exponent"] = 1.0
        payload["characteristic_root"] = oracle_mod.characteristic_root(coeffs)
    elif case == "iid":
        innovation = parse_innovation(args.innovation)
        payload["parameters"] = {"innovation": innovation.to_json()}
        payload["exponent"] = 1.0 - float(innovation.cdf(0.0))
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown oracle case {case!r}")
    _emit(payload, args.out)
    return 0


def cmd_compare(args):
    if args.config:
        case = harness_mod._load_config(args.config)
    else:
        model = build_model(args)
        case = model.to_json()
        case["seed"] = args.seed
        mc = {"method": args.method}
        if args.method == "crude":
            mc["replicates"] = args.reps
        elif args.method == "splitting":
            mc["particles"] = args.particles
        case["mc"] = mc
        case["operator"] = {"N": args.N}
        if args.M is not None:
            case["operator"]["M"] = args.M
        if args.delta != "0":
            case["operator"]["delta"] = (
                args.delta if args.delta == "auto" else float(args.delta)
            )
    report = harness_mod.compare(case)
    _emit(report.to_payload(), args.out)
    return 0 if report.passed else 1


def cmd_sweep(args):
    if args.kind == "suite":
        if not args.config:
            raise ValueError("sweep --kind suite requires --config")
        result = harness_mod.run_suite(args.config, args.out_dir or "suite-out",
                                       threads=_threads(args))
        payload = {
            "cases": [
                {"name": r["name"], "type": r["type"], "passed": bool(r["passed"]),
                 **({"error": r["error"]} if "error" in r else {})}
                for r in result.records
            ],
            "any_failed": result.any_failed,
            "out_dir": result.out_dir,
        }
        _emit(payload, args.out)
        return 1 if result.any_failed else 0

    model = build_model(args)
    if args.kind == "convergence":
        ms = _parse_floats(args.Ms) if args.Ms else None
        ns = [int(x) for x in _parse_floats(args.Ns)] if args.Ns else None
        delta = args.delta if args.delta == "auto" else float(args.delta)
        if ms is None or ns is None:
            raise ValueError("sweep --kind convergence requires --Ms and --Ns")
        result = operator_mod.convergence_sweep(model, ms, ns, delta=delta,
                                                scheme=args.scheme)
        _emit(result, args.out)
        return 0
    if args.kind == "monotonicity":
        if not args.coeff_grid:
            raise ValueError("sweep --kind monotonicity requires --coeff-grid")
        grid = [_parse_floats(tok) for tok in args.coeff_grid.split(";")]
        delta = args.delta if args.delta == "auto" else float(args.delta)
        result = harness_mod.monotonicity_sweep(model, grid, m=args.M, n=args.N,
                                                delta=delta, scheme=args.scheme)
        _emit(result, args.out)
        return 0 if result["passed"] else 1
    if args.kind == "continuity":
        if not (args.path and args.target):
            raise ValueError("sweep --kind continuity requires --path and --target")
        path = [_parse_floats(tok) for tok in args.path.split(";")]
        target = _parse_floats(args.target)
        delta = args.delta if args.delta == "auto" else float(args.delta)
        result = harness_mod.continuity_sweep(model, path, target, m=args.M,
                                              n=args.N, delta=delta,
                                              scheme=args.scheme)
        _emit(result, args.out)
        return 0 if result["passed"] else 1
    raise ValueError(f"unknown sweep kind {args.kind!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="persistx",
        description="Persistence exponents of AR and MA processes: "
                    "Monte Carlo, operator discretization, closed forms.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="Monte Carlo persistence estimates")
    add_model_arguments(p)
    p.add_argument("--method", choices=["crude", "splitting"], default="crude")
    p.add_argument("--n", type=int, default=16, help="estimate p_0..p_n")
    p.add_argument("--horizons", help="explicit comma-separated horizons")
    p.add_argument("--reps", type=int, default=100000)
    p.add_argument("--particles", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", help="fit window i0:i1 over the horizon list")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="write the JSON payload to this file as well")
    p.add_argument("--csv", help="write an n,p_hat,se table to this file")
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("operator", help="discretized persistence operator")
    add_model_arguments(p)
    p.add_argument("--M", type=float, help="state truncation (default: innovation tails)")
    p.add_argument("--N", type=int, default=400, help="nodes per axis")
    p.add_argument("--delta", default="0", help="AR tilt rate, a float or 'auto'")
    p.add_argument("--scheme", choices=["gauss", "midpoint"], default="gauss")
    p.add_argument("--no-cut-cell", action="store_true",
                   help="disable the MA boundary-cell correction")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=50000)
    p.add_argument("--eigenfunction", help="write x,psi CSV (1D grids only)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_operator)

    p = subs.add_parser("oracle", help="closed-form exponents and probabilities")
    p.add_argument("--case", required=True,
                   choices=["ar1-uniform", "ar1-exponential", "ma1-uniform",
                            "ma1-symmetric", "rademacher", "ma1-exponential",
                            "degenerate-ma", "supercritical-ar", "iid"])
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--a1", type=float, default=-0.5)
    p.add_argument("--c", type=int, default=1)
    p.add_argument("--terms", type=int, default=200)
    p.add_argument("--n", type=int)
    p.add_argument("--convention", choices=["ge", "gt"], default="ge")
    p.add_argument("--coeffs", default="1.2")
    p.add_argument("--innovation", default="gaussian:1")
    p.add_argument("--initial", help="ar1-exponential initial law, e.g. point:0 or iid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = subs.add_parser("compare", help="cross-validate the routes on one case")
    add_model_arguments(p, process_required=False)
    p.add_argument("--config", help="JSON case file (overrides model flags)")
    p.add_argument("--method", choices=["crude", "splitting", "none"], default="crude")
    p.add_argument("--reps", type=int, default=200000)
    p.add_argument("--particles", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--M", type=float)
    p.add_argument("--N", type=int, default=400)
    p.add_argument("--delta", default="0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = subs.add_parser("sweep", help="convergence, monotonicity, continuity, suite")
    add_model_arguments(p, process_required=False)
    p.add_argument("--kind", required=True,
                   choices=["convergence", "monotonicity", "continuity", "suite"])
    p.add_argument("--Ms", help="comma-separated truncations")
    p.add_argument("--Ns", help="comma-separated node counts")
    p.add_argument("--coeff-grid", help="semicolon-separated coefficient vectors")
    p.add_argument("--path", help="semicolon-separated coefficient vectors")
    p.add_argument("--target", help="target coefficient vector")
    p.add_argument("--M", type=float)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--delta", default="0")
    p.add_argument("--scheme", choices=["gauss", "midpoint"], default="gauss")
    p.add_argument("--config", help="suite JSON config")
    p.add_argument("--out-dir", help="suite report directory")
    p.add_argument("--threads", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("simulate", "operator") or (
        args.command in ("compare", "sweep") and not args.config
    ):
        if args.process is None or args.coeffs is None:
            if not (args.command == "sweep" and args.kind == "suite"):
                parser.error(f"{args.command} requires --process and --coeffs")
    try:
        return args.func(args)
    except COMPUTE_ERRORS as e:
        sys.stderr.write(f"error: {type(e).__name__}: {e}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
