"""Cross-validation of the three exponent routes and theorem-driven sweeps.

compare() runs whichever of oracle / operator / Monte Carlo apply to a case
and scores the pairwise differences against per-case tolerances; the sweeps
check strict monotonicity in the coefficients, continuity along coefficient
paths, and convergence in the truncation; run_suite() executes a JSON config
of cases and property checks, writing one canonical JSON report per case and
a summary CSV. Reports are byte-reproducible from (config, seed): wall times
live only in the CSV.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oracle as oracle_mod
from . import operator as operator_mod
from . import simulate as simulate_mod
from .model import (
    ARModel,
    Exponential,
    Gaussian,
    MAModel,
    Rademacher,
    SurvivalConvention,
    Uniform,
    model_from_json,
    substream,
)

EXPLORATORY_LABEL = "unsupported regime - exploratory"


class ConfigError(Exception):
    """A suite config failed validation; the message names the offending tag."""


# ---------------------------------------------------------------------------
# canonical JSON


def _canon(obj):
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canon(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _write_json(obj, out, indent):
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, key in enumerate(sorted(obj)):
            out.append(pad + "  " + json.dumps(key) + ": ")
            _write_json(obj[key], out, indent + 2)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, val in enumerate(obj):
            out.append(pad + "  ")
            _write_json(val, out, indent + 2)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "]")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if math.isnan(obj):
            out.append('"nan"')
        elif math.isinf(obj):
            out.append('"inf"' if obj > 0 else '"-inf"')
        else:
            out.append(format_float(obj))
    elif obj is None:
        out.append("null")
    else:
        out.append(json.dumps(str(obj)))


def format_float(x):
    """17-significant-digit decimal form, enough to round-trip exactly."""
    return "%.17g" % float(x)


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, floats at 17 significant digits."""
    out = []
    _write_json(_canon(obj), out, 0)
    out.append("\n")
    return "".join(out)


# ---------------------------------------------------------------------------
# oracle detection


def detect_oracle(model):
    """Closed-form exponent for the model if one is known.

    Returns (exponent or None, info dict, label or None); the label flags
    degenerate MA cases and AR coefficient vectors outside every regime the
    theory covers.
    """
    a = np.asarray(model.coeffs, dtype=float)
    innov = model.innovation
    info = {}
    if isinstance(model, ARModel):
        regime = oracle_mod.classify_regime(model)
        info["regime"] = regime["regime"]
        if regime["regime"] == "unclassified":
            return None, info, EXPLORATORY_LABEL
        if regime["regime"] == "supercritical":
            info["characteristic_root"] = regime["characteristic_root"]
            return 1.0, info, None
        if np.all(a == 0.0):
            return 1.0 - float(innov.cdf(0.0)), info, None
        if model.order == 1 and a[0] == -1.0 and isinstance(innov, Uniform) and innov.lo < 0 < innov.hi:
            return oracle_mod.ar1_uniform_exponent(-innov.lo, innov.hi), info, None
        if model.order == 1 and a[0] < 0.0 and isinstance(innov, Exponential):
            return oracle_mod.ar1_exponential_exponent(a[0]), info, None
        return None, info, None
    # MA
    if abs(a.sum() + 1.0) < 1e-12:
        info["degenerate"] = True
        return 0.0, info, "degenerate, beta=0"
    if np.all(a == 0.0):
        return 1.0 - float(innov.cdf(0.0)), info, None
    if model.order == 1:
        a1 = a[0]
        if a1 == 1.0 and isinstance(innov, Uniform):
            return oracle_mod.ma1_uniform_exponent(-innov.lo, innov.hi), info, None
        if a1 == 1.0 and isinstance(innov, Gaussian):
            return oracle_mod.ma1_symmetric_exponent(), info, None
        if a1 == 1.0 and isinstance(innov, Rademacher):
            return oracle_mod.rademacher_exponent(model.convention), info, None
        if -1.0 < a1 < 0.0 and isinstance(innov, Exponential):
            return oracle_mod.ma1_exponential_exponent(a1), info, None
    return None, info, None


# ---------------------------------------------------------------------------
# comparison reports


@dataclass
class ComparisonReport:
    case: dict
    label: str = None
    lambda_oracle: float = None
    oracle_info: dict = field(default_factory=dict)
    operator_result: dict = None
    mc_result: dict = None
    diffs: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    passed: bool = True
    wall_times: dict = field(default_factory=dict)

    @property
    def lambda_operator(self):
        return self.operator_result["lambda"] if self.operator_result else None

    @property
    def lambda_mc(self):
        return self.mc_result["lambda_hat"] if self.mc_result else None

    def to_payload(self):
        """Report content without wall times (those live in the summary CSV)."""
        return {
            "case": self.case,
            "label": self.label,
            "lambda_oracle": self.lambda_oracle,
            "oracle_info": self.oracle_info,
            "operator": self.operator_result,
            "mc": self.mc_result,
            "diffs": self.diffs,
            "checks": self.checks,
            "tolerances": self.tolerances,
            "passed": self.passed,
        }


DEFAULT_TOLERANCES = {"oracle_operator": 2e-3, "oracle_mc": 5e-3, "operator_mc": 5e-3}


def _run_mc(model, cfg, seed):
    method = cfg.get("method", "crude")
    if method == "none":
        return None
    horizons = cfg.get("horizons")
    threads = cfg.get("threads")
    if method == "crude":
        if horizons is None:
            horizons = list(range(0, 17))
        est = simulate_mod.estimate_crude(
            model, horizons, int(cfg.get("replicates", 200000)), seed, threads=threads
        )
    elif method == "splitting":
        if horizons is None:
            horizons = list(range(0, 61))
        est = simulate_mod.estimate_splitting(
            model, horizons, int(cfg.get("particles", 20000)), seed
        )
    else:
        raise ConfigError(f"unknown mc method {method!r}")
    window = cfg.get("window")
    if window is not None:
        lam, hw = simulate_mod.fit_exponent(est, tuple(window))
        est.lambda_hat, est.half_width = lam, hw
        est.window = tuple(int(i) for i in window)
    return est


def compare(case):
    """Run every applicable route for one case and score the differences.

    The case dict embeds the model schema plus optional "operator", "mc",
    "tolerances", and "seed" sections; a missing oracle is not an error, it
    just removes the corresponding cross-checks.
    """
    model = model_from_json(case)
    seed = int(case.get("seed", 0))
    tolerances = dict(DEFAULT_TOLERANCES)
    tolerances.update(case.get("tolerances", {}))
    report = ComparisonReport(case=case, tolerances=tolerances)

    t0 = time.perf_counter()
    lam_oracle, info, label = detect_oracle(model)
    report.lambda_oracle = lam_oracle
    report.oracle_info = info
    report.label = label
    report.wall_times["oracle"] = time.perf_counter() - t0

    opcfg = case.get("operator", {})
    if opcfg.get("skip") or not model.innovation.has_density:
        report.operator_result = None
    else:
        t0 = time.perf_counter()
        res = operator_mod.solve_operator(
            model,
            m=opcfg.get("M"),
            n=int(opcfg.get("N", 400)),
            delta=opcfg.get("delta", 0.0),
            scheme=opcfg.get("scheme", "gauss"),
            cut_cell=bool(opcfg.get("cut_cell", True)),
            tol=float(opcfg.get("tol", 1e-10)),
            max_iter=int(opcfg.get("max_iter", 50000)),
        )
        report.operator_result = res.to_json()
        report.wall_times["operator"] = time.perf_counter() - t0

    mccfg = case.get("mc", {})
    t0 = time.perf_counter()
    est = _run_mc(model, mccfg, seed)
    if est is not None:
        report.mc_result = est.to_json()
        report.wall_times["mc"] = time.perf_counter() - t0

    lam_op = report.lambda_operator
    lam_mc = report.lambda_mc
    hw = report.mc_result["half_width"] if report.mc_result else math.nan
    checks = {}
    if lam_oracle is not None and lam_op is not None:
        diff = abs(lam_oracle - lam_op)
        report.diffs["oracle_operator"] = diff
        checks["oracle_operator"] = diff <= tolerances["oracle_operator"]
    if lam_oracle is not None and lam_mc is not None and math.isfinite(lam_mc):
        diff = abs(lam_oracle - lam_mc)
        report.diffs["oracle_mc"] = diff
        checks["oracle_mc"] = diff <= max(3.0 * hw, tolerances["oracle_mc"])
    if lam_op is not None and lam_mc is not None and math.isfinite(lam_mc):
        diff = abs(lam_op - lam_mc)
        report.diffs["operator_mc"] = diff
        checks["operator_mc"] = diff <= max(3.0 * hw, tolerances["operator_mc"])
    if label == "degenerate, beta=0":
        # no positive exponent exists; route agreement is not expected
        checks = {}
        report.diffs = {}
    report.checks = checks
    report.passed = all(checks.values()) if checks else True
    return report


# ---------------------------------------------------------------------------
# sweeps


def monotonicity_sweep(model, coeff_grid, m=None, n=200, delta="auto",
                       scheme="gauss", tol=1e-10, threshold=1e-5):
    """Tilted-operator exponents along a componentwise increasing AR family.

    Requires a totally ordered grid of nonnegative coefficient vectors with
    sum below one (the regime where strict monotonicity is proven) and a
    log-concave innovation density. Passes when every consecutive increment
    exceeds the grid threshold.
    """
    if not isinstance(model, ARModel):
        raise ValueError("the monotonicity sweep is for AR families")
    grid_vecs = [tuple(float(c) for c in np.atleast_1d(v)) for v in coeff_grid]
    if not grid_vecs:
        raise ValueError("empty coefficient grid")
    for vec in grid_vecs:
        if len(vec) != model.order:
            raise ValueError(f"coefficient vector {vec} does not match order {model.order}")
        if any(c < 0 for c in vec) or sum(vec) >= 1.0:
            raise ValueError(f"grid point {vec} violates a >= 0 with sum(a) < 1")
    for lo_vec, hi_vec in zip(grid_vecs, grid_vecs[1:]):
        if not (all(h >= l for l, h in zip(lo_vec, hi_vec)) and hi_vec != lo_vec):
            raise ValueError("coefficient grid must increase componentwise")
    if not isinstance(model.innovation, (Gaussian, Exponential, Uniform)):
        raise ValueError("monotonicity sweep needs a log-concave innovation density")
    if delta == "auto":
        delta = operator_mod.default_delta(model)
    lams = []
    for vec in grid_vecs:
        mdl = ARModel(vec, model.innovation, model.initial, model.convention)
        res = operator_mod.solve_operator(mdl, m=m, n=n, delta=delta, scheme=scheme, tol=tol)
        lams.append(res.lam)
    increments = [b - a for a, b in zip(lams, lams[1:])]
    passed = all(inc > threshold for inc in increments)
    return {
        "coeffs": [list(v) for v in grid_vecs],
        "lambdas": lams,
        "increments": increments,
        "threshold": threshold,
        "delta": delta,
        "passed": passed,
    }


def continuity_sweep(model, path_coeffs, target_coeffs, m=None, n=200,
                     delta=0.0, scheme="gauss", cut_cell=True, tol=1e-10,
                     final_gap_tol=1e-3):
    """Exponent gaps along a coefficient path approaching a target.

    Passes when the gaps |lambda(a_k) - lambda(a)| are nonincreasing along
    the path and the final gap is below the tolerance.
    """
    target = tuple(float(c) for c in np.atleast_1d(target_coeffs))
    path = [tuple(float(c) for c in np.atleast_1d(v)) for v in path_coeffs]
    if not path:
        raise ValueError("empty coefficient path")

    def lam_of(vec):
        if isinstance(model, ARModel):
            mdl = ARModel(vec, model.innovation, model.initial, model.convention)
        else:
            mdl = MAModel(vec, model.innovation, model.convention)
        return operator_mod.solve_operator(
            mdl, m=m, n=n, delta=delta, scheme=scheme, cut_cell=cut_cell, tol=tol
        ).lam

    lam_target = lam_of(target)
    lams = [lam_of(vec) for vec in path]
    gaps = [abs(l - lam_target) for l in lams]
    nonincreasing = all(g2 <= g1 + 1e-12 for g1, g2 in zip(gaps, gaps[1:]))
    passed = nonincreasing and gaps[-1] < final_gap_tol
    return {
        "path": [list(v) for v in path],
        "target": list(target),
        "lambda_target": lam_target,
        "lambdas": lams,
        "gaps": gaps,
        "nonincreasing": nonincreasing,
        "final_gap": gaps[-1],
        "final_gap_tol": final_gap_tol,
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# property checks


def _prop_nonnegativity(case, seed):
    model = model_from_json(case)
    opcfg = case.get("operator", {})
    m = opcfg.get("M") or operator_mod.default_truncation(model.innovation)
    grid = operator_mod.default_grid(model, m, int(opcfg.get("N", 200)))
    op = operator_mod.assemble(model, grid, delta=float(opcfg.get("delta", 0.0)))
    worst = float(op.kmat.min())
    rng = substream(seed, "prop", "nonneg")
    for _ in range(4):
        g = rng.random((grid.n,) * grid.d)
        worst = min(worst, float(op.apply(g).min()))
    return worst >= -1e-14, {"min_entry_or_image": worst}


def _prop_conjugation(case, seed):
    del seed
    model = model_from_json(case)
    if not isinstance(model, ARModel):
        raise ConfigError("conjugation invariance is an AR property")
    opcfg = case.get("operator", {})
    deltas = case.get("deltas", [0.0, 0.1, 0.5])
    m = opcfg.get("M") or operator_mod.default_truncation(model.innovation)
    grid = operator_mod.default_grid(model, m, int(opcfg.get("N", 200)))
    lams = []
    for delta in deltas:
        op = operator_mod.assemble_ar(model, grid, delta=float(delta))
        lams.append(operator_mod.spectral_radius(op).lam)
    spread = max(lams) - min(lams)
    return spread <= 1e-8, {"deltas": list(deltas), "lambdas": lams, "spread": spread}


def _prop_truncation(case, seed):
    del seed
    model = model_from_json(case)
    opcfg = case.get("operator", {})
    ms = case.get("Ms") or [2.0, 4.0, 6.0]
    n_ref = int(opcfg.get("N", 400))
    ms, lams = operator_mod.truncation_lambdas(model, ms, n_ref)
    monotone = all(b - a >= -1e-9 for a, b in zip(lams, lams[1:]))
    return monotone, {"Ms": list(ms), "lambdas": lams}


def _ma_p0(model, seed):
    """P(Z_0 >= 0) for an MA model: 1D quadrature at order 1, else Monte Carlo."""
    innov = model.innovation
    if model.order == 1 and innov.has_density:
        m = operator_mod.default_truncation(innov, eps=1e-14, safety=1.0)
        lo = max(innov.support[0], -m)
        hi = min(innov.support[1], m)
        grid = operator_mod.build_grid(lo, hi, 2000, scheme="gauss")
        a1 = model.coeffs[0]
        # P(xi_0 + a1 xi_{-1} >= 0) = E[1 - F(-a1 xi_{-1})]
        weights = grid.weights * innov.density(grid.nodes)
        return float(weights @ (1.0 - innov.cdf(-a1 * grid.nodes)))
    rng = substream(seed, "prop", "qbound-p0")
    q = model.order
    xi = innov.sample(rng, (2000000, q + 1))
    z0 = xi[:, -1] + np.asarray(model.coeffs) @ xi[:, -2::-1]
    return float(np.mean(model.convention.survives(z0)))


def _prop_qbound(case, seed):
    model = model_from_json(case)
    if not isinstance(model, MAModel):
        raise ConfigError("the q-dependence bound is an MA property")
    mccfg = dict(case.get("mc", {}))
    mccfg.setdefault("method", "crude")
    mccfg.setdefault("horizons", list(range(0, 13)))
    est = _run_mc(model, mccfg, seed)
    p0 = _ma_p0(model, seed)
    q = model.order
    ok = True
    margins = []
    for j, n in enumerate(est.horizons):
        bound = p0 ** (int(n) // (q + 1)) + 4.0 * est.se[j]
        margins.append(bound - est.p_hat[j])
        ok = ok and est.p_hat[j] <= bound
    return ok, {"p0": p0, "min_margin": float(min(margins))}


def _prop_determinism(case, seed):
    model = model_from_json(case)
    mccfg = case.get("mc", {})
    horizons = mccfg.get("horizons", list(range(0, 9)))
    replicates = int(mccfg.get("replicates", 30000))
    payloads = []
    for threads in case.get("threads", [1, 2, 8]):
        est = simulate_mod.estimate_crude(model, horizons, replicates, seed, threads=threads)
        payloads.append(canonical_json(est.to_json()))
    ok = all(p == payloads[0] for p in payloads)
    return ok, {"threads": case.get("threads", [1, 2, 8]), "identical": ok}


PROPERTY_CHECKS = {
    "nonnegativity": _prop_nonnegativity,
    "conjugation": _prop_conjugation,
    "truncation": _prop_truncation,
    "qbound": _prop_qbound,
    "determinism": _prop_determinism,
}


# ---------------------------------------------------------------------------
# suite runner


@dataclass
class SuiteResult:
    records: list
    any_failed: bool
    out_dir: str


def _load_config(config):
    if isinstance(config, dict):
        return config
    text = Path(config).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(
            f"config parse error at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e


def _validate_case(case, index):
    if not isinstance(case, dict):
        raise ConfigError(f"case {index} is not an object")
    ctype = case.get("type", "compare")
    if ctype == "property":
        check = case.get("check")
        if check not in PROPERTY_CHECKS:
            raise ConfigError(
                f"unknown property check {check!r} in case {index} "
                f"(known: {sorted(PROPERTY_CHECKS)})"
            )
    elif ctype == "compare":
        try:
            model_from_json(case)
        except ValueError as e:
            raise ConfigError(f"case {index}: {e}") from e
    else:
        raise ConfigError(f"unknown case type {ctype!r} in case {index}")
    return ctype


def run_suite(config, out_dir, threads=None):
    """Run a config of compare cases and property checks; write reports.

    Produces one canonical JSON file per case plus summary.csv under out_dir.
    The returned SuiteResult carries any_failed for the caller's exit status.
    """
    cfg = _load_config(config)
    if not isinstance(cfg, dict) or "cases" not in cfg:
        raise ConfigError("config must be an object with a 'cases' list")
    cases = cfg["cases"]
    if not isinstance(cases, list):
        raise ConfigError("'cases' must be a list")
    seed = int(cfg.get("seed", 0))
    threads = threads if threads is not None else cfg.get("threads")
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)

    prepared = []
    for i, case in enumerate(cases):
        ctype = _validate_case(case, i)
        name = str(case.get("name", f"case-{i}"))
        prepared.append((name, ctype, case))

    def run_case(item):
        name, ctype, case = item
        t0 = time.perf_counter()
        record = {"name": name, "type": ctype}
        try:
            if ctype == "property":
                case = dict(case)
                case_seed = int(case.get("seed", seed))
                ok, details = PROPERTY_CHECKS[case["check"]](case, case_seed)
                record["passed"] = bool(ok)
                record["payload"] = {
                    "case": {k: v for k, v in case.items() if k != "type"},
                    "check": case["check"],
                    "details": details,
                    "passed": bool(ok),
                }
            else:
                case = dict(case)
                case.setdefault("seed", seed)
                report = compare(case)
                record["passed"] = bool(report.passed)
                record["payload"] = report.to_payload()
                record["report"] = report
        except Exception as e:  # surfaced per case, the suite keeps going
            record["passed"] = False
            record["error"] = f"{type(e).__name__}: {e}"
            record["payload"] = {"case": case, "error": record["error"], "passed": False}
        record["wall_time"] = time.perf_counter() - t0
        return record

    if threads is None or int(threads) <= 1:
        records = [run_case(item) for item in prepared]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            records = list(pool.map(run_case, prepared))

    for record in records:
        (out_path / f"{record['name']}.json").write_text(canonical_json(record["payload"]))

    summary = out_path / "summary.csv"
    with summary.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["case", "type", "lambda_oracle", "lambda_operator", "lambda_mc",
             "diff_oracle_operator", "diff_oracle_mc", "diff_operator_mc",
             "passed", "wall_time_s"]
        )
        for record in records:
            report = record.get("report")
            def fmt(x):
                return format_float(x) if isinstance(x, (int, float)) and x is not None else ""
            if report is not None:
                row = [
                    record["name"], record["type"],
                    fmt(report.lambda_oracle), fmt(report.lambda_operator),
                    fmt(report.lambda_mc),
                    fmt(report.diffs.get("oracle_operator")),
                    fmt(report.diffs.get("oracle_mc")),
                    fmt(report.diffs.get("operator_mc")),
                ]
            else:
                row = [record["name"], record["type"], "", "", "", "", "", ""]
            row += [str(bool(record["passed"])).lower(), "%.3f" % record["wall_time"]]
            writer.writerow(row)

    return SuiteResult(
        records=records,
        any_failed=any(not r["passed"] for r in records),
        out_dir=str(out_path),
    )
