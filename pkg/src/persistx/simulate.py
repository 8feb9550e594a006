"""Path sampling and persistence-probability estimation.

Two estimators are provided. The crude estimator simulates full paths in
fixed-size blocks, each block on its own derived stream, and counts nested
survival events at every horizon; summing integer counts makes the result
independent of the thread schedule. The splitting estimator advances a
particle population one step at a time, records the per-step survival
fraction, and resamples survivors back to the full population, so the
product of fractions estimates p_n far below the reach of crude sampling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .model import ARModel, MAModel, SurvivalConvention, substream

BLOCK = 4096


class AllPathsDied(Exception):
    """Crude MC saw no survivor at the smallest horizon; use splitting."""


class PopulationExtinct(Exception):
    """Every splitting particle died in one step."""

    def __init__(self, step):
        super().__init__(f"all particles died at step {step}")
        self.step = step


class NonPositiveProbabilityInWindow(Exception):
    """The fit window contains a vanishing probability estimate."""


# ---------------------------------------------------------------------------
# single-path simulation


def simulate_ar_path(model, n, stream):
    """One AR path Z_0..Z_n; the first p entries come from the initial law."""
    p = model.order
    if n < p:
        raise ValueError(f"need n >= order, got n={n} < p={p}")
    coef = np.asarray(model.coeffs[::-1], dtype=float)
    z = np.empty(n + 1)
    z[:p] = model.initial.sample(p, stream)
    for i in range(p, n + 1):
        z[i] = z[i - p:i] @ coef + model.innovation.sample(stream)
    return z


def simulate_ma_path(model, n, stream):
    """One MA path Z_0..Z_n built from draws xi_{-q}..xi_n."""
    if n < 0:
        raise ValueError(f"need n >= 0, got {n}")
    q = model.order
    xi = model.innovation.sample(stream, n + q + 1)
    return _ma_from_innovations(model, xi, n)


def _ma_from_innovations(model, xi, n):
    q = model.order
    a = model.coeffs
    z = xi[..., q:q + n + 1].copy()
    for j in range(1, q + 1):
        z += a[j - 1] * xi[..., q - j:q - j + n + 1]
    return z


# ---------------------------------------------------------------------------
# crude Monte Carlo


def _survival_counts_block(model, horizons, block_size, rng):
    """Survival counts at each horizon for one block of independent paths."""
    n_max = int(horizons[-1])
    if isinstance(model, ARModel):
        p = model.order
        coef = np.asarray(model.coeffs[::-1], dtype=float)
        z = np.empty((block_size, n_max + 1))
        init = model.initial.sample(p, rng, size=block_size)
        z[:, :p] = init[:, : n_max + 1]
        for i in range(p, n_max + 1):
            z[:, i] = z[:, i - p:i] @ coef + model.innovation.sample(rng, block_size)
    else:
        q = model.order
        xi = model.innovation.sample(rng, (block_size, n_max + q + 1))
        z = _ma_from_innovations(model, xi, n_max)
    running_min = np.minimum.accumulate(z, axis=1)
    alive = model.convention.survives(running_min)
    return alive[:, horizons].sum(axis=0, dtype=np.int64)


def estimate_crude(model, horizons, replicates, seed, threads=None):
    """Crude Monte Carlo persistence estimate over a horizon grid.

    Every replicate contributes one path evaluated at all horizons (the
    survival events are nested, so the estimates are monotone by
    construction). Replicates are organised in fixed blocks of 4096 with one
    derived stream per block; the integer count reduction is order
    independent, so any thread count reproduces the same numbers bit for bit.
    """
    horizons = _check_horizons(model, horizons)
    replicates = int(replicates)
    if replicates < 1:
        raise ValueError("need at least one replicate")
    n_blocks = (replicates + BLOCK - 1) // BLOCK

    def run_block(m):
        size = min(BLOCK, replicates - m * BLOCK)
        return _survival_counts_block(model, horizons, size, substream(seed, "crude", m))

    if threads is None or threads <= 1:
        counts = sum(run_block(m) for m in range(n_blocks))
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            counts = sum(pool.map(run_block, range(n_blocks)))
    counts = np.asarray(counts, dtype=np.int64)
    if counts[0] == 0:
        raise AllPathsDied(
            f"no survivors at horizon {horizons[0]} out of {replicates} replicates"
        )
    p_hat = counts / replicates
    se = np.sqrt(p_hat * (1.0 - p_hat) / replicates)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_var = np.where(p_hat > 0.0, (se / p_hat) ** 2, np.inf)
    return _finish_estimate(
        method="crude",
        horizons=horizons,
        p_hat=p_hat,
        se=se,
        log_var=log_var,
        counts=counts,
        effort=replicates,
        seed=seed,
        fractions=None,
    )


# ---------------------------------------------------------------------------
# multilevel splitting


def estimate_splitting(model, horizons, particles, seed, threads=None):
    """Fixed-effort splitting estimate of p_n over a horizon grid.

    All particles advance one transition per step; the survival fraction s_t
    is recorded, dead particles are dropped, and survivors are resampled
    uniformly with replacement back to the full population. p_n is the
    product of the fractions up to n, an unbiased estimator for each horizon.
    The per-step fractions are kept for diagnostics, and
    var(log p_n) is approximated by sum_t (1 - s_t) / (s_t P).
    """
    del threads  # the population update is a single vectorised step
    horizons = _check_horizons(model, horizons)
    particles = int(particles)
    if particles < 2:
        raise ValueError("need at least two particles")
    n_max = int(horizons[-1])
    is_ar = isinstance(model, ARModel)
    d = model.order
    coef = np.asarray(model.coeffs[::-1], dtype=float)
    init_rng = substream(seed, "split", "init")
    if is_ar:
        state = np.asarray(model.initial.sample(d, init_rng, size=particles), dtype=float)
    else:
        state = np.asarray(model.innovation.sample(init_rng, (particles, d)), dtype=float)

    fractions = np.empty(n_max + 1)
    for t in range(n_max + 1):
        if is_ar and t < d:
            z = state[:, t]
            new_state = state
        else:
            xi = model.innovation.sample(substream(seed, "split", t), particles)
            if is_ar:
                z = state @ coef + xi
            else:
                z = xi + state @ coef
            new_state = np.empty_like(state)
            new_state[:, :-1] = state[:, 1:]
            new_state[:, -1] = xi if not is_ar else z
        alive = model.convention.survives(z)
        n_alive = int(alive.sum())
        fractions[t] = n_alive / particles
        if n_alive == 0:
            raise PopulationExtinct(t)
        survivors = new_state[alive]
        idx = substream(seed, "resample", t).integers(0, n_alive, size=particles)
        state = survivors[idx]

    log_p = np.cumsum(np.log(fractions))
    p_hat = np.exp(log_p[horizons])
    step_var = (1.0 - fractions) / (fractions * particles)
    log_var = np.cumsum(step_var)[horizons]
    se = p_hat * np.sqrt(log_var)
    return _finish_estimate(
        method="splitting",
        horizons=horizons,
        p_hat=p_hat,
        se=se,
        log_var=log_var,
        counts=None,
        effort=particles,
        seed=seed,
        fractions=fractions,
    )


# ---------------------------------------------------------------------------
# estimates and exponent fits


@dataclass
class PersistenceEstimate:
    """Persistence probabilities over a horizon grid with a pooled exponent fit."""

    method: str
    horizons: np.ndarray
    p_hat: np.ndarray
    se: np.ndarray
    log_var: np.ndarray
    effort: int
    seed: int
    counts: np.ndarray = None
    fractions: np.ndarray = None
    window_slopes: np.ndarray = None
    window: tuple = None
    lambda_hat: float = math.nan
    half_width: float = math.nan

    def to_json(self):
        table = []
        for j, n in enumerate(self.horizons):
            row = {"n": int(n), "p_hat": float(self.p_hat[j]), "se": float(self.se[j])}
            if self.counts is not None:
                row["count"] = int(self.counts[j])
            table.append(row)
        return {
            "method": self.method,
            "effort": int(self.effort),
            "seed": int(self.seed),
            "table": table,
            "window": list(self.window) if self.window else None,
            "lambda_hat": self.lambda_hat,
            "half_width": self.half_width,
        }


def _check_horizons(model, horizons):
    horizons = np.asarray(sorted(int(n) for n in np.atleast_1d(horizons)), dtype=int)
    if len(horizons) == 0 or horizons[0] < 0:
        raise ValueError("horizons must be nonnegative integers")
    if len(np.unique(horizons)) != len(horizons):
        raise ValueError("horizons must be distinct")
    del model
    return horizons


def default_window(p_hat):
    """Last half of the leading run of positive estimates."""
    positive = np.flatnonzero(~(np.asarray(p_hat) > 0.0))
    k = positive[0] if len(positive) else len(p_hat)
    return (k // 2, k)


def _finish_estimate(method, horizons, p_hat, se, log_var, counts, effort, seed, fractions):
    slopes = np.full(max(len(horizons) - 1, 0), np.nan)
    for j in range(len(horizons) - 1):
        if p_hat[j] > 0 and p_hat[j + 1] > 0:
            slopes[j] = (math.log(p_hat[j + 1]) - math.log(p_hat[j])) / (
                horizons[j + 1] - horizons[j]
            )
    est = PersistenceEstimate(
        method=method,
        horizons=horizons,
        p_hat=p_hat,
        se=se,
        log_var=log_var,
        counts=counts,
        fractions=fractions,
        effort=effort,
        seed=seed,
        window_slopes=slopes,
    )
    lo, hi = default_window(p_hat)
    est.window = (int(lo), int(hi))
    if hi - lo >= 2:
        est.lambda_hat, est.half_width = fit_exponent(est, (lo, hi))
    return est


def fit_exponent(estimate, window=None):
    """Least-squares exponent over a window of the horizon grid.

    The slope of log p_hat against n is fitted without weights; lambda_hat is
    exp(slope) and the half-width propagates the per-horizon variances of
    log p_hat through the least-squares coefficients (two standard errors).
    The window is a (start, stop) index pair or slice into the horizon grid;
    by default, the last half of the run of positive estimates.
    """
    p_hat = np.asarray(estimate.p_hat, dtype=float)
    if window is None:
        window = default_window(p_hat)
    if isinstance(window, slice):
        sel = window
    else:
        lo, hi = window
        sel = slice(int(lo), int(hi))
    x = np.asarray(estimate.horizons, dtype=float)[sel]
    p = p_hat[sel]
    v = np.asarray(estimate.log_var, dtype=float)[sel]
    if len(x) < 2:
        raise ValueError(f"fit window selects {len(x)} points; need at least 2")
    if np.any(~(p > 0.0)):
        raise NonPositiveProbabilityInWindow(
            f"window {window} contains a vanishing probability estimate"
        )
    y = np.log(p)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("fit window has no horizon spread")
    coeff = xc / sxx
    slope = float(coeff @ y)
    var_slope = float(coeff**2 @ v)
    lam = math.exp(slope)
    half_width = 2.0 * lam * math.sqrt(var_slope)
    return lam, half_width
