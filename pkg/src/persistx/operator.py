"""Discretized persistence operators and their spectral radius.

The AR operator acts on functions of the state (x_1..x_p) as
(Kg)(x) = int_0^M g(x_2..x_p, z) phi(z - s(x)) dz with drift
s(x) = sum_j a_j x_{p+1-j}; the substituted variable z shares the grid with
the state, so the discretization needs no interpolation. Each kernel row is
assembled from exact innovation mass per grid cell (CDF differences), which
keeps the rank-one i.i.d. case and bounded-support truncations exact.

The MA operator acts on the last q innovations as
(Kg)(x) = sum_j w_j phi(y_j) 1{y_j + sum_i a_i x_{q+1-i} > 0} g(x_2..x_q, y_j);
the indicator cuts one grid cell per row, and that cell's weight is rescaled
by the fraction of its innovation mass above the cut (cut-cell correction).

An exponential tilt h(x) = exp(delta sum_j x_j) conjugates the AR kernel by a
positive diagonal, so the spectral radius is unchanged while eigenfunction
mass is confined near the origin; the spectral radius itself comes from power
iteration with sup-norm normalization and a restart on detected 2-cycles.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .model import ARModel, MAModel, RequestedDensityOfAtomicLaw


class MaxIterationsExceeded(Exception):
    """Power iteration hit its budget; .result carries the best iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


# ---------------------------------------------------------------------------
# quadrature grids


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensorized per-axis quadrature rule on [lo, hi]^d.

    Edges partition [lo, hi] into one cell per node (cumulative weights for
    Gauss-Legendre, uniform cells for midpoint); each node lies inside its
    cell, which the cut-cell logic of the MA assembly relies on.
    """

    d: int
    lo: float
    hi: float
    n: int
    nodes: np.ndarray
    weights: np.ndarray
    edges: np.ndarray
    scheme: str


def build_grid(lo, hi, n, d=1, scheme="gauss"):
    """Per-axis quadrature rule with n nodes on [lo, hi], tensorized to d axes."""
    lo = float(lo)
    hi = float(hi)
    if not lo < hi:
        raise ValueError(f"invalid axis bounds [{lo}, {hi}]")
    n = int(n)
    if n < 2:
        raise ValueError(f"need at least 2 nodes per axis, got {n}")
    if d < 1:
        raise ValueError(f"need dimension >= 1, got {d}")
    length = hi - lo
    if scheme == "gauss":
        x, w = leggauss(n)
        nodes = lo + (x + 1.0) * 0.5 * length
        weights = w * 0.5 * length
    elif scheme == "midpoint":
        h = length / n
        nodes = lo + h * (np.arange(n) + 0.5)
        weights = np.full(n, h)
    else:
        raise ValueError(f"unknown scheme {scheme!r} (expected 'gauss' or 'midpoint')")
    edges = np.concatenate(([lo], lo + np.cumsum(weights)))
    edges[-1] = hi
    if abs(weights.sum() - length) > 1e-10 * max(1.0, length):
        raise AssertionError("quadrature weights do not sum to the axis length")
    if np.any(nodes[:-1] >= nodes[1:]):
        raise AssertionError("quadrature nodes are not strictly increasing")
    if np.any(nodes <= edges[:-1]) or np.any(nodes >= edges[1:]):
        raise AssertionError("a quadrature node fell outside its cell")
    return QuadratureGrid(int(d), lo, hi, n, nodes, weights, edges, scheme)


def default_truncation(innovation, eps=1e-10, safety=1.5):
    """Truncation radius: smallest M with tail mass <= eps, times a 1.5 margin."""
    return float(innovation.tail_radius(eps)) * safety


def default_delta(model):
    """Default AR tilt: half the innovation decay rate, divided by the order.

    Compactly supported innovations need no tilt (truncation is already
    exact), so their default is zero.
    """
    rate = model.innovation.exponential_decay_rate()
    if math.isinf(rate):
        return 0.0
    return rate / (2.0 * model.order)


def default_grid(model, m, n, scheme="gauss"):
    """State-axis grid for the model, clamped to the reachable set.

    AR lives on [0, min(M, sup)] where sup bounds the reachable states (for
    nonpositive coefficients and bounded innovations the new value y + s(x)
    never exceeds the innovation's upper end, so truncation there is exact).
    MA lives on the innovation support intersected with [-M, M].
    """
    m = float(m)
    if m <= 0:
        raise ValueError(f"need truncation M > 0, got {m}")
    lo_s, hi_s = model.innovation.support
    if isinstance(model, ARModel):
        hi = m
        if all(c <= 0 for c in model.coeffs) and math.isfinite(hi_s):
            hi = min(m, hi_s)
        return build_grid(0.0, hi, n, d=model.order, scheme=scheme)
    lo = max(lo_s, -m)
    hi = min(hi_s, m)
    return build_grid(lo, hi, n, d=model.order, scheme=scheme)


# ---------------------------------------------------------------------------
# discretized operators


@dataclass(eq=False)
class DiscretizedOperator:
    """Kernel factor table over (state, new coordinate) with a matrix-free apply.

    kmat has shape (n,)*d + (n,); entry [x_1..x_d, z] is the quadrature
    weight carried from state (x_1..x_d) to state (x_2..x_d, z). The image
    state reuses d-1 source coordinates, so one apply costs O(n^d * n); the
    full n^d x n^d matrix is never formed.
    """

    grid: QuadratureGrid
    kmat: np.ndarray
    meta: dict = field(default_factory=dict)

    def apply(self, g):
        d = self.grid.d
        g = np.asarray(g, dtype=float)
        if g.shape != (self.grid.n,) * d:
            raise ValueError(f"value vector has shape {g.shape}, grid wants {(self.grid.n,) * d}")
        if d == 1:
            return self.kmat @ g
        letters = string.ascii_lowercase[:d]
        subscripts = f"{letters}z,{letters[1:]}z->{letters}"
        return np.einsum(subscripts, self.kmat, g)

    def dense(self):
        """The kernel as a dense matrix (order-1 grids only)."""
        if self.grid.d != 1:
            raise ValueError("dense kernel matrix is only materialized for d = 1")
        return self.kmat


def _drift(coeffs, nodes, d):
    """sum_j a_j x_{d+1-j} on the tensor grid, shape (n,)*d."""
    n = len(nodes)
    s = np.zeros((n,) * d)
    for j, aj in enumerate(coeffs, start=1):
        shape = [1] * d
        shape[d - j] = n
        s = s + aj * nodes.reshape(shape)
    return s


def assemble_ar(model, grid, delta=0.0):
    """Discretize the AR persistence operator (optionally tilted) on the grid.

    Row x, column j carries the exact innovation mass of grid cell j shifted
    by the drift: F(e_{j+1} - s(x)) - F(e_j - s(x)). With delta > 0 every
    entry is multiplied by h(x')/h(x) = exp(delta (z - x_1)), a diagonal
    similarity that leaves the spectral radius unchanged.
    """
    if not isinstance(model, ARModel):
        raise ValueError("assemble_ar expects an AR model")
    if not model.innovation.has_density:
        raise RequestedDensityOfAtomicLaw(
            "the AR operator needs an innovation density; atomic laws are handled in closed form"
        )
    if abs(grid.lo) > 1e-12:
        raise ValueError(f"the AR state axis must start at 0, got lo={grid.lo}")
    d = model.order
    if grid.d != d:
        raise ValueError(f"grid dimension {grid.d} does not match model order {d}")
    s = _drift(model.coeffs, grid.nodes, d)
    arg = grid.edges.reshape((1,) * d + (-1,)) - s[..., None]
    cdf_vals = model.innovation.cdf(arg)
    kmat = np.clip(cdf_vals[..., 1:] - cdf_vals[..., :-1], 0.0, None)
    delta = float(delta)
    if delta != 0.0:
        kmat = kmat * np.exp(delta * grid.nodes)
        kmat = kmat * np.exp(-delta * grid.nodes).reshape((grid.n,) + (1,) * d)
    return DiscretizedOperator(
        grid=grid,
        kmat=kmat,
        meta={"process": "ar", "coeffs": list(model.coeffs), "delta": delta},
    )


def assemble_ma(model, grid, cut_cell=True):
    """Discretize the MA persistence operator on the grid.

    Row x keeps the nodal rule w_j phi(y_j) above the survival cut
    y > -sum_i a_i x_{q+1-i}; with the correction on, the one cell straddling
    the cut keeps the fraction of its innovation mass that lies above it.
    """
    if not isinstance(model, MAModel):
        raise ValueError("assemble_ma expects an MA model")
    if not model.innovation.has_density:
        raise RequestedDensityOfAtomicLaw(
            "the MA operator needs an innovation density; atomic laws are handled in closed form"
        )
    d = model.order
    if grid.d != d:
        raise ValueError(f"grid dimension {grid.d} does not match model order {d}")
    n = grid.n
    base = grid.weights * model.innovation.density(grid.nodes)
    cut = (-_drift(model.coeffs, grid.nodes, d)).reshape(-1)
    kmat = np.where(grid.nodes[None, :] > cut[:, None], base[None, :], 0.0)
    if cut_cell:
        inside = (cut > grid.edges[0]) & (cut < grid.edges[-1])
        rows = np.flatnonzero(inside)
        if len(rows):
            k = np.clip(np.searchsorted(grid.edges, cut[rows], side="right") - 1, 0, n - 1)
            f_lo = model.innovation.cdf(grid.edges[k])
            f_hi = model.innovation.cdf(grid.edges[k + 1])
            f_cut = model.innovation.cdf(cut[rows])
            mass = f_hi - f_lo
            with np.errstate(divide="ignore", invalid="ignore"):
                frac = np.where(mass > 0.0, (f_hi - f_cut) / np.where(mass > 0, mass, 1.0), 0.0)
            kmat[rows, k] = base[k] * np.clip(frac, 0.0, 1.0)
    return DiscretizedOperator(
        grid=grid,
        kmat=kmat.reshape((n,) * d + (n,)),
        meta={"process": "ma", "coeffs": list(model.coeffs), "cut_cell": bool(cut_cell)},
    )


def assemble(model, grid, delta=0.0, cut_cell=True):
    if isinstance(model, ARModel):
        return assemble_ar(model, grid, delta=delta)
    return assemble_ma(model, grid, cut_cell=cut_cell)


# ---------------------------------------------------------------------------
# spectral radius


@dataclass(eq=False)
class SpectralResult:
    """Perron root and eigenfunction of a discretized operator."""

    lam: float
    psi: np.ndarray
    residual: float
    iterations: int
    converged: bool
    grid: QuadratureGrid
    meta: dict

    def to_json(self):
        return {
            "lambda": self.lam,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "grid": {
                "lo": self.grid.lo,
                "hi": self.grid.hi,
                "n": self.grid.n,
                "d": self.grid.d,
                "scheme": self.grid.scheme,
            },
            **{k: v for k, v in self.meta.items() if k != "process"},
        }


def spectral_radius(op, tol=1e-10, max_iter=50000):
    """Power iteration for the Perron root of a nonnegative operator.

    Starts from the all-ones vector with sup-norm normalization and stops
    when both the eigenvalue increment and the sup-norm residual fall below
    tol. A sustained 2-cycle in the eigenvalue estimates (a periodic or
    reducible discretization) triggers a restart from the averaged iterate.
    """
    v = np.ones((op.grid.n,) * op.grid.d)
    lam_prev = math.inf
    lam_prev2 = math.inf
    best = None
    cooldown = 0
    for it in range(1, int(max_iter) + 1):
        w = op.apply(v)
        lam = float(w.max())
        if lam <= 0.0:
            # the operator annihilates the cone on this grid
            return SpectralResult(0.0, v, 0.0, it, True, op.grid, dict(op.meta))
        residual = float(np.abs(w - lam * v).max())
        if best is None or residual < best[2]:
            best = (lam, v, residual, it)
        if residual < tol * max(1.0, lam) and abs(lam - lam_prev) < tol:
            return SpectralResult(lam, v, residual, it, True, op.grid, dict(op.meta))
        two_cycle = (
            math.isfinite(lam_prev2)
            and abs(lam - lam_prev2) < 1e-12 * max(1.0, lam)
            and abs(lam - lam_prev) > 10.0 * tol
        )
        if two_cycle and it >= cooldown:
            v = 0.5 * (v + w / lam)
            v /= v.max()
            cooldown = it + 10
            lam_prev = math.inf
            lam_prev2 = math.inf
            continue
        v = w / lam
        lam_prev2 = lam_prev
        lam_prev = lam
    lam, v, residual, it = best
    raise MaxIterationsExceeded(
        f"power iteration did not converge in {max_iter} iterations "
        f"(best residual {residual:.3e} at lambda {lam:.6g})",
        SpectralResult(lam, v, residual, int(max_iter), False, op.grid, dict(op.meta)),
    )


def solve_operator(model, m=None, n=400, delta=0.0, scheme="gauss", cut_cell=True,
                   tol=1e-10, max_iter=50000):
    """One-call operator route: grid defaults, assembly, power iteration."""
    if m is None:
        m = default_truncation(model.innovation)
    if delta == "auto":
        delta = default_delta(model) if isinstance(model, ARModel) else 0.0
    grid = default_grid(model, m, n, scheme=scheme)
    op = assemble(model, grid, delta=delta, cut_cell=cut_cell)
    return spectral_radius(op, tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# convergence sweeps


def truncation_lambdas(model, ms, n_ref, delta=0.0, cut_cell=True, tol=1e-10,
                       max_iter=50000):
    """Spectral radii on a nested family of truncations of one big grid.

    A midpoint grid is built for the largest truncation and each smaller M
    keeps the nodes inside its own clamped axis, so every smaller operator is
    literally a principal submatrix of the largest one and the exact
    monotonicity of the Perron root in the truncation is preserved.
    """
    ms = sorted(float(m) for m in ms)
    big = default_grid(model, ms[-1], n_ref, scheme="midpoint")
    lams = []
    for m in ms:
        if isinstance(model, ARModel):
            lo_m, hi_m = 0.0, m
            lo_s, hi_s = model.innovation.support
            if all(c <= 0 for c in model.coeffs) and math.isfinite(hi_s):
                hi_m = min(m, hi_s)
        else:
            lo_s, hi_s = model.innovation.support
            lo_m, hi_m = max(lo_s, -m), min(hi_s, m)
        keep = np.flatnonzero((big.nodes >= lo_m) & (big.nodes <= hi_m))
        if len(keep) < 2:
            raise ValueError(f"truncation M={m} keeps fewer than 2 nodes of the reference grid")
        i0, i1 = keep[0], keep[-1] + 1
        sub = QuadratureGrid(
            d=big.d,
            lo=float(big.edges[i0]),
            hi=float(big.edges[i1]),
            n=int(i1 - i0),
            nodes=big.nodes[i0:i1],
            weights=big.weights[i0:i1],
            edges=big.edges[i0:i1 + 1],
            scheme="midpoint",
        )
        op = assemble(model, sub, delta=delta, cut_cell=cut_cell)
        lams.append(spectral_radius(op, tol=tol, max_iter=max_iter).lam)
    return ms, lams


def convergence_sweep(model, ms, ns, delta=0.0, scheme="gauss", cut_cell=True,
                      tol=1e-10, max_iter=50000):
    """Factorial table of lambda over truncations and grid sizes.

    Reports Cauchy differences against the finest (M, N) cell, plus a nested
    truncation family used to check that lambda is nondecreasing in M.
    """
    ms = sorted(float(m) for m in np.atleast_1d(ms))
    ns = sorted(int(n) for n in np.atleast_1d(ns))
    if not ms or not ns:
        raise ValueError("need nonempty M and N lists")
    table = {}
    for m in ms:
        for n in ns:
            grid = default_grid(model, m, n, scheme=scheme)
            op = assemble(model, grid, delta=delta, cut_cell=cut_cell)
            table[(m, n)] = spectral_radius(op, tol=tol, max_iter=max_iter).lam
    lam_ref = table[(ms[-1], ns[-1])]
    rows = [
        {"M": m, "N": n, "lambda": lam, "diff": abs(lam - lam_ref)}
        for (m, n), lam in table.items()
    ]
    trunc_ms, trunc_lams = truncation_lambdas(
        model, ms, ns[-1], delta=delta, cut_cell=cut_cell, tol=tol, max_iter=max_iter
    )
    monotone = all(
        later - earlier >= -1e-9 for earlier, later in zip(trunc_lams, trunc_lams[1:])
    )
    return {
        "table": rows,
        "lambda_ref": lam_ref,
        "M_ref": ms[-1],
        "N_ref": ns[-1],
        "truncation": {"Ms": trunc_ms, "lambdas": trunc_lams, "monotone": monotone},
    }
