"""Process-level definitions: innovation laws, initial laws, AR/MA models.

An innovation law enters everywhere through four handles: density, CDF,
quantile, and an inverse-CDF sampler. Sampling is inverse-CDF throughout
(no rejection steps) so that a replicate's draw sequence is a deterministic
function of its stream, and streams are derived from (seed, path-tag) pairs
via a keyed counter-based generator. Together these make every Monte Carlo
result bit-reproducible under any thread schedule.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri


class RequestedDensityOfAtomicLaw(Exception):
    """A density was requested from a law with atoms (Rademacher)."""


# ---------------------------------------------------------------------------
# random streams


def substream(seed, *path):
    """Derive an independent random stream for (seed, *path).

    The tag is hashed into the key of a counter-based generator (Philox), so
    distinct tags give statistically independent streams and the draw order
    within one tag is fixed no matter how work is scheduled across threads.
    """
    tag = repr((int(seed),) + tuple(path)).encode()
    digest = hashlib.blake2b(tag, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


# ---------------------------------------------------------------------------
# innovation distributions


class InnovationDistribution:
    """Base class; subclasses provide density/cdf/quantile and support bounds."""

    kind = "base"
    has_density = True

    def density(self, x):
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def quantile(self, u):
        raise NotImplementedError

    @property
    def support(self):
        """(lo, hi) support bounds, possibly infinite."""
        raise NotImplementedError

    def sample(self, stream, size=None):
        """Inverse-CDF draw(s) from the law using the given stream."""
        return self.quantile(stream.random(size))

    def tail_radius(self, eps):
        """Smallest M with P(|xi| > M) <= eps."""
        raise NotImplementedError

    def exponential_decay_rate(self):
        """A rate r with density(x) <= C exp(-r|x|); inf for compact support."""
        raise NotImplementedError

    def params(self):
        return {}

    def to_json(self):
        return {"kind": self.kind, **self.params()}


@dataclass(frozen=True)
class Uniform(InnovationDistribution):
    lo: float
    hi: float

    kind = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"uniform law needs lo < hi, got ({self.lo}, {self.hi})")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lo) & (x <= self.hi)
        return np.where(inside, 1.0 / (self.hi - self.lo), 0.0)[()]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)[()]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return (self.lo + u * (self.hi - self.lo))[()]

    @property
    def support(self):
        return (self.lo, self.hi)

    def tail_radius(self, eps):
        return max(abs(self.lo), abs(self.hi))

    def exponential_decay_rate(self):
        return math.inf

    def params(self):
        return {"lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Gaussian(InnovationDistribution):
    """Centered normal with standard deviation sd.

    The quantile goes through ndtri, the standard rational approximation of
    the inverse normal CDF (absolute accuracy well below 1e-9); it is the
    single source of Gaussian randomness in the package.
    """

    sd: float = 1.0

    kind = "gaussian"

    def __post_init__(self):
        if not self.sd > 0:
            raise ValueError(f"gaussian law needs sd > 0, got {self.sd}")

    def density(self, x):
        x = np.asarray(x, dtype=float)
        z = x / self.sd
        return (np.exp(-0.5 * z * z) / (self.sd * math.sqrt(2.0 * math.pi)))[()]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return ndtr(x / self.sd)[()]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return (self.sd * ndtri(u))[()]

    @property
    def support(self):
        return (-math.inf, math.inf)

    def tail_radius(self, eps):
        return float(self.sd * ndtri(1.0 - eps / 2.0))

    def exponential_decay_rate(self):
        return 1.0 / self.sd

    def params(self):
        return {"sd": self.sd}


@dataclass(frozen=True)
class Exponential(InnovationDistribution):
    """Standard exponential (rate 1) on [0, inf)."""

    kind = "exponential"

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, np.exp(-np.clip(x, 0.0, None)), 0.0)[()]

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0.0, -np.expm1(-np.clip(x, 0.0, None)), 0.0)[()]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return (-np.log1p(-u))[()]

    @property
    def support(self):
        return (0.0, math.inf)

    def tail_radius(self, eps):
        return -math.log(eps)

    def exponential_decay_rate(self):
        return 1.0

    def params(self):
        return {}


@dataclass(frozen=True)
class Rademacher(InnovationDistribution):
    """+-1 with probability 1/2 each. No density; CDF and sampler only."""

    kind = "rademacher"
    has_density = False

    def density(self, x):
        raise RequestedDensityOfAtomicLaw(
            "the Rademacher law has atoms at -1 and +1 and no density"
        )

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 1.0, 1.0, np.where(x >= -1.0, 0.5, 0.0))[()]

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        return np.where(u < 0.5, -1.0, 1.0)[()]

    @property
    def support(self):
        return (-1.0, 1.0)

    def tail_radius(self, eps):
        return 1.0

    def exponential_decay_rate(self):
        return math.inf

    def params(self):
        return {}


# module-level operation aliases


def density(dist, x):
    """phi(x) for the law; raises RequestedDensityOfAtomicLaw for Rademacher."""
    return dist.density(x)


def cdf(dist, x):
    """F(x) for the law."""
    return dist.cdf(x)


def sample(dist, stream, size=None):
    """Inverse-CDF draw(s) from the law."""
    return dist.sample(stream, size)


# ---------------------------------------------------------------------------
# initial distributions (AR only; the MA state is built from fresh innovations)


class InitialDistribution:
    def sample(self, p, stream, size=None):
        """Draw the initial state vector (Z_0 .. Z_{p-1}).

        With size=None returns shape (p,), otherwise shape (size, p).
        """
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(InitialDistribution):
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def sample(self, p, stream, size=None):
        if len(self.values) != p:
            raise ValueError(
                f"point-mass initial state has length {len(self.values)}, model order is {p}"
            )
        v = np.array(self.values, dtype=float)
        if size is None:
            return v
        return np.tile(v, (size, 1))

    def to_json(self):
        return {"kind": "point_mass", "values": list(self.values)}


@dataclass(frozen=True)
class IIDInnovation(InitialDistribution):
    """Initial coordinates drawn iid; None defers to the model's innovation law."""

    innovation: InnovationDistribution = None

    def sample(self, p, stream, size=None):
        if self.innovation is None:
            raise ValueError("initial law has no distribution bound to it yet")
        if size is None:
            return self.innovation.sample(stream, p)
        return self.innovation.sample(stream, (size, p))

    def to_json(self):
        return {"kind": "iid", "innovation": self.innovation.to_json()}


@dataclass(frozen=True)
class StationaryAR1Gaussian(InitialDistribution):
    """N(0, 1/(1-a1^2)), the stationary law of a Gaussian AR(1) with |a1| < 1."""

    a1: float

    def __post_init__(self):
        if not abs(self.a1) < 1.0:
            raise ValueError(f"stationary AR(1) initial law needs |a1| < 1, got {self.a1}")

    def sample(self, p, stream, size=None):
        if p != 1:
            raise ValueError(f"stationary AR(1) initial law is order-1 only, model order is {p}")
        sd = 1.0 / math.sqrt(1.0 - self.a1 * self.a1)
        shape = None if size is None else (size, 1)
        u = stream.random(shape)
        out = sd * ndtri(u)
        if size is None:
            return np.atleast_1d(out)
        return out

    def to_json(self):
        return {"kind": "stationary_ar1_gaussian", "a1": self.a1}


def sample_initial(init, p, stream, size=None):
    """Draw Z_0..Z_{p-1} from the initial law; errors on dimension mismatch."""
    return init.sample(p, stream, size=size)


# ---------------------------------------------------------------------------
# survival conventions and models


class SurvivalConvention(Enum):
    """Whether a path survives at level z >= 0 or z > 0.

    For innovations with a density the two events coincide almost surely (and
    double-precision ties are resolved the same way for both runs of a common
    seed); for atomic laws like Rademacher they genuinely differ.
    """

    NON_NEGATIVE = "ge"
    STRICTLY_POSITIVE = "gt"

    def survives(self, z):
        if self is SurvivalConvention.NON_NEGATIVE:
            return np.asarray(z) >= 0.0
        return np.asarray(z) > 0.0


def _as_coeffs(coeffs):
    out = tuple(float(c) for c in np.atleast_1d(np.asarray(coeffs, dtype=float)))
    if len(out) == 0:
        raise ValueError("coefficient vector must be nonempty")
    return out


@dataclass(frozen=True)
class ARModel:
    """Z_i = sum_j a_j Z_{i-j} + xi_i, driven by iid innovations."""

    coeffs: tuple
    innovation: InnovationDistribution
    initial: InitialDistribution
    convention: SurvivalConvention = SurvivalConvention.NON_NEGATIVE
    order: int = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))
        p = len(self.coeffs) if self.order is None else int(self.order)
        if p != len(self.coeffs):
            raise ValueError(
                f"declared order {p} does not match coefficient vector of length {len(self.coeffs)}"
            )
        object.__setattr__(self, "order", p)
        if isinstance(self.initial, IIDInnovation) and self.initial.innovation is None:
            object.__setattr__(self, "initial", IIDInnovation(self.innovation))
        if isinstance(self.initial, PointMass) and len(self.initial.values) != p:
            raise ValueError(
                f"point-mass initial state has length {len(self.initial.values)}, model order is {p}"
            )
        if isinstance(self.initial, StationaryAR1Gaussian) and p != 1:
            raise ValueError("stationary AR(1) initial law requires order 1")

    def to_json(self):
        return {
            "process": "ar",
            "order": self.order,
            "coeffs": list(self.coeffs),
            "innovation": self.innovation.to_json(),
            "initial": self.initial.to_json(),
            "convention": self.convention.value,
        }


@dataclass(frozen=True)
class MAModel:
    """Z_i = xi_i + sum_j a_j xi_{i-j}, driven by iid innovations."""

    coeffs: tuple
    innovation: InnovationDistribution
    convention: SurvivalConvention = SurvivalConvention.NON_NEGATIVE
    order: int = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_coeffs(self.coeffs))
        q = len(self.coeffs) if self.order is None else int(self.order)
        if q != len(self.coeffs):
            raise ValueError(
                f"declared order {q} does not match coefficient vector of length {len(self.coeffs)}"
            )
        object.__setattr__(self, "order", q)

    def to_json(self):
        return {
            "process": "ma",
            "order": self.order,
            "coeffs": list(self.coeffs),
            "innovation": self.innovation.to_json(),
            "convention": self.convention.value,
        }


# ---------------------------------------------------------------------------
# JSON experiment schema


def innovation_from_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError(f"innovation description must be an object with a 'kind' field, got {obj!r}")
    kind = obj["kind"]
    if kind == "uniform":
        return Uniform(float(obj["lo"]), float(obj["hi"]))
    if kind == "gaussian":
        return Gaussian(float(obj.get("sd", 1.0)))
    if kind == "exponential":
        return Exponential()
    if kind == "rademacher":
        return Rademacher()
    raise ValueError(f"unknown innovation kind {kind!r}")


def initial_from_json(obj, default_innovation):
    if obj is None:
        return IIDInnovation(default_innovation)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ValueError(f"initial description must be an object with a 'kind' field, got {obj!r}")
    kind = obj["kind"]
    if kind == "point_mass":
        return PointMass(tuple(obj["values"]))
    if kind == "iid":
        innov = obj.get("innovation")
        return IIDInnovation(default_innovation if innov is None else innovation_from_json(innov))
    if kind == "stationary_ar1_gaussian":
        return StationaryAR1Gaussian(float(obj["a1"]))
    raise ValueError(f"unknown initial-law kind {kind!r}")


def convention_from_json(tag):
    if tag in (None, "ge"):
        return SurvivalConvention.NON_NEGATIVE
    if tag == "gt":
        return SurvivalConvention.STRICTLY_POSITIVE
    raise ValueError(f"unknown convention {tag!r} (expected 'ge' or 'gt')")


def model_from_json(obj):
    """Build an ARModel or MAModel from the experiment schema.

    Schema: {"process": "ar"|"ma", "order": int, "coeffs": [...],
             "innovation": {"kind": ..., ...}, "initial": {...}, "convention": "ge"|"gt"}.
    The order field is optional (inferred from coeffs), as is initial (iid).
    """
    if not isinstance(obj, dict):
        raise ValueError("experiment description must be a JSON object")
    process = obj.get("process")
    if process not in ("ar", "ma"):
        raise ValueError(f"unknown process {process!r} (expected 'ar' or 'ma')")
    coeffs = obj.get("coeffs")
    if coeffs is None:
        raise ValueError("experiment description is missing 'coeffs'")
    innovation = innovation_from_json(obj.get("innovation"))
    convention = convention_from_json(obj.get("convention"))
    order = obj.get("order")
    if process == "ar":
        initial = initial_from_json(obj.get("initial"), innovation)
        return ARModel(coeffs, innovation, initial, convention, order=order)
    if "initial" in obj:
        raise ValueError("MA models take no initial law; the state is built from innovations")
    return MAModel(coeffs, innovation, convention, order=order)
