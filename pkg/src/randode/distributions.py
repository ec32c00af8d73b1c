"""Univariate distribution layer: seeded sampling, densities, raw moments.

Every law used by the solver presets lives here: uniform, normal, gamma,
beta, exponential, Bernoulli, Poisson, point mass, and user-defined
densities given as expression strings.  Any law can carry a truncation
interval; truncated laws renormalize by the contained probability and
sample through the restricted inverse CDF (continuous) or renormalized
atoms (discrete).

Sampling draws exactly one uniform per scalar and pushes it through the
inverse CDF.  This makes draw sequences reproducible per (seed, stream_id)
and lets a longer coefficient vector extend, rather than resample, a
shorter one drawn from the same stream position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, special, stats

from .errors import SpecificationError, UnsupportedOperationError
from .expressions import compile_array

__all__ = [
    "DistributionSpec",
    "RngStream",
    "sample",
    "density",
    "raw_moment",
    "l2_norm",
    "atoms",
]

_CONTINUOUS = ("uniform", "normal", "gamma", "beta", "exponential", "custom")
_DISCRETE = ("bernoulli", "poisson", "point_mass")
_FAMILIES = _CONTINUOUS + _DISCRETE

# smallest uniform fed to an inverse CDF; guards ndtri(0) = -inf
_U_FLOOR = 1e-300

_QUAD_OPTS = {"epsabs": 1e-12, "epsrel": 1e-10, "limit": 200}


@dataclass(frozen=True)
class DistributionSpec:
    """A univariate law: family name, parameters, optional truncation.

    `params` is family-specific and positional:
    uniform (a, b), normal (mu, sigma), gamma (shape, rate), beta (alpha, beta),
    exponential (rate,), bernoulli (p,), poisson (lam,), point_mass (c,),
    custom () with `density_expr` holding a normalized density of `y`.
    """

    family: str
    params: tuple = ()
    truncate: Optional[tuple] = None
    density_expr: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.truncate is not None:
            lo, hi = self.truncate
            object.__setattr__(self, "truncate", (float(lo), float(hi)))
        _validate(self)

    # --- constructors ---------------------------------------------------
    @classmethod
    def uniform(cls, a, b):
        return cls("uniform", (a, b))

    @classmethod
    def normal(cls, mu, sigma):
        return cls("normal", (mu, sigma))

    @classmethod
    def gamma(cls, shape, rate):
        return cls("gamma", (shape, rate))

    @classmethod
    def beta(cls, alpha, beta):
        return cls("beta", (alpha, beta))

    @classmethod
    def exponential(cls, rate):
        return cls("exponential", (rate,))

    @classmethod
    def bernoulli(cls, p):
        return cls("bernoulli", (p,))

    @classmethod
    def poisson(cls, lam):
        return cls("poisson", (lam,))

    @classmethod
    def point_mass(cls, c):
        return cls("point_mass", (c,))

    @classmethod
    def custom(cls, density_expr: str):
        return cls("custom", (), density_expr=density_expr)

    def truncated(self, lo, hi) -> "DistributionSpec":
        return DistributionSpec(self.family, self.params, (lo, hi), self.density_expr)

    # --- structure ------------------------------------------------------
    @property
    def is_discrete(self) -> bool:
        return self.family in _DISCRETE

    @property
    def is_continuous(self) -> bool:
        return self.family in _CONTINUOUS

    @property
    def is_bounded(self) -> bool:
        """True when the support is a bounded set."""
        if self.truncate is not None:
            return True
        return self.family in ("uniform", "beta", "bernoulli", "point_mass")

    def support(self) -> tuple:
        """(lo, hi) hull of the support, intersected with the truncation."""
        lo, hi = _base_support(self)
        if self.truncate is not None:
            lo = max(lo, self.truncate[0])
            hi = min(hi, self.truncate[1])
        return lo, hi


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id).

    `stream_id` is an int or tuple of ints; children extend the tuple, so
    independent substreams for parallel chunks or study cells are cheap and
    reproducible.  Equal (seed, stream_id) gives bitwise-identical draws.
    """

    def __init__(self, seed: int, stream_id=()):
        self.seed = int(seed)
        self.stream_id = (int(stream_id),) if isinstance(stream_id, (int, np.integer)) else tuple(
            int(i) for i in stream_id
        )
        self._generator = None

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            seq = np.random.SeedSequence(self.seed, spawn_key=self.stream_id)
            self._generator = np.random.Generator(np.random.PCG64(seq))
        return self._generator

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(int(i) for i in ids))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


# ---------------------------------------------------------------------------
# validation

def _validate(dist: DistributionSpec) -> None:
    fam, p = dist.family, dist.params
    if fam not in _FAMILIES:
        raise SpecificationError(f"unknown distribution family {fam!r}")
    expected = {
        "uniform": 2, "normal": 2, "gamma": 2, "beta": 2,
        "exponential": 1, "bernoulli": 1, "poisson": 1, "point_mass": 1, "custom": 0,
    }[fam]
    if len(p) != expected:
        raise SpecificationError(f"{fam} expects {expected} parameters, got {len(p)}")
    if fam == "uniform" and not p[0] < p[1]:
        raise SpecificationError(f"uniform requires a < b, got {p}")
    if fam == "normal" and not p[1] > 0:
        raise SpecificationError(f"normal requires sigma > 0, got {p[1]}")
    if fam == "gamma" and not (p[0] > 0 and p[1] > 0):
        raise SpecificationError(f"gamma requires shape > 0 and rate > 0, got {p}")
    if fam == "beta" and not (p[0] > 0 and p[1] > 0):
        raise SpecificationError(f"beta requires alpha > 0 and beta > 0, got {p}")
    if fam == "exponential" and not p[0] > 0:
        raise SpecificationError(f"exponential requires rate > 0, got {p[0]}")
    if fam == "bernoulli" and not 0.0 <= p[0] <= 1.0:
        raise SpecificationError(f"bernoulli requires 0 <= p <= 1, got {p[0]}")
    if fam == "poisson" and not p[0] > 0:
        raise SpecificationError(f"poisson requires lambda > 0, got {p[0]}")
    if fam == "custom" and not dist.density_expr:
        raise SpecificationError("custom distribution requires a density expression")
    if dist.truncate is not None:
        lo, hi = dist.truncate
        if not lo < hi:
            raise SpecificationError(f"truncation requires lo < hi, got [{lo}, {hi}]")
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise SpecificationError("truncation interval must be finite")
        if fam == "point_mass" and not lo <= p[0] <= hi:
            raise SpecificationError(
                f"point mass at {p[0]} lies outside truncation [{lo}, {hi}]"
            )
        if _contained_probability(dist) <= 0.0:
            raise SpecificationError(
                f"truncation [{lo}, {hi}] carries zero probability for {fam}{p}"
            )


def _base_support(dist: DistributionSpec) -> tuple:
    fam, p = dist.family, dist.params
    if fam == "uniform":
        return p[0], p[1]
    if fam == "normal":
        return -math.inf, math.inf
    if fam in ("gamma", "exponential"):
        return 0.0, math.inf
    if fam == "beta":
        return 0.0, 1.0
    if fam == "bernoulli":
        return 0.0, 1.0
    if fam == "poisson":
        return 0.0, math.inf
    if fam == "point_mass":
        return p[0], p[0]
    # custom: effective support found numerically
    lo, hi, _, _ = _custom_table(dist.density_expr, dist.truncate)
    return lo, hi


# ---------------------------------------------------------------------------
# base cdf / pdf / ppf (continuous families)

def _base_cdf(dist: DistributionSpec, y: float) -> float:
    fam, p = dist.family, dist.params
    if fam == "uniform":
        a, b = p
        return min(1.0, max(0.0, (y - a) / (b - a)))
    if fam == "normal":
        mu, sigma = p
        return float(special.ndtr((y - mu) / sigma))
    if fam == "gamma":
        shape, rate = p
        return float(special.gammainc(shape, max(rate * y, 0.0)))
    if fam == "beta":
        a, b = p
        return float(special.betainc(a, b, min(1.0, max(0.0, y))))
    if fam == "exponential":
        rate = p[0]
        return -math.expm1(-rate * y) if y > 0 else 0.0
    raise UnsupportedOperationError(f"no closed CDF for family {fam!r}")


def _base_ppf(dist: DistributionSpec, u: np.ndarray) -> np.ndarray:
    fam, p = dist.family, dist.params
    u = np.clip(u, _U_FLOOR, None)
    if fam == "uniform":
        a, b = p
        return a + u * (b - a)
    if fam == "normal":
        mu, sigma = p
        return mu + sigma * special.ndtri(u)
    if fam == "gamma":
        shape, rate = p
        return special.gammaincinv(shape, u) / rate
    if fam == "beta":
        a, b = p
        return special.betaincinv(a, b, u)
    if fam == "exponential":
        rate = p[0]
        return -np.log1p(-u) / rate
    if fam == "point_mass":
        return np.full_like(u, p[0])
    if fam == "bernoulli":
        return (u > 1.0 - p[0]).astype(float)
    if fam == "poisson":
        return stats.poisson.ppf(u, p[0])
    if fam == "custom":
        lo, hi, grid, cdf = _custom_table(dist.density_expr, dist.truncate)
        return np.interp(u, cdf, grid)
    raise UnsupportedOperationError(f"cannot invert CDF for family {fam!r}")


def _base_pdf(dist: DistributionSpec, y: np.ndarray) -> np.ndarray:
    fam, p = dist.family, dist.params
    y = np.asarray(y, dtype=float)
    if fam == "uniform":
        a, b = p
        return np.where((y >= a) & (y <= b), 1.0 / (b - a), 0.0)
    if fam == "normal":
        mu, sigma = p
        z = (y - mu) / sigma
        return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))
    if fam == "gamma":
        shape, rate = p
        return stats.gamma.pdf(y, shape, scale=1.0 / rate)
    if fam == "beta":
        a, b = p
        return stats.beta.pdf(y, a, b)
    if fam == "exponential":
        rate = p[0]
        return np.where(y >= 0.0, rate * np.exp(-rate * np.maximum(y, 0.0)), 0.0)
    if fam == "custom":
        fn = compile_array(dist.density_expr, "y")
        return np.maximum(fn(y), 0.0)
    raise UnsupportedOperationError(f"family {fam!r} has no density")


# ---------------------------------------------------------------------------
# custom densities: effective support + inverse-CDF table

_CUSTOM_KNOTS = 100_000


@lru_cache(maxsize=32)
def _custom_table(expr: str, truncate):
    """(lo, hi, grid, cdf) table for a custom density, 1e5 knots.

    The effective support is expanded until the captured mass stops growing
    (tail < 1e-10); the table then supports interpolation-based sampling.
    """
    fn = compile_array(expr, "y")

    def mass(lo, hi):
        val, _ = integrate.quad(lambda y: float(fn(np.asarray(y))), lo, hi, **_QUAD_OPTS)
        return val

    if truncate is not None:
        lo, hi = truncate
    else:
        r = 1.0
        total = mass(-r, r)
        while r < 1e12:
            wider = mass(-2 * r, 2 * r)
            if wider - total < 1e-10 and total > 0.5:
                break
            total, r = wider, 2 * r
        lo, hi = -2 * r, 2 * r
    grid = np.linspace(lo, hi, _CUSTOM_KNOTS)
    pdf = np.maximum(fn(grid), 0.0)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    if cdf[-1] <= 0.0:
        raise SpecificationError(f"custom density {expr!r} has zero mass on [{lo}, {hi}]")
    cdf /= cdf[-1]
    # make strictly increasing for interpolation
    eps = np.arange(len(cdf)) * 1e-15
    cdf = np.maximum.accumulate(cdf) + eps
    cdf /= cdf[-1]
    return lo, hi, grid, cdf


@lru_cache(maxsize=64)
def _custom_normalizer(expr: str) -> float:
    fn = compile_array(expr, "y")
    lo, hi, _, _ = _custom_table(expr, None)
    val, _ = integrate.quad(lambda y: float(fn(np.asarray(y))), lo, hi, **_QUAD_OPTS)
    return val


# ---------------------------------------------------------------------------
# truncation helpers

def _contained_probability(dist: DistributionSpec) -> float:
    """Probability the base law assigns to the truncation interval."""
    if dist.truncate is None:
        return 1.0
    lo, hi = dist.truncate
    if dist.family == "point_mass":
        return 1.0 if lo <= dist.params[0] <= hi else 0.0
    if dist.is_discrete:
        pts, probs = _base_atoms(dist)
        mask = (pts >= lo) & (pts <= hi)
        return float(probs[mask].sum())
    if dist.family == "custom":
        fn = compile_array(dist.density_expr, "y")
        val, _ = integrate.quad(lambda y: float(fn(np.asarray(y))), lo, hi, **_QUAD_OPTS)
        return val / _custom_normalizer(dist.density_expr)
    return _base_cdf(dist, hi) - _base_cdf(dist, lo)


def _base_atoms(dist: DistributionSpec):
    """Support points and probabilities of the base discrete law."""
    fam, p = dist.family, dist.params
    if fam == "point_mass":
        return np.array([p[0]]), np.array([1.0])
    if fam == "bernoulli":
        return np.array([0.0, 1.0]), np.array([1.0 - p[0], p[0]])
    if fam == "poisson":
        lam = p[0]
        kmax = int(stats.poisson.ppf(1.0 - 1e-15, lam)) + 10
        k = np.arange(kmax + 1)
        return k.astype(float), stats.poisson.pmf(k, lam)
    raise UnsupportedOperationError(f"family {fam!r} is not discrete")


def atoms(dist: DistributionSpec):
    """(points, probabilities) of a discrete law, truncation applied.

    Poisson atoms are enumerated until the neglected tail is below 1e-15.
    """
    if not dist.is_discrete:
        raise UnsupportedOperationError(f"{dist.family} is not a discrete law")
    pts, probs = _base_atoms(dist)
    if dist.truncate is not None:
        lo, hi = dist.truncate
        mask = (pts >= lo) & (pts <= hi)
        pts, probs = pts[mask], probs[mask]
        total = probs.sum()
        if total <= 0.0:
            raise SpecificationError("truncation interval carries zero probability")
        probs = probs / total
    return pts, probs


# ---------------------------------------------------------------------------
# public operations

def sample(dist: DistributionSpec, rng, size=None):
    """Draw from the (possibly truncated) law.

    `rng` is an RngStream or numpy Generator.  With `size=None` returns a
    float; otherwise an ndarray.  Exactly one uniform is consumed per
    scalar drawn.
    """
    gen = rng.generator if isinstance(rng, RngStream) else rng
    u = gen.random(size if size is not None else 1)
    out = ppf(dist, u)
    return float(out[0]) if size is None else out


def ppf(dist: DistributionSpec, u: np.ndarray) -> np.ndarray:
    """Quantile transform honoring truncation; accepts u in [0, 1)."""
    u = np.asarray(u, dtype=float)
    if dist.truncate is None:
        return _base_ppf(dist, u)
    if dist.is_discrete:
        pts, probs = atoms(dist)
        edges = np.cumsum(probs)
        idx = np.searchsorted(edges, u, side="right")
        return pts[np.minimum(idx, len(pts) - 1)]
    if dist.family == "custom":
        # table already restricted to the truncation interval
        return _base_ppf(dist, u)
    lo, hi = dist.truncate
    f_lo, f_hi = _base_cdf(dist, lo), _base_cdf(dist, hi)
    return _base_ppf(DistributionSpec(dist.family, dist.params), f_lo + u * (f_hi - f_lo))


def density(dist: DistributionSpec, y):
    """Density of an absolutely continuous (possibly truncated) law at y.

    Vectorized over y.  Discrete laws raise UnsupportedOperationError.
    """
    if dist.is_discrete:
        raise UnsupportedOperationError(
            f"density undefined for discrete family {dist.family!r}"
        )
    y_arr = np.asarray(y, dtype=float)
    pdf = _base_pdf(dist, y_arr)
    if dist.family == "custom":
        pdf = pdf / _custom_normalizer(dist.density_expr)
    if dist.truncate is not None:
        lo, hi = dist.truncate
        z = _contained_probability(dist)
        pdf = np.where((y_arr >= lo) & (y_arr <= hi), pdf / z, 0.0)
    return float(pdf) if np.isscalar(y) else pdf


def _stirling2_row(k: int) -> list:
    """Stirling numbers of the second kind S(k, 0..k)."""
    row = [1]
    for n in range(1, k + 1):
        prev, row = row, [0] * (n + 1)
        for j in range(1, n + 1):
            row[j] = (prev[j] if j < n else 0) * j + prev[j - 1]
    return row


def _closed_raw_moment(dist: DistributionSpec, k: int) -> float:
    fam, p = dist.family, dist.params
    if k == 0:
        return 1.0
    if fam == "uniform":
        a, b = p
        return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))
    if fam == "normal":
        mu, sigma = p
        total = 0.0
        for j in range(0, k + 1, 2):
            total += math.comb(k, j) * mu ** (k - j) * sigma**j * _double_factorial(j - 1)
        return total
    if fam == "gamma":
        shape, rate = p
        out = 1.0
        for j in range(k):
            out *= (shape + j) / rate
        return out
    if fam == "beta":
        a, b = p
        out = 1.0
        for j in range(k):
            out *= (a + j) / (a + b + j)
        return out
    if fam == "exponential":
        return math.factorial(k) / p[0] ** k
    if fam == "bernoulli":
        return p[0]
    if fam == "poisson":
        lam = p[0]
        s_row = _stirling2_row(k)
        return sum(s_row[j] * lam**j for j in range(1, k + 1))
    if fam == "point_mass":
        return p[0] ** k
    raise UnsupportedOperationError(f"no closed moment for family {fam!r}")


def _double_factorial(n: int) -> float:
    if n <= 0:
        return 1.0
    out = 1.0
    while n > 1:
        out *= n
        n -= 2
    return out


@lru_cache(maxsize=16384)
def raw_moment(dist: DistributionSpec, k: int) -> float:
    """E[Z^k]: closed form where available, adaptive quadrature otherwise."""
    if k < 0:
        raise SpecificationError(f"moment order must be >= 0, got {k}")
    if dist.truncate is None and dist.family != "custom":
        return _closed_raw_moment(dist, k)
    if dist.is_discrete:
        pts, probs = atoms(dist)
        return float(np.sum(probs * pts**k))
    lo, hi = dist.support()
    z = _contained_probability(dist)
    norm = _custom_normalizer(dist.density_expr) if dist.family == "custom" else 1.0

    def integrand(y):
        return y**k * float(_base_pdf(dist, np.asarray(y))) / (norm * z)

    val, err = integrate.quad(integrand, lo, hi, **_QUAD_OPTS)
    if not math.isfinite(val) or (abs(val) > 1e-12 and err > 1e-6 * abs(val)):
        raise SpecificationError(
            f"raw moment k={k} of {dist.family} did not converge (err {err:.2e})"
        )
    return val


def l2_norm(dist: DistributionSpec) -> float:
    """||Z||_2 = sqrt(E[Z^2]); used by the truncation-order advisor."""
    return math.sqrt(raw_moment(dist, 2))
