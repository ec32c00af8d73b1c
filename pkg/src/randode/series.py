"""Truncated power-series solutions of x'' + a(t) x' + b(t) x = 0.

The solution is built from the fundamental pair s0 (initial data 1, 0) and
s1 (initial data 0, 1); any initial condition gives x(t) = y0*s0(t) + y1*s1(t).
Series coefficients satisfy the two-term convolution recursion

    x[n+2] = -1/((n+2)(n+1)) * sum_{m=0..n} ((m+1) a[n-m] x[m+1] + b[n-m] x[m])

summed in ascending m so results are reproducible bit for bit, and so the
restricted-range fast path for polynomial coefficients matches the general
path exactly (skipped terms are exact zeros).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .distributions import DistributionSpec, RngStream, ppf
from .errors import SpecificationError, UnboundedCoefficientWarning
from .expressions import compile_scalar

__all__ = [
    "CoefficientModel",
    "ProblemSpec",
    "SeriesPair",
    "recur_coefficients",
    "sample_coefficients",
    "realize_series_pair",
    "eval_series",
    "advise_truncation",
]

Entry = Union[float, DistributionSpec]


@dataclass(frozen=True)
class CoefficientModel:
    """Per-index rule for one family of series coefficients.

    kind "explicit": `entries` lists index 0..len-1, each a constant or a
    DistributionSpec; indices beyond are zero.  kind "rule": `rule_expr` is
    a deterministic formula in `n`.  kind "iid": every index draws
    independently from `family`.  `degree_bound` marks the highest nonzero
    index for rule models of polynomials (None means infinite expansion);
    `sup_norm_bounds` feeds the truncation-order advisor.
    """

    kind: str
    entries: Optional[tuple] = None
    rule_expr: Optional[str] = None
    family: Optional[DistributionSpec] = None
    degree_bound: Optional[int] = None
    sup_norm_bounds: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("explicit", "rule", "iid"):
            raise SpecificationError(f"unknown coefficient model kind {self.kind!r}")
        if self.kind == "explicit":
            if not self.entries:
                raise SpecificationError("explicit coefficient model needs entries")
            norm = tuple(
                e if isinstance(e, DistributionSpec) else float(e) for e in self.entries
            )
            object.__setattr__(self, "entries", norm)
            object.__setattr__(self, "degree_bound", len(norm) - 1)
        elif self.kind == "rule":
            if not self.rule_expr:
                raise SpecificationError("rule coefficient model needs an expression")
            compile_scalar(self.rule_expr, "n")  # validate eagerly
        elif self.kind == "iid":
            if self.family is None:
                raise SpecificationError("iid coefficient model needs a distribution")
        if self.sup_norm_bounds is not None:
            bounds = tuple(float(b) for b in self.sup_norm_bounds)
            if any(b < 0 for b in bounds):
                raise SpecificationError("sup-norm bounds must be nonnegative")
            object.__setattr__(self, "sup_norm_bounds", bounds)

    @classmethod
    def explicit(cls, entries: Sequence[Entry], sup_norm_bounds=None):
        return cls("explicit", entries=tuple(entries),
                   sup_norm_bounds=tuple(sup_norm_bounds) if sup_norm_bounds else None)

    @classmethod
    def rule(cls, expr: str, degree_bound=None, sup_norm_bounds=None):
        return cls("rule", rule_expr=expr, degree_bound=degree_bound,
                   sup_norm_bounds=tuple(sup_norm_bounds) if sup_norm_bounds else None)

    @classmethod
    def iid(cls, family: DistributionSpec, sup_norm_bounds=None):
        return cls("iid", family=family,
                   sup_norm_bounds=tuple(sup_norm_bounds) if sup_norm_bounds else None)

    @classmethod
    def zero(cls):
        return cls.explicit([0.0])

    @property
    def is_deterministic(self) -> bool:
        if self.kind == "rule":
            return True
        if self.kind == "explicit":
            return all(not isinstance(e, DistributionSpec) for e in self.entries)
        return False

    def entry(self, n: int) -> Entry:
        """Constant value or DistributionSpec at index n (0.0 beyond degree)."""
        if self.kind == "explicit":
            return self.entries[n] if n < len(self.entries) else 0.0
        if self.kind == "rule":
            if self.degree_bound is not None and n > self.degree_bound:
                return 0.0
            return float(compile_scalar(self.rule_expr, "n")(n))
        return self.family

    def random_laws(self, up_to: int):
        """[(index, DistributionSpec)] for the random entries among 0..up_to."""
        out = []
        for n in range(up_to + 1):
            e = self.entry(n)
            if isinstance(e, DistributionSpec):
                out.append((n, e))
        return out

    def warn_if_unbounded(self, label: str) -> None:
        for n, law in self.random_laws(self.degree_bound if self.degree_bound is not None else 0):
            if not law.is_bounded:
                warnings.warn(
                    f"coefficient {label}_{n} has unbounded support ({law.family}); "
                    "a mean-square solution is not guaranteed -- consider truncating",
                    UnboundedCoefficientWarning,
                    stacklevel=3,
                )
        if self.kind == "iid" and not self.family.is_bounded:
            warnings.warn(
                f"iid coefficient family for {label} has unbounded support "
                f"({self.family.family}); consider truncating",
                UnboundedCoefficientWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class ProblemSpec:
    """Second-order linear problem: x'' + a(t) x' + b(t) x = 0 near t0.

    y0 and y1 are the laws of x(t0) and x'(t0); `radius` optionally declares
    the common convergence radius of the coefficient expansions.
    """

    t0: float
    a: CoefficientModel
    b: CoefficientModel
    y0: DistributionSpec
    y1: DistributionSpec
    radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "t0", float(self.t0))
        if self.radius is not None:
            if self.radius <= 0:
                raise SpecificationError("radius must be positive")
            object.__setattr__(self, "radius", float(self.radius))
        self.a.warn_if_unbounded("a")
        self.b.warn_if_unbounded("b")

    @property
    def deterministic_coefficients(self) -> bool:
        return self.a.is_deterministic and self.b.is_deterministic


@dataclass
class SeriesPair:
    """Truncated coefficient vectors of the fundamental pair at order N."""

    t0: float
    order: int
    s0_coeffs: np.ndarray
    s1_coeffs: np.ndarray

    def __post_init__(self):
        self.s0_coeffs = np.asarray(self.s0_coeffs, dtype=float)
        self.s1_coeffs = np.asarray(self.s1_coeffs, dtype=float)
        n = self.order + 1
        if self.s0_coeffs.shape != (n,) or self.s1_coeffs.shape != (n,):
            raise SpecificationError("coefficient vectors must have length order + 1")
        if not (self.s0_coeffs[0] == 1.0 and self.s0_coeffs[1] == 0.0):
            raise SpecificationError("s0 must start (1, 0)")
        if not (self.s1_coeffs[0] == 0.0 and self.s1_coeffs[1] == 1.0):
            raise SpecificationError("s1 must start (0, 1)")
        if not (np.isfinite(self.s0_coeffs).all() and np.isfinite(self.s1_coeffs).all()):
            raise SpecificationError("series coefficients must be finite")


# ---------------------------------------------------------------------------
# recursion

def _recur_batch(a, b, x0, x1, n_order, deg_a=None, deg_b=None):
    """Vectorized recursion: a, b are (B, K) with K >= n_order - 1.

    Accumulates ascending in m with per-m combined terms, matching the
    scalar definition exactly; out-of-degree entries are exact zeros, so the
    restricted range changes nothing bitwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    batch = a.shape[0]
    x = np.empty((batch, n_order + 1))
    x[:, 0] = x0
    x[:, 1] = x1
    max_deg = None
    if deg_a is not None and deg_b is not None:
        max_deg = max(deg_a, deg_b)
    for n in range(n_order - 1):
        m_lo = 0 if max_deg is None else max(0, n - max_deg)
        acc = np.zeros(batch)
        for m in range(m_lo, n + 1):
            j = n - m
            acc += (m + 1) * a[:, j] * x[:, m + 1] + b[:, j] * x[:, m]
        x[:, n + 2] = acc * (-1.0 / ((n + 2) * (n + 1)))
    return x


def _pad(vec, length):
    arr = np.asarray(vec, dtype=float).ravel()
    if arr.size >= length:
        return arr[:length]
    return np.concatenate([arr, np.zeros(length - arr.size)])


def recur_coefficients(a, b, x0: float, x1: float, n_order: int,
                       deg_a: Optional[int] = None, deg_b: Optional[int] = None) -> np.ndarray:
    """Coefficients x[0..N] of one series for realized inputs a, b.

    a and b hold indices 0..N-2 (shorter vectors are zero-padded).  When both
    degree bounds are given, the inner sum skips the structurally-zero terms:
    O(N * max_deg) instead of O(N^2), with identical results.
    """
    if n_order < 1:
        raise SpecificationError(f"truncation order must be >= 1, got {n_order}")
    k = max(n_order - 1, 1)
    a_row = _pad(a, k)[None, :]
    b_row = _pad(b, k)[None, :]
    return _recur_batch(a_row, b_row, float(x0), float(x1), n_order, deg_a, deg_b)[0]


# ---------------------------------------------------------------------------
# sampling realizations

def _draw_entries(model: CoefficientModel, n_order: int, gen, size: int) -> np.ndarray:
    """(size, N-1) coefficient draws for indices 0..N-2, ascending.

    Deterministic entries are filled without touching the generator, so a
    fully deterministic model consumes no randomness.
    """
    k = n_order - 1
    out = np.empty((size, k))
    for n in range(k):
        e = model.entry(n)
        if isinstance(e, DistributionSpec):
            out[:, n] = ppf(e, gen.random(size))
        else:
            out[:, n] = e
    return out


def sample_coefficients(spec: ProblemSpec, n_order: int, rng, size=None):
    """One realization (or a batch) of the coefficient vectors (a, b).

    Indices are drawn interleaved -- a[n] then b[n], ascending n -- so draws
    for order N + 1 extend the draws for order N from the same stream
    position instead of resampling them.
    """
    gen = rng.generator if isinstance(rng, RngStream) else rng
    batch = 1 if size is None else int(size)
    k = n_order - 1
    a = np.empty((batch, k))
    b = np.empty((batch, k))
    for n in range(k):
        ea = spec.a.entry(n)
        a[:, n] = ppf(ea, gen.random(batch)) if isinstance(ea, DistributionSpec) else ea
        eb = spec.b.entry(n)
        b[:, n] = ppf(eb, gen.random(batch)) if isinstance(eb, DistributionSpec) else eb
    if size is None:
        return a[0], b[0]
    return a, b


def realize_series_pair(spec: ProblemSpec, n_order: int, rng) -> SeriesPair:
    """Sample the coefficient inputs once and build both fundamental series.

    For deterministic coefficient models no randomness is consumed and the
    result is identical for every stream; callers may cache it.
    """
    if n_order < 1:
        raise SpecificationError(f"truncation order must be >= 1, got {n_order}")
    a, b = sample_coefficients(spec, n_order, rng)
    deg_a, deg_b = spec.a.degree_bound, spec.b.degree_bound
    s0 = recur_coefficients(a, b, 1.0, 0.0, n_order, deg_a, deg_b)
    s1 = recur_coefficients(a, b, 0.0, 1.0, n_order, deg_a, deg_b)
    return SeriesPair(spec.t0, n_order, s0, s1)


def _horner(coeffs: np.ndarray, dt) -> np.ndarray:
    """Evaluate sum_n coeffs[..., n] dt^n by Horner's scheme."""
    coeffs = np.asarray(coeffs, dtype=float)
    acc = coeffs[..., -1] * np.ones_like(np.asarray(dt, dtype=float))
    for n in range(coeffs.shape[-1] - 2, -1, -1):
        acc = acc * dt + coeffs[..., n]
    return acc


def eval_series(pair: SeriesPair, t: float):
    """(s0(t), s1(t)) of the truncated fundamental pair, Horner evaluation."""
    dt = float(t) - pair.t0
    return float(_horner(pair.s0_coeffs, dt)), float(_horner(pair.s1_coeffs, dt))


# ---------------------------------------------------------------------------
# truncation-order advisor

def advise_truncation(bounds_a: Sequence[float], bounds_b: Sequence[float],
                      y0_norm: float, y1_norm: float, r: float, rho: float,
                      s: Optional[float] = None, epsilon: float = 1e-3) -> int:
    """Smallest truncation order with guaranteed RMS error below epsilon.

    bounds_a[i], bounds_b[i] dominate the sup norms of the coefficient laws.
    rho = |t - t0| is the evaluation distance, r the expansion radius, and
    s an arbitrary intermediate radius in (rho, r); no optimal choice of s
    is known, so the midpoint is used when s is omitted.  The bound behind
    this advisor is conservative: the returned order errs high.
    """
    if s is None:
        s = 0.5 * (rho + r)
    if not (0.0 <= rho < s < r):
        raise SpecificationError(f"need 0 <= rho < s < r, got rho={rho}, s={s}, r={r}")
    if epsilon <= 0.0:
        raise SpecificationError("epsilon must be positive")
    bounds_a = [float(v) for v in bounds_a]
    bounds_b = [float(v) for v in bounds_b]
    if not bounds_a and not bounds_b:
        raise SpecificationError("at least one sup-norm bound is required")
    if any(v < 0 for v in bounds_a + bounds_b):
        raise SpecificationError("sup-norm bounds must be nonnegative")

    u = 0.5 * (r + s)
    c_u = 0.0
    for i, v in enumerate(bounds_a):
        c_u = max(c_u, v * u**i)
    for i, v in enumerate(bounds_b):
        c_u = max(c_u, v * u**i)

    n = 0
    while not (n * s / ((n + 2) * u) + c_u * s / (n + 2)
               + c_u * s * s / ((n + 2) * (n + 1)) < 1.0):
        n += 1

    h_prev, h_curr = float(y0_norm), float(y1_norm)
    big_k = h_prev  # m = 0 term: H_0 * s^0
    if n >= 1:
        big_k = max(big_k, h_curr * s)
    for m in range(n - 1):
        h_next = (m / ((m + 2) * u) + c_u / (m + 2)) * h_curr \
            + c_u / ((m + 2) * (m + 1)) * h_prev
        h_prev, h_curr = h_curr, h_next
        big_k = max(big_k, h_curr * s ** (m + 2))

    if rho == 0.0:
        return 0
    threshold = math.log(big_k / (epsilon * (1.0 - rho / s))) / math.log(s / rho) - 1.0
    return max(0, math.floor(threshold) + 1)
