"""Exact mean/variance of truncated series via sparse polynomial algebra.

A truncated fundamental series evaluated at fixed t is a polynomial in the
random coefficient inputs.  Running the recursion with polynomial
arithmetic instead of realized numbers yields that polynomial explicitly;
its expectation then factors over independent inputs into products of
per-variable raw moments.  This gives the exactly-known control statistics
that the variance-reduced estimator needs.

Inputs are assumed independent across all variables; the spec layer cannot
express dependence, so nothing checks it here.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .distributions import DistributionSpec, raw_moment
from .errors import BudgetError, NumericalConsistencyError, SpecificationError
from .series import ProblemSpec

__all__ = [
    "VariableSet",
    "SparsePolynomial",
    "symbolic_series",
    "series_polynomial",
    "expectation",
    "mean_and_variance",
]

DEFAULT_TERM_BUDGET = 10**6


@dataclass(frozen=True)
class VariableSet:
    """Ordered random inputs a polynomial may reference."""

    names: Tuple[str, ...]
    laws: Tuple[DistributionSpec, ...]

    def __post_init__(self):
        if len(self.names) != len(self.laws):
            raise SpecificationError("variable names and laws must align")

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


class SparsePolynomial:
    """Polynomial over a VariableSet: {exponent tuple -> coefficient}.

    Exponent tuples are dense over the variable set (one slot per variable).
    Zero-coefficient terms are never stored; iteration for expectation and
    printing uses lexicographic term order so results do not depend on
    insertion order.
    """

    __slots__ = ("varset", "terms")

    def __init__(self, varset: VariableSet, terms: Dict[Tuple[int, ...], float]):
        self.varset = varset
        self.terms = {e: c for e, c in terms.items() if c != 0.0}

    @classmethod
    def constant(cls, varset: VariableSet, value: float) -> "SparsePolynomial":
        v = float(value)
        return cls(varset, {(0,) * len(varset): v} if v != 0.0 else {})

    @classmethod
    def variable(cls, varset: VariableSet, index: int) -> "SparsePolynomial":
        exp = [0] * len(varset)
        exp[index] = 1
        return cls(varset, {tuple(exp): 1.0})

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @property
    def is_constant(self) -> bool:
        return all(sum(e) == 0 for e in self.terms)

    def constant_value(self) -> float:
        return self.terms.get((0,) * len(self.varset), 0.0)

    def max_exponents(self) -> Tuple[int, ...]:
        if not self.terms:
            return (0,) * len(self.varset)
        return tuple(max(e[i] for e in self.terms) for i in range(len(self.varset)))

    def __add__(self, other):
        if not isinstance(other, SparsePolynomial):
            other = SparsePolynomial.constant(self.varset, other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return SparsePolynomial(self.varset, out)

    __radd__ = __add__

    def __neg__(self):
        return SparsePolynomial(self.varset, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, SparsePolynomial):
            other = SparsePolynomial.constant(self.varset, other)
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, SparsePolynomial):
            w = float(other)
            return SparsePolynomial(self.varset, {e: c * w for e, c in self.terms.items()})
        out: Dict[Tuple[int, ...], float] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                key = tuple(i + j for i, j in zip(e1, e2))
                out[key] = out.get(key, 0.0) + c1 * c2
        return SparsePolynomial(self.varset, out)

    __rmul__ = __mul__

    def evaluate(self, values) -> np.ndarray:
        """Evaluate at values of shape (..., n_vars); lexicographic term order."""
        values = np.asarray(values, dtype=float)
        out = np.zeros(values.shape[:-1])
        for exp in sorted(self.terms):
            term = np.full(values.shape[:-1], self.terms[exp])
            for i, e in enumerate(exp):
                if e:
                    term = term * values[..., i] ** e
            out = out + term
        return out

    def __repr__(self):
        if not self.terms:
            return "SparsePolynomial(0)"
        bits = []
        for exp in sorted(self.terms):
            mono = "*".join(
                f"{self.varset.names[i]}^{e}" for i, e in enumerate(exp) if e
            )
            bits.append(f"{self.terms[exp]:g}" + (f"*{mono}" if mono else ""))
        return "SparsePolynomial(" + " + ".join(bits) + ")"


def _collect_variables(spec: ProblemSpec, n_order: int) -> VariableSet:
    names: List[str] = []
    laws: List[DistributionSpec] = []
    for label, model in (("a", spec.a), ("b", spec.b)):
        for n, law in model.random_laws(n_order - 2):
            names.append(f"{label}{n}")
            laws.append(law)
    return VariableSet(tuple(names), tuple(laws))


def symbolic_series(spec: ProblemSpec, n_order: int, which: str = "s0",
                    term_budget: int = DEFAULT_TERM_BUDGET):
    """Coefficient polynomials (indices 0..N) of one fundamental series.

    Runs the same recursion as the numeric path but over sparse polynomials
    whose variables are the random coefficient inputs.  Raises BudgetError
    once the total stored term count passes `term_budget`; callers fall back
    to pilot-sampled moments in that case.

    Returns (varset, [SparsePolynomial]).
    """
    if which not in ("s0", "s1"):
        raise SpecificationError(f"series selector must be 's0' or 's1', got {which!r}")
    if n_order < 1:
        raise SpecificationError(f"truncation order must be >= 1, got {n_order}")
    varset = _collect_variables(spec, n_order)

    def entry_poly(model, label, n):
        e = model.entry(n)
        if isinstance(e, DistributionSpec):
            return SparsePolynomial.variable(varset, varset.index(f"{label}{n}"))
        return SparsePolynomial.constant(varset, e)

    k = n_order - 1
    a_polys = [entry_poly(spec.a, "a", n) for n in range(k)]
    b_polys = [entry_poly(spec.b, "b", n) for n in range(k)]

    x0, x1 = (1.0, 0.0) if which == "s0" else (0.0, 1.0)
    coeffs = [SparsePolynomial.constant(varset, x0), SparsePolynomial.constant(varset, x1)]
    total_terms = sum(p.n_terms for p in coeffs)
    for n in range(n_order - 1):
        acc = SparsePolynomial.constant(varset, 0.0)
        for m in range(n + 1):
            j = n - m
            acc = acc + (m + 1) * a_polys[j] * coeffs[m + 1] + b_polys[j] * coeffs[m]
        nxt = acc * (-1.0 / ((n + 2) * (n + 1)))
        total_terms += nxt.n_terms
        if total_terms > term_budget:
            raise BudgetError(
                f"symbolic series exceeded term budget ({total_terms} > {term_budget}) "
                f"at index {n + 2}"
            )
        coeffs.append(nxt)
    return varset, coeffs


def series_polynomial(coeffs, t: float, t0: float) -> SparsePolynomial:
    """Collapse coefficient polynomials into P = sum_n coeffs[n] (t-t0)^n."""
    dt = float(t) - float(t0)
    out = SparsePolynomial.constant(coeffs[0].varset, 0.0)
    w = 1.0
    for poly in coeffs:
        out = out + poly * w
        w *= dt
    return out


def expectation(poly: SparsePolynomial) -> float:
    """E[P] using independence: term-wise products of per-variable raw moments."""
    laws = poly.varset.laws
    total = 0.0
    for exp in sorted(poly.terms):
        factor = poly.terms[exp]
        for i, e in enumerate(exp):
            if e:
                factor *= raw_moment(laws[i], e)
        total += factor
    return total


def mean_and_variance(coeffs, t: float, t0: float):
    """(E[P(t)], Var[P(t)]) of the series value at t, exactly.

    The variance is computed from the mean-centered square to avoid the
    cancellation of E[P^2] - E[P]^2; tiny negative round-off is clamped.
    """
    p = series_polynomial(coeffs, t, t0)
    mean = expectation(p)
    centered = p - mean
    var = expectation(centered * centered)
    if var < 0.0:
        if var < -1e-12:
            raise NumericalConsistencyError(f"negative variance {var:.3e}")
        var = 0.0
    return mean, var
