"""Monte Carlo estimation of the solution density at a fixed time.

The density of x(t) = y0*s0(t) + y1*s1(t) is an expectation of the initial
condition's density evaluated along an affine transform of the remaining
randomness:

    f(x) = E[ f_y0((x - y1*s1(t)) / s0(t)) / |s0(t)| ]        (role via_y0)

with the symmetric via_y1 form for t != t0 when y1 carries the density.
`estimate_crude` averages this kernel over sampled series realizations;
`estimate_control_variates` subtracts a zero-mean control built from a
lower-order truncation of the same series, whose mean and variance the
polynomial moment engine knows exactly.

Sampling is chunked; each chunk owns an independent substream and chunks
merge in fixed order, so results depend on (seed, chunk_size) but never on
thread count.  Within a chunk the full chunk_size worth of uniforms is
always drawn, which makes the first P samples of a run independent of the
total sample count (nested prefixes are bitwise reproducible).
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from . import polymoments
from .distributions import DistributionSpec, RngStream, atoms, density, ppf
from .errors import (
    BudgetError,
    ControlVariateFallbackWarning,
    DegenerateSamplesWarning,
    EstimationError,
    SpecificationError,
    UnsupportedOperationError,
)
from .series import ProblemSpec, _horner, _recur_batch, realize_series_pair, sample_coefficients

__all__ = [
    "EstimatorConfig",
    "DensityEstimate",
    "density_kernel",
    "resolve_role",
    "auto_grid",
    "estimate_crude",
    "estimate_control_variates",
    "exact_density",
]

# substream roles under one estimate-level stream
_GRID_STREAM = 0
_MAIN_STREAM = 1
_PILOT_STREAM = 2
_MOMENT_STREAM = 3

_PILOT_MOMENT_SAMPLES = 100_000


@dataclass
class EstimatorConfig:
    """Knobs for one density estimation run.

    role: "via_y0", "via_y1", or "auto" (prefer y0 when it has a density).
    method: "crude" or "control_variates"; the latter reads control_series
    ("s0"/"s1"), control_order (< n_order) and pilot_m.
    chunk_size fixes the sample chunking and therefore the exact arithmetic;
    threads only changes wall time, never values.
    """

    n_order: int
    m_samples: int
    role: str = "auto"
    method: str = "crude"
    control_series: str = "s0"
    control_order: Optional[int] = None
    pilot_m: int = 2500
    seed: int = 0
    threads: int = 1
    chunk_size: int = 2048
    degenerate_threshold: float = 1e-8
    degenerate_fraction_warn: float = 1e-4
    term_budget: int = polymoments.DEFAULT_TERM_BUDGET

    def __post_init__(self):
        if self.n_order < 1:
            raise SpecificationError(f"n_order must be >= 1, got {self.n_order}")
        if self.m_samples < 1:
            raise SpecificationError(f"m_samples must be >= 1, got {self.m_samples}")
        if self.role not in ("auto", "via_y0", "via_y1"):
            raise SpecificationError(f"unknown role {self.role!r}")
        if self.method not in ("crude", "control_variates"):
            raise SpecificationError(f"unknown method {self.method!r}")
        if self.method == "control_variates":
            if self.control_series not in ("s0", "s1"):
                raise SpecificationError("control_series must be 's0' or 's1'")
            if self.control_order is None or not 1 <= self.control_order < self.n_order:
                raise SpecificationError("control_order must satisfy 1 <= N0 < N")
            if not 2 <= self.pilot_m <= self.m_samples:
                raise SpecificationError("pilot_m must lie in [2, m_samples]")
        if self.chunk_size < 1:
            raise SpecificationError("chunk_size must be positive")


@dataclass
class Diagnostics:
    min_abs_denominator: float
    degenerate_fraction: float
    skipped_fraction: float
    flagged: bool = False  # degenerate fraction crossed the warn level


@dataclass
class ControlInfo:
    series: str
    order: int
    pilot_m: int
    mean: float
    variance: float
    c_star: Optional[np.ndarray]
    correlation: Optional[np.ndarray]
    moments_source: str  # "exact" or "pilot"
    fallback: Optional[str] = None


@dataclass
class DensityEstimate:
    """Estimated density on a grid with per-point sampling uncertainty."""

    t: float
    grid: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    sample_variance: np.ndarray
    n_order: int
    m_samples: int
    method: str
    role: str
    seed: int
    diagnostics: Diagnostics
    control: Optional[ControlInfo] = None
    prefix_values: Optional[dict] = None
    trace_indices: Optional[np.ndarray] = None
    trace_kernel: Optional[np.ndarray] = None
    trace_control: Optional[np.ndarray] = None

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if self.grid.ndim != 1 or len(self.grid) < 2 or np.any(np.diff(self.grid) <= 0):
            raise SpecificationError("grid must be a strictly increasing 1-D array")
        if np.any(self.values < 0):
            raise SpecificationError("density values must be nonnegative")

    def write_csv(self, path_or_file) -> None:
        """Long-format CSV: t,x,value,std_error,sample_variance,N,M,method,role,seed."""
        close = False
        if hasattr(path_or_file, "write"):
            fh = path_or_file
        else:
            fh = open(path_or_file, "w", newline="")
            close = True
        try:
            w = csv.writer(fh)
            w.writerow(["t", "x", "value", "std_error", "sample_variance",
                        "N", "M", "method", "role", "seed"])
            for i, x in enumerate(self.grid):
                w.writerow([
                    _fmt(self.t), _fmt(x), _fmt(self.values[i]),
                    _fmt(self.std_errors[i]), _fmt(self.sample_variance[i]),
                    self.n_order, self.m_samples, self.method, self.role, self.seed,
                ])
        finally:
            if close:
                fh.close()


def _fmt(v: float) -> str:
    return f"{v:.9g}"


# ---------------------------------------------------------------------------
# kernel

def resolve_role(spec: ProblemSpec, role: str) -> str:
    """Pick which initial condition's density enters the expectation."""
    if role == "auto":
        if spec.y0.is_continuous:
            return "via_y0"
        if spec.y1.is_continuous:
            return "via_y1"
        raise SpecificationError(
            "neither initial condition is absolutely continuous; "
            "the density kernel needs one with a density"
        )
    chosen = spec.y0 if role == "via_y0" else spec.y1
    if not chosen.is_continuous:
        raise SpecificationError(
            f"role {role} requires an absolutely continuous law, got {chosen.family}"
        )
    return role


def density_kernel(x, s0, s1, y_other, role: str, f_init: DistributionSpec):
    """One-sample density kernel, broadcasting over x and samples.

    via_y0: f_init((x - y_other*s1)/s0) / |s0| with y_other a draw of y1;
    via_y1: f_init((x - y_other*s0)/s1) / |s1| with y_other a draw of y0.
    The absolute value keeps the kernel nonnegative off the guaranteed
    neighborhood of t0.
    """
    x = np.asarray(x, dtype=float)
    if role == "via_y0":
        denom, ray = np.asarray(s0, dtype=float), np.asarray(s1, dtype=float)
    elif role == "via_y1":
        denom, ray = np.asarray(s1, dtype=float), np.asarray(s0, dtype=float)
    else:
        raise SpecificationError(f"unknown role {role!r}")
    v = (x - np.asarray(y_other, dtype=float) * ray) / denom
    return density(f_init, v) / np.abs(denom)


# ---------------------------------------------------------------------------
# grids

def auto_grid(spec: ProblemSpec, t: float, n_order: int, stream: RngStream,
              points: int = 1000, pad: float = 0.2, pilot: int = 4096) -> np.ndarray:
    """Uniform grid covering the empirical support of x(t), padded each side.

    A pilot of solution values sets [min, max]; 20% of the range is added on
    both sides by default so density tails stay inside (the distance
    routines double-check mass coverage).
    """
    gen = stream.generator
    y0v = ppf(spec.y0, gen.random(pilot))
    y1v = ppf(spec.y1, gen.random(pilot))
    a, b = sample_coefficients(spec, max(n_order, 2), gen, size=pilot)
    s0c = _recur_batch(a, b, 1.0, 0.0, max(n_order, 2), spec.a.degree_bound, spec.b.degree_bound)
    s1c = _recur_batch(a, b, 0.0, 1.0, max(n_order, 2), spec.a.degree_bound, spec.b.degree_bound)
    dt = float(t) - spec.t0
    xv = y0v * _horner(s0c, dt) + y1v * _horner(s1c, dt)
    lo, hi = float(xv.min()), float(xv.max())
    span = hi - lo if hi > lo else max(1.0, abs(hi))
    return np.linspace(lo - pad * span, hi + pad * span, points)


# ---------------------------------------------------------------------------
# chunked sampling core

@dataclass
class _Plan:
    spec: ProblemSpec
    t: float
    dt: float
    role: str
    f_init: DistributionSpec
    other: DistributionSpec
    grid: np.ndarray
    n_order: int
    chunk_size: int
    threshold: float
    deterministic: bool
    det_s0: float = 0.0
    det_s1: float = 0.0
    det_control: float = 0.0
    control_order: Optional[int] = None
    control_series: str = "s0"
    c_star: Optional[np.ndarray] = None
    control_mean: float = 0.0
    trace_idx: Optional[np.ndarray] = None
    checkpoints: tuple = ()


@dataclass
class _ChunkOut:
    count: int
    ksum: np.ndarray
    ksumsq: np.ndarray
    min_absden: float
    n_degen: int
    n_skip: int
    control_vals: Optional[np.ndarray] = None
    kernel_rows: Optional[np.ndarray] = None
    snapshots: list = field(default_factory=list)
    # pilot extras
    zs_sum: Optional[np.ndarray] = None
    s_sum: float = 0.0
    s_sq: float = 0.0


def _chunk_realize(plan: _Plan, gen, rows: int):
    """Draw one chunk and evaluate the series there.

    Always draws the full chunk worth of uniforms (prefix stability) and the
    non-role initial condition before the coefficients (so it is shared when
    comparing truncation orders on coupled streams).
    """
    full = plan.chunk_size
    y_other = ppf(plan.other, gen.random(full))[:rows]
    if plan.deterministic:
        s0 = np.full(rows, plan.det_s0)
        s1 = np.full(rows, plan.det_s1)
        control = np.full(rows, plan.det_control) if plan.control_order else None
        return y_other, s0, s1, control
    a, b = sample_coefficients(plan.spec, plan.n_order, gen, size=full)
    a, b = a[:rows], b[:rows]
    deg_a, deg_b = plan.spec.a.degree_bound, plan.spec.b.degree_bound
    s0c = _recur_batch(a, b, 1.0, 0.0, plan.n_order, deg_a, deg_b)
    s1c = _recur_batch(a, b, 0.0, 1.0, plan.n_order, deg_a, deg_b)
    s0 = _horner(s0c, plan.dt)
    s1 = _horner(s1c, plan.dt)
    control = None
    if plan.control_order:
        basis = s0c if plan.control_series == "s0" else s1c
        control = _horner(basis[:, : plan.control_order + 1], plan.dt)
    return y_other, s0, s1, control


def _process_chunk(plan: _Plan, stream: RngStream, chunk_index: int,
                   i0: int, i1: int, mode: str) -> _ChunkOut:
    gen = stream.child(chunk_index).generator
    rows = i1 - i0
    y_other, s0, s1, control = _chunk_realize(plan, gen, rows)
    denom = s0 if plan.role == "via_y0" else s1
    absden = np.abs(denom)
    keep = denom != 0.0
    n_skip = int(rows - keep.sum())
    n_degen = int((absden < plan.threshold).sum())
    min_absden = float(absden.min()) if rows else math.inf

    if n_skip:
        y_other, s0, s1 = y_other[keep], s0[keep], s1[keep]
        if control is not None:
            control = control[keep]

    kernel = density_kernel(plan.grid[None, :], s0[:, None], s1[:, None],
                            y_other[:, None], plan.role, plan.f_init)

    if mode == "cv_main":
        kernel = kernel + plan.c_star[None, :] * (control - plan.control_mean)[:, None]

    out = _ChunkOut(
        count=int(kernel.shape[0]),
        ksum=kernel.sum(axis=0),
        ksumsq=(kernel * kernel).sum(axis=0),
        min_absden=min_absden,
        n_degen=n_degen,
        n_skip=n_skip,
    )
    if mode == "pilot":
        out.zs_sum = (kernel * control[:, None]).sum(axis=0)
        out.s_sum = float(control.sum())
        out.s_sq = float((control * control).sum())
    if plan.trace_idx is not None:
        out.kernel_rows = kernel[:, plan.trace_idx]
        if control is not None:
            out.control_vals = control.copy()
    for p in plan.checkpoints:
        if i0 < p <= i1:
            kept_prefix = int(np.count_nonzero(keep[: p - i0])) if n_skip else p - i0
            out.snapshots.append((p, kernel[:kept_prefix].sum(axis=0), kept_prefix))
    return out


def _run_sampling(plan: _Plan, stream: RngStream, m_samples: int, threads: int,
                  mode: str) -> dict:
    size = plan.chunk_size
    n_chunks = (m_samples + size - 1) // size
    bounds = [(k * size, min((k + 1) * size, m_samples)) for k in range(n_chunks)]

    def job(k):
        return _process_chunk(plan, stream, k, bounds[k][0], bounds[k][1], mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, range(n_chunks)))
    else:
        results = [job(k) for k in range(n_chunks)]

    g = len(plan.grid)
    total = {
        "count": 0, "ksum": np.zeros(g), "ksumsq": np.zeros(g),
        "min_absden": math.inf, "n_degen": 0, "n_skip": 0,
        "zs_sum": np.zeros(g), "s_sum": 0.0, "s_sq": 0.0,
        "prefix": {}, "kernel_rows": [], "control_vals": [],
    }
    for res in results:  # fixed chunk order: deterministic merge
        for p, snap, kept in res.snapshots:
            prior_count = total["count"] + kept
            total["prefix"][p] = ((total["ksum"] + snap), prior_count)
        total["count"] += res.count
        total["ksum"] += res.ksum
        total["ksumsq"] += res.ksumsq
        total["min_absden"] = min(total["min_absden"], res.min_absden)
        total["n_degen"] += res.n_degen
        total["n_skip"] += res.n_skip
        if res.zs_sum is not None:
            total["zs_sum"] += res.zs_sum
            total["s_sum"] += res.s_sum
            total["s_sq"] += res.s_sq
        if res.kernel_rows is not None:
            total["kernel_rows"].append(res.kernel_rows)
        if res.control_vals is not None:
            total["control_vals"].append(res.control_vals)
    return total


def _plan_for(spec: ProblemSpec, cfg: EstimatorConfig, t: float, grid: np.ndarray,
              role: str, trace_indices, checkpoints, with_control: bool) -> _Plan:
    grid = np.asarray(grid, dtype=float)
    f_init = spec.y0 if role == "via_y0" else spec.y1
    other = spec.y1 if role == "via_y0" else spec.y0
    plan = _Plan(
        spec=spec, t=float(t), dt=float(t) - spec.t0, role=role, f_init=f_init,
        other=other, grid=grid, n_order=cfg.n_order, chunk_size=cfg.chunk_size,
        threshold=cfg.degenerate_threshold,
        deterministic=spec.deterministic_coefficients,
        control_order=cfg.control_order if with_control else None,
        control_series=cfg.control_series,
        trace_idx=None if trace_indices is None else np.asarray(trace_indices, dtype=int),
        checkpoints=tuple(sorted(checkpoints)) if checkpoints else (),
    )
    if plan.deterministic:
        pair = realize_series_pair(spec, cfg.n_order, RngStream(0))
        plan.det_s0, plan.det_s1 = (float(_horner(pair.s0_coeffs, plan.dt)),
                                    float(_horner(pair.s1_coeffs, plan.dt)))
        if plan.control_order:
            basis = pair.s0_coeffs if cfg.control_series == "s0" else pair.s1_coeffs
            plan.det_control = float(_horner(basis[: plan.control_order + 1], plan.dt))
    return plan


def _finalize(plan: _Plan, cfg: EstimatorConfig, total: dict, method: str, role: str,
              control: Optional[ControlInfo], clamp: bool) -> DensityEstimate:
    n = total["count"]
    if n == 0:
        raise EstimationError("every sample had an exactly-zero denominator")
    values = total["ksum"] / n
    if n > 1:
        var = np.maximum(total["ksumsq"] - total["ksum"] ** 2 / n, 0.0) / (n - 1)
    else:
        var = np.zeros_like(values)
    if clamp:
        values = np.maximum(values, 0.0)
    m_total = cfg.m_samples
    diag = Diagnostics(
        min_abs_denominator=total["min_absden"],
        degenerate_fraction=total["n_degen"] / m_total,
        skipped_fraction=total["n_skip"] / m_total,
    )
    if diag.degenerate_fraction > cfg.degenerate_fraction_warn:
        diag.flagged = True
        warnings.warn(
            f"{total['n_degen']} of {m_total} samples had |denominator| "
            f"below {cfg.degenerate_threshold:g} at t={plan.t:g} (N={cfg.n_order}); "
            "the kernel variance may be very large or infinite",
            DegenerateSamplesWarning,
            stacklevel=3,
        )
    prefix = None
    if plan.checkpoints:
        prefix = {p: np.maximum(s / c, 0.0) if clamp else s / c
                  for p, (s, c) in total["prefix"].items()}
    est = DensityEstimate(
        t=plan.t, grid=plan.grid, values=values,
        std_errors=np.sqrt(var / n), sample_variance=var,
        n_order=cfg.n_order, m_samples=m_total, method=method, role=role,
        seed=cfg.seed, diagnostics=diag, control=control, prefix_values=prefix,
    )
    if plan.trace_idx is not None:
        est.trace_indices = plan.trace_idx
        est.trace_kernel = (np.concatenate(total["kernel_rows"], axis=0)
                            if total["kernel_rows"] else np.zeros((0, len(plan.trace_idx))))
        if total["control_vals"]:
            est.trace_control = np.concatenate(total["control_vals"])
    return est


# ---------------------------------------------------------------------------
# public estimators

def estimate_crude(spec: ProblemSpec, cfg: EstimatorConfig, t: float, grid,
                   base_stream: Optional[RngStream] = None,
                   prefix_checkpoints: Optional[Sequence[int]] = None,
                   trace_indices=None) -> DensityEstimate:
    """Plain Monte Carlo average of the density kernel on the grid.

    One series realization serves every grid point.  `prefix_checkpoints`
    asks for the estimate restricted to the first P samples (bitwise equal
    to a fresh run with m_samples=P and the same seed); `trace_indices`
    keeps per-sample kernel values at chosen grid indices for diagnostics.
    """
    role = resolve_role(spec, cfg.role)
    base = base_stream if base_stream is not None else RngStream(cfg.seed)
    if prefix_checkpoints is not None:
        bad = [p for p in prefix_checkpoints if not 1 <= p <= cfg.m_samples]
        if bad:
            raise SpecificationError(f"prefix checkpoints out of range: {bad}")
    plan = _plan_for(spec, cfg, t, grid, role, trace_indices, prefix_checkpoints, False)
    total = _run_sampling(plan, base.child(_MAIN_STREAM), cfg.m_samples, cfg.threads, "crude")
    return _finalize(plan, cfg, total, "crude", role, None, clamp=False)


def _control_moments(spec: ProblemSpec, cfg: EstimatorConfig, t: float,
                     base: RngStream):
    """Exact (symbolic) control mean/variance, or pilot-sampled on budget overrun."""
    try:
        _, coeffs = polymoments.symbolic_series(
            spec, cfg.control_order, cfg.control_series, term_budget=cfg.term_budget
        )
        mean, var = polymoments.mean_and_variance(coeffs, t, spec.t0)
        return mean, var, "exact"
    except BudgetError:
        pass
    gen = base.child(_MOMENT_STREAM).generator
    n = _PILOT_MOMENT_SAMPLES
    a, b = sample_coefficients(spec, cfg.control_order, gen, size=n)
    x0, x1 = (1.0, 0.0) if cfg.control_series == "s0" else (0.0, 1.0)
    coeffs = _recur_batch(a, b, x0, x1, cfg.control_order,
                          spec.a.degree_bound, spec.b.degree_bound)
    vals = _horner(coeffs, float(t) - spec.t0)
    return float(vals.mean()), float(vals.var(ddof=1)), "pilot"


def estimate_control_variates(spec: ProblemSpec, cfg: EstimatorConfig, t: float, grid,
                              base_stream: Optional[RngStream] = None,
                              trace_indices=None) -> DensityEstimate:
    """Variance-reduced estimate: kernel plus a centered low-order control.

    Step 1 computes the control's mean and variance exactly; step 2 runs a
    pilot (disjoint substream) to estimate the kernel/control covariance per
    grid point; step 3 sets c*(x) = -cov/var; step 4 averages
    Z + c*(x) (S - mean) over the main samples.  The pilot c* is treated as
    fixed, so the main average stays unbiased conditional on the pilot.
    A zero-variance control falls back to the crude estimator with a warning.
    """
    if cfg.method != "control_variates":
        raise SpecificationError("config method must be 'control_variates'")
    role = resolve_role(spec, cfg.role)
    base = base_stream if base_stream is not None else RngStream(cfg.seed)
    grid = np.asarray(grid, dtype=float)

    mean, var, source = _control_moments(spec, cfg, t, base)
    if var <= 0.0:
        warnings.warn(
            "control variate has zero variance (deterministic series value); "
            "falling back to the crude estimator",
            ControlVariateFallbackWarning,
            stacklevel=2,
        )
        plan = _plan_for(spec, cfg, t, grid, role, trace_indices, None, False)
        total = _run_sampling(plan, base.child(_MAIN_STREAM), cfg.m_samples,
                              cfg.threads, "crude")
        info = ControlInfo(cfg.control_series, cfg.control_order, cfg.pilot_m,
                           mean, var, None, None, source, fallback="zero-variance control")
        return _finalize(plan, cfg, total, "control_variates", role, info, clamp=True)

    pilot_plan = _plan_for(spec, cfg, t, grid, role, None, None, True)
    pilot = _run_sampling(pilot_plan, base.child(_PILOT_STREAM), cfg.pilot_m,
                          cfg.threads, "pilot")
    n_p = pilot["count"]
    if n_p < 2:
        raise EstimationError("pilot produced fewer than two usable samples")
    cov = (pilot["zs_sum"] - pilot["ksum"] * pilot["s_sum"] / n_p) / (n_p - 1)
    var_z = np.maximum(pilot["ksumsq"] - pilot["ksum"] ** 2 / n_p, 0.0) / (n_p - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(var_z > 0.0, cov / np.sqrt(var * var_z), 0.0)
    c_star = -cov / var

    main_plan = _plan_for(spec, cfg, t, grid, role, trace_indices, None, True)
    main_plan.c_star = c_star
    main_plan.control_mean = mean
    total = _run_sampling(main_plan, base.child(_MAIN_STREAM), cfg.m_samples,
                          cfg.threads, "cv_main")
    info = ControlInfo(cfg.control_series, cfg.control_order, cfg.pilot_m,
                       mean, var, c_star, rho, source)
    return _finalize(main_plan, cfg, total, "control_variates", role, info, clamp=True)


# ---------------------------------------------------------------------------
# quadrature oracle for deterministic-coefficient problems

def exact_density(spec: ProblemSpec, t: float, x, role: str = "auto",
                  order: int = 80):
    """Density of the truncated solution when the coefficients are deterministic.

    With fixed series values s0(t), s1(t) the expectation collapses to a
    mixture over the non-role initial condition: a finite sum for discrete
    laws, adaptive quadrature for continuous ones.  Used as a test oracle.
    """
    if not spec.deterministic_coefficients:
        raise UnsupportedOperationError(
            "exact density needs deterministic coefficient models"
        )
    role = resolve_role(spec, role)
    pair = realize_series_pair(spec, order, RngStream(0))
    s0, s1 = (float(_horner(pair.s0_coeffs, float(t) - spec.t0)),
              float(_horner(pair.s1_coeffs, float(t) - spec.t0)))
    denom = s0 if role == "via_y0" else s1
    ray = s1 if role == "via_y0" else s0
    if denom == 0.0:
        raise UnsupportedOperationError(f"series denominator vanishes at t={t}")
    f_init = spec.y0 if role == "via_y0" else spec.y1
    other = spec.y1 if role == "via_y0" else spec.y0

    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    if other.is_discrete:
        pts, probs = atoms(other)
        out = np.zeros_like(x_arr)
        for pt, pr in zip(pts, probs):
            out += pr * density(f_init, (x_arr - pt * ray) / denom) / abs(denom)
    else:
        lo, hi = other.support()
        out = np.empty_like(x_arr)
        for i, xi in enumerate(x_arr):
            val, _ = integrate.quad(
                lambda y: float(density(other, y))
                * float(density(f_init, (xi - y * ray) / denom)) / abs(denom),
                lo, hi, limit=200,
            )
            out[i] = val
    return float(out[0]) if np.isscalar(x) else out
