"""Error-analysis harness: density distances, convergence and sampling studies.

The exact density is never available, so convergence is tracked through
consecutive differences between orders N and N+1 (pointwise and in L1), the
L1 gap to a high-order reference estimate playing the role of a bias-free
target, the log-log regression linking the two, and the decay of the
Monte Carlo error over nested sample prefixes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .distributions import RngStream
from .errors import GridCoverageError, InsufficientDataError, SpecificationError
from .estimator import (
    DensityEstimate,
    EstimatorConfig,
    auto_grid,
    estimate_control_variates,
    estimate_crude,
)
from .series import ProblemSpec

__all__ = [
    "lp_distance",
    "lp_distance_on_grid",
    "tv_distance",
    "hellinger_distance",
    "ConvergenceStudy",
    "run_convergence_study",
    "consecutive_norms",
    "reference_errors",
    "pointwise_differences",
    "regress_error_vs_difference",
    "SamplingStudy",
    "run_sampling_study",
    "write_rows_csv",
]

DEFAULT_REFERENCE_ORDER = 30
DEFAULT_P_GRID = (100, 200, 400, 800, 1600, 3200, 6400, 12800)

# study-level substream tags
_TAG_GRID = 11
_TAG_CELL = 12


# ---------------------------------------------------------------------------
# distances

_np_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(_np_trapezoid(y, x))


def lp_distance_on_grid(grid: np.ndarray, f_values, g_values, p: float = 1.0) -> float:
    """||f - g||_p by composite trapezoid on a shared grid (no coverage check)."""
    if p < 1.0:
        raise SpecificationError(f"p must be >= 1, got {p}")
    diff = np.abs(np.asarray(f_values, dtype=float) - np.asarray(g_values, dtype=float))
    return _trapezoid(diff**p, np.asarray(grid, dtype=float)) ** (1.0 / p)


def _check_coverage(est: DensityEstimate, tail_tol: float) -> None:
    mass = _trapezoid(est.values, est.grid)
    deficit = 1.0 - mass
    if deficit > tail_tol:
        span = est.grid[-1] - est.grid[0]
        raise GridCoverageError(
            f"estimated mass on the grid is {mass:.6f} (deficit {deficit:.2e} > "
            f"tail_tol {tail_tol:.2e}); extend the grid, e.g. to "
            f"[{est.grid[0] - 0.5 * span:.4g}, {est.grid[-1] + 0.5 * span:.4g}]"
        )


def lp_distance(f: DensityEstimate, g: DensityEstimate, p: float = 1.0,
                tail_tol: Optional[float] = 1e-3) -> float:
    """L^p distance between two estimates sharing a grid.

    Both densities must leave less than `tail_tol` of their mass outside the
    grid (checked through the grid integral); pass tail_tol=None to skip the
    check, e.g. when one argument is not a normalized density.
    """
    if not np.array_equal(f.grid, g.grid):
        raise SpecificationError("estimates must share the evaluation grid")
    if tail_tol is not None:
        _check_coverage(f, tail_tol)
        _check_coverage(g, tail_tol)
    return lp_distance_on_grid(f.grid, f.values, g.values, p)


def tv_distance(f: DensityEstimate, g: DensityEstimate,
                tail_tol: Optional[float] = 1e-3) -> float:
    """Total variation distance: half the L1 distance."""
    return 0.5 * lp_distance(f, g, 1.0, tail_tol)


def hellinger_distance(f: DensityEstimate, g: DensityEstimate,
                       tail_tol: Optional[float] = 1e-3) -> float:
    """Hellinger distance: L2 distance of root densities over sqrt(2)."""
    if not np.array_equal(f.grid, g.grid):
        raise SpecificationError("estimates must share the evaluation grid")
    if tail_tol is not None:
        _check_coverage(f, tail_tol)
        _check_coverage(g, tail_tol)
    return lp_distance_on_grid(f.grid, np.sqrt(f.values), np.sqrt(g.values), 2.0) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# convergence study

@dataclass
class ConvergenceStudy:
    """Density estimates over a (t, N) lattice plus an order-L reference.

    Estimates at consecutive orders reuse draws (coupled streams) unless the
    study was run with independent_streams=True, which matches how the
    reference tables were produced (a fresh Monte Carlo run per order).
    """

    t_values: Tuple[float, ...]
    n_values: Tuple[int, ...]
    reference_order: int
    m_samples: int
    seed: int
    grids: Dict[float, np.ndarray]
    estimates: Dict[Tuple[float, int], DensityEstimate]

    def estimate(self, t: float, n: int) -> DensityEstimate:
        return self.estimates[(float(t), int(n))]


def run_convergence_study(spec: ProblemSpec, t_values: Sequence[float],
                          n_values: Sequence[int], *,
                          reference_order: int = DEFAULT_REFERENCE_ORDER,
                          m_samples: int = 20000, seed: int = 0,
                          role: str = "auto", method: str = "crude",
                          control_order: Optional[int] = None,
                          control_series: str = "s0", pilot_m: int = 2500,
                          grid_points: int = 1000,
                          grids: Optional[Dict[float, np.ndarray]] = None,
                          independent_streams: bool = False,
                          threads: int = 1) -> ConvergenceStudy:
    """Estimate the density at every requested (t, N), plus N+1 and L=reference.

    All estimates at one t share a grid spanning the empirical support of
    the reference-order solution.  One master seed drives everything;
    per-cell substreams derive from (t index[, N]).
    """
    n_values = tuple(sorted(set(int(n) for n in n_values)))
    if not n_values:
        raise SpecificationError("need at least one truncation order")
    if reference_order <= max(n_values):
        raise SpecificationError(
            f"reference order {reference_order} must exceed max N {max(n_values)}"
        )
    orders = sorted(set(n_values) | {reference_order})
    master = RngStream(seed)
    t_values = tuple(float(t) for t in t_values)

    out_grids: Dict[float, np.ndarray] = {}
    estimates: Dict[Tuple[float, int], DensityEstimate] = {}
    for ti, t in enumerate(t_values):
        if grids is not None and t in grids:
            grid = np.asarray(grids[t], dtype=float)
        else:
            grid = auto_grid(spec, t, reference_order,
                             master.child(_TAG_GRID, ti), points=grid_points)
        out_grids[t] = grid
        for n in orders:
            cfg = EstimatorConfig(
                n_order=n, m_samples=m_samples, role=role, method=method,
                control_series=control_series,
                control_order=min(control_order, n - 1) if control_order else None,
                pilot_m=pilot_m, seed=seed, threads=threads,
            )
            cell = (master.child(_TAG_CELL, ti, n) if independent_streams
                    else master.child(_TAG_CELL, ti))
            if method == "control_variates":
                est = estimate_control_variates(spec, cfg, t, grid, base_stream=cell)
            else:
                est = estimate_crude(spec, cfg, t, grid, base_stream=cell)
            estimates[(t, n)] = est
    return ConvergenceStudy(t_values, n_values, reference_order, m_samples,
                            seed, out_grids, estimates)


def consecutive_norms(study: ConvergenceStudy, tail_tol: Optional[float] = None):
    """Rows (t, N, delta_eps): L1 norm of the difference between orders N and N+1.

    Only orders whose successor was also estimated produce a row, so a
    single-order study yields reference errors but no differences.
    """
    rows = []
    for t in study.t_values:
        for n in study.n_values:
            if (t, n + 1) not in study.estimates:
                continue
            f = study.estimates[(t, n)]
            g = study.estimates[(t, n + 1)]
            rows.append((t, n, lp_distance(f, g, 1.0, tail_tol)))
    return rows


def reference_errors(study: ConvergenceStudy, tail_tol: Optional[float] = None):
    """Rows (t, N, E): L1 gap between order N and the order-L reference."""
    rows = []
    for t in study.t_values:
        ref = study.estimates[(t, study.reference_order)]
        for n in study.n_values:
            rows.append((t, n, lp_distance(study.estimates[(t, n)], ref, 1.0, tail_tol)))
    return rows


def pointwise_differences(study: ConvergenceStudy):
    """Long rows (t, N, x, delta_eps) of |f_hat^{N+1}(x) - f_hat^N(x)|."""
    rows = []
    for t in study.t_values:
        for n in study.n_values:
            if (t, n + 1) not in study.estimates:
                continue
            f = study.estimates[(t, n)]
            g = study.estimates[(t, n + 1)]
            diff = np.abs(g.values - f.values)
            rows.extend((t, n, x, d) for x, d in zip(f.grid, diff))
    return rows


def regress_error_vs_difference(study: ConvergenceStudy,
                                saturation_factor: float = 2.0):
    """Per-t fit of log E^N against log delta_eps^N on the pre-saturation range.

    Orders whose reference error sits within `saturation_factor` of the
    minimum over N are dominated by sampling noise and excluded.  Returns
    {t: (alpha, beta, n_points)}; raises InsufficientDataError when fewer
    than 3 points survive at some t.
    """
    delta = {(t, n): d for t, n, d in consecutive_norms(study)}
    err = {(t, n): e for t, n, e in reference_errors(study)}
    out = {}
    for t in study.t_values:
        es = np.array([err[(t, n)] for n in study.n_values])
        ds = np.array([delta[(t, n)] for n in study.n_values])
        floor = saturation_factor * es.min()
        keep = (es > floor) & (ds > 0.0)
        if keep.sum() < 3:
            raise InsufficientDataError(
                f"only {int(keep.sum())} usable orders at t={t:g} after the "
                f"saturation cutoff; need at least 3"
            )
        slope, intercept = np.polyfit(np.log(ds[keep]), np.log(es[keep]), 1)
        out[t] = (float(slope), float(math.exp(intercept)), int(keep.sum()))
    return out


# ---------------------------------------------------------------------------
# sampling-error study

@dataclass
class SamplingStudy:
    """Monte Carlo error of nested sample prefixes against the full-M estimate."""

    n_order: int
    p_values: Tuple[int, ...]
    m_reference: int
    rows: List[Tuple[float, int, float]]          # (t, P, MCE)
    slopes: Dict[float, Tuple[float, int]]        # t -> (slope, points used)
    estimates: Dict[float, DensityEstimate] = field(default_factory=dict)


def run_sampling_study(spec: ProblemSpec, t_values: Sequence[float], n_order: int,
                       p_values: Sequence[int] = DEFAULT_P_GRID, *,
                       m_samples: int = 20000, seed: int = 0, role: str = "auto",
                       grid_points: int = 1000, threads: int = 1) -> SamplingStudy:
    """MCE^P(t) = L1 distance between the P-prefix estimate and the full one.

    Prefixes are nested: the P-sample estimate uses exactly the first P of
    the M draws.  A least-squares slope of log MCE against log P is fitted
    per t (zero distances, e.g. P = M, are left out of the fit).
    """
    p_values = tuple(sorted(set(int(p) for p in p_values)))
    if not p_values:
        raise InsufficientDataError("need at least one prefix length P")
    if p_values[-1] > m_samples:
        raise SpecificationError("prefix lengths cannot exceed m_samples")
    master = RngStream(seed)
    rows: List[Tuple[float, int, float]] = []
    slopes: Dict[float, Tuple[float, int]] = {}
    estimates: Dict[float, DensityEstimate] = {}
    for ti, t in enumerate(float(t) for t in t_values):
        grid = auto_grid(spec, t, n_order, master.child(_TAG_GRID, ti),
                         points=grid_points)
        cfg = EstimatorConfig(n_order=n_order, m_samples=m_samples, role=role,
                              seed=seed, threads=threads)
        est = estimate_crude(spec, cfg, t, grid,
                             base_stream=master.child(_TAG_CELL, ti),
                             prefix_checkpoints=[p for p in p_values if p < m_samples])
        estimates[t] = est
        mce = []
        for p in p_values:
            prefix = est.values if p == m_samples else est.prefix_values[p]
            mce.append(lp_distance_on_grid(grid, prefix, est.values, 1.0))
            rows.append((t, p, mce[-1]))
        pts = [(math.log(p), math.log(e)) for p, e in zip(p_values, mce) if e > 0.0]
        if len(pts) >= 2:
            xs, ys = zip(*pts)
            slope = float(np.polyfit(xs, ys, 1)[0])
            slopes[t] = (slope, len(pts))
        else:
            slopes[t] = (math.nan, len(pts))
    return SamplingStudy(n_order, p_values, m_samples, rows, slopes, estimates)


# ---------------------------------------------------------------------------
# CSV helpers

def write_rows_csv(path, header: Sequence[str], rows) -> None:
    """Write rows with floats rendered to 9 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in row])
