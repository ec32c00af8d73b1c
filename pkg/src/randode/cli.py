"""Command-line front end.

    randode estimate    --config example1 --t 0.5 --n 6 --m 20000
    randode convergence --config example1 --t 0.5,1,1.5 --n 1:16
    randode sampling    --config example1 --t 0.5,1,1.5 --n 20
    randode cv-compare  --config example1 --t 1.5 --n 11:15
    randode advise      --config example1 --rho 0.5 --s 1 --r 2 --epsilon 0.01

--config takes a file path or a bundled preset name.  Every command writes
a manifest.json (before any results) plus CSV reports into --out, and is
bitwise reproducible for a fixed --seed; --threads changes wall time only.
Exit codes: 0 ok, 2 configuration error, 3 numerical error, 4 insufficient
data.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, config as cfgmod
from .analysis import lp_distance_on_grid, write_rows_csv
from .distributions import RngStream, l2_norm
from .errors import (
    BudgetError,
    EstimationError,
    GridCoverageError,
    InsufficientDataError,
    NumericalConsistencyError,
    RandodeError,
    SpecificationError,
    UnsupportedOperationError,
)
from .estimator import EstimatorConfig, auto_grid, estimate_control_variates, estimate_crude
from .series import advise_truncation

_EXIT_CONFIG = 2
_EXIT_NUMERICAL = 3
_EXIT_DATA = 4


def _parse_floats(text: str):
    return [float(v) for v in text.split(",") if v != ""]


def _parse_ints(text: str):
    """Comma list and/or lo:hi ranges, e.g. '1:5' or '3,7,9:11'."""
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" in piece:
            lo, hi = piece.split(":", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(piece))
    return sorted(set(out))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True,
                   help="config file path or preset name (example1..example5)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads; affects wall time only")
    p.add_argument("--out", default=".", help="output directory (default: cwd)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randode", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"randode {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="density estimate at one time")
    _add_common(est)
    est.add_argument("--t", type=float, required=True)
    est.add_argument("--n", type=int, required=True, help="truncation order N")
    est.add_argument("--m", type=int, default=20000, help="sample count M")
    est.add_argument("--method", choices=["crude", "cv"], default="crude")
    est.add_argument("--role", choices=["auto", "via_y0", "via_y1"], default=None)
    est.add_argument("--grid", default=None, help="lo:hi:points (default: auto)")
    est.add_argument("--control-variate", choices=["S0", "S1"], default="S0")
    est.add_argument("--control-order", type=int, default=None, help="N0 < N")
    est.add_argument("--pilot-m", type=int, default=2500)

    conv = sub.add_parser("convergence", help="consecutive differences and reference errors")
    _add_common(conv)
    conv.add_argument("--t", required=True, help="comma-separated times")
    conv.add_argument("--n", required=True, help="orders, e.g. 1:16 or 1,2,3")
    conv.add_argument("--reference-order", type=int, default=30, help="L (default 30)")
    conv.add_argument("--m", type=int, default=20000)
    conv.add_argument("--grid-points", type=int, default=1000)
    conv.add_argument("--coupled-streams", action="store_true",
                      help="reuse draws across orders (lower-noise differences); "
                           "default is a fresh run per order as in the reference tables")

    samp = sub.add_parser("sampling", help="Monte Carlo error of nested sample prefixes")
    _add_common(samp)
    samp.add_argument("--t", required=True, help="comma-separated times")
    samp.add_argument("--n", type=int, required=True, help="truncation order N")
    samp.add_argument("--p", default="100,200,400,800,1600,3200,6400,12800",
                      help="prefix lengths")
    samp.add_argument("--m", type=int, default=20000)
    samp.add_argument("--grid-points", type=int, default=1000)

    cvc = sub.add_parser("cv-compare", help="crude vs control-variates differences")
    _add_common(cvc)
    cvc.add_argument("--t", type=float, required=True)
    cvc.add_argument("--n", required=True, help="orders, e.g. 11:15")
    cvc.add_argument("--control-variate", choices=["S0", "S1"], default="S0")
    cvc.add_argument("--control-order", type=int, default=10, help="N0")
    cvc.add_argument("--pilot-m", type=int, default=2500)
    cvc.add_argument("--m", type=int, default=20000)
    cvc.add_argument("--grid-points", type=int, default=1000)

    adv = sub.add_parser("advise", help="truncation order for a target RMS error")
    _add_common(adv)
    adv.add_argument("--rho", type=float, required=True, help="|t - t0|")
    adv.add_argument("--r", type=float, default=None,
                     help="expansion radius (default: config radius)")
    adv.add_argument("--s", type=float, default=None,
                     help="intermediate radius in (rho, r); default midpoint")
    adv.add_argument("--epsilon", type=float, required=True, help="target RMS error")
    return p


def _load(args):
    doc = cfgmod.resolve_config(args.config)
    spec, defaults = cfgmod.build_problem(doc)
    return spec, defaults


def _write_manifest(args, extra: dict) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "randode",
        "version": __version__,
        "command": args.command,
        "config": str(args.config),
        "seed": args.seed,
        "threads": args.threads,
        "out": str(out),
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "parameters": extra,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def _pick_grid(args, spec, defaults, t, n_order, stream, points=None):
    points = points or defaults.grid_points
    if getattr(args, "grid", None):
        lo, hi, npts = args.grid.split(":")
        return np.linspace(float(lo), float(hi), int(npts))
    if defaults.grid_lo is not None:
        return np.linspace(defaults.grid_lo, defaults.grid_hi, points)
    return auto_grid(spec, t, n_order, stream, points=points)


def _cmd_estimate(args) -> int:
    spec, defaults = _load(args)
    role = args.role or defaults.role
    method = "control_variates" if args.method == "cv" else "crude"
    cfg = EstimatorConfig(
        n_order=args.n, m_samples=args.m, role=role, method=method,
        control_series=args.control_variate.lower(),
        control_order=args.control_order if method == "control_variates" else None,
        pilot_m=args.pilot_m, seed=args.seed, threads=args.threads,
    )
    out = _write_manifest(args, {
        "t": args.t, "N": args.n, "M": args.m, "method": method, "role": role,
        "control_order": args.control_order, "pilot_m": args.pilot_m,
        "grid": args.grid,
    })
    master = RngStream(args.seed)
    grid = _pick_grid(args, spec, defaults, args.t, args.n, master.child(analysis._TAG_GRID, 0))
    if method == "control_variates":
        est = estimate_control_variates(spec, cfg, args.t, grid,
                                        base_stream=master.child(analysis._TAG_CELL, 0))
    else:
        est = estimate_crude(spec, cfg, args.t, grid,
                             base_stream=master.child(analysis._TAG_CELL, 0))
    est.write_csv(out / "estimate.csv")
    print(f"wrote {out / 'estimate.csv'} "
          f"(min |denominator| {est.diagnostics.min_abs_denominator:.3g}, "
          f"degenerate fraction {est.diagnostics.degenerate_fraction:.3g})")
    return 0


def _cmd_convergence(args) -> int:
    spec, defaults = _load(args)
    t_values = _parse_floats(args.t)
    n_values = _parse_ints(args.n)
    out = _write_manifest(args, {
        "t": t_values, "N": n_values, "L": args.reference_order, "M": args.m,
        "coupled_streams": bool(args.coupled_streams),
    })
    study = analysis.run_convergence_study(
        spec, t_values, n_values, reference_order=args.reference_order,
        m_samples=args.m, seed=args.seed, role=defaults.role,
        grid_points=args.grid_points, threads=args.threads,
        independent_streams=not args.coupled_streams,
    )
    write_rows_csv(out / "consecutive_norms.csv", ["t", "N", "delta_eps"],
                   analysis.consecutive_norms(study))
    write_rows_csv(out / "reference_errors.csv", ["t", "N", "E"],
                   analysis.reference_errors(study))
    write_rows_csv(out / "pointwise_differences.csv", ["t", "N", "x", "delta_eps"],
                   analysis.pointwise_differences(study))
    density_rows = []
    for (t, n), est in sorted(study.estimates.items()):
        density_rows.extend((t, n, x, v) for x, v in zip(est.grid, est.values))
    write_rows_csv(out / "densities.csv", ["t", "N", "x", "value"], density_rows)
    reg_rows = []
    if len(n_values) >= 2:
        for t in t_values:
            try:
                one = analysis.regress_error_vs_difference(
                    _single_t_view(study, t))
                alpha, beta, npts = one[t]
                reg_rows.append((t, alpha, beta, npts))
            except InsufficientDataError:
                continue
    write_rows_csv(out / "regression.csv", ["t", "alpha", "beta", "n_points"], reg_rows)
    print(f"wrote convergence tables to {out}")
    return 0


def _single_t_view(study, t):
    return analysis.ConvergenceStudy(
        (t,), study.n_values, study.reference_order, study.m_samples,
        study.seed, {t: study.grids[t]},
        {k: v for k, v in study.estimates.items() if k[0] == t},
    )


def _cmd_sampling(args) -> int:
    spec, defaults = _load(args)
    t_values = _parse_floats(args.t)
    p_values = _parse_ints(args.p)
    out = _write_manifest(args, {
        "t": t_values, "N": args.n, "P": p_values, "M": args.m,
    })
    study = analysis.run_sampling_study(
        spec, t_values, args.n, p_values, m_samples=args.m, seed=args.seed,
        role=defaults.role, grid_points=args.grid_points, threads=args.threads,
    )
    write_rows_csv(out / "sampling_errors.csv", ["t", "P", "MCE"], study.rows)
    write_rows_csv(out / "sampling_slopes.csv", ["t", "slope", "n_points"],
                   [(t, s, n) for t, (s, n) in sorted(study.slopes.items())])
    print(f"wrote sampling-error tables to {out}")
    return 0


def _cmd_cv_compare(args) -> int:
    spec, defaults = _load(args)
    n_values = _parse_ints(args.n)
    if not n_values:
        raise InsufficientDataError("cv-compare needs at least one order N")
    out = _write_manifest(args, {
        "t": args.t, "N": n_values, "N0": args.control_order,
        "pilot_m": args.pilot_m, "M": args.m,
        "control_variate": args.control_variate,
    })
    master = RngStream(args.seed)
    orders = sorted(set(n_values) | {n + 1 for n in n_values})
    grid = auto_grid(spec, args.t, max(orders),
                     master.child(analysis._TAG_GRID, 0), points=args.grid_points)
    crude: dict = {}
    cv: dict = {}
    rho_max: dict = {}
    for n in orders:
        base = master.child(analysis._TAG_CELL, 0, n)
        cfg = EstimatorConfig(n_order=n, m_samples=args.m, role=defaults.role,
                              seed=args.seed, threads=args.threads)
        crude[n] = estimate_crude(spec, cfg, args.t, grid, base_stream=base)
        cfg_cv = EstimatorConfig(
            n_order=n, m_samples=args.m, role=defaults.role,
            method="control_variates", control_series=args.control_variate.lower(),
            control_order=min(args.control_order, n - 1), pilot_m=args.pilot_m,
            seed=args.seed, threads=args.threads,
        )
        est = estimate_control_variates(spec, cfg_cv, args.t, grid, base_stream=base)
        cv[n] = est
        if est.control is not None and est.control.correlation is not None:
            corr = est.control.correlation
            rho_max[n] = float(corr[np.argmax(np.abs(corr))])
        else:
            rho_max[n] = 0.0
    rows = []
    for n in n_values:
        d_crude = lp_distance_on_grid(grid, crude[n].values, crude[n + 1].values)
        d_cv = lp_distance_on_grid(grid, cv[n].values, cv[n + 1].values)
        rows.append((float(args.t), n, d_crude, d_cv, rho_max[n]))
    write_rows_csv(out / "cv_compare.csv",
                   ["t", "N", "delta_eps_crude", "delta_eps_cv", "rho_max"], rows)
    print(f"wrote {out / 'cv_compare.csv'}")
    return 0


def _cmd_advise(args) -> int:
    spec, defaults = _load(args)
    r = args.r if args.r is not None else spec.radius
    if r is None:
        raise SpecificationError("no radius: pass --r or set 'radius' in the config")
    if spec.a.sup_norm_bounds is None or spec.b.sup_norm_bounds is None:
        raise SpecificationError(
            "advise needs sup_norm_bounds on both coefficient models"
        )
    out = _write_manifest(args, {
        "rho": args.rho, "r": r, "s": args.s, "epsilon": args.epsilon,
    })
    n = advise_truncation(spec.a.sup_norm_bounds, spec.b.sup_norm_bounds,
                          l2_norm(spec.y0), l2_norm(spec.y1),
                          r, args.rho, args.s, args.epsilon)
    s_used = args.s if args.s is not None else 0.5 * (args.rho + r)
    write_rows_csv(out / "advise.csv", ["rho", "s", "r", "epsilon", "N"],
                   [(args.rho, s_used, float(r), args.epsilon, n)])
    print(f"advised truncation order: N = {n}")
    return 0


_COMMANDS = {
    "estimate": _cmd_estimate,
    "convergence": _cmd_convergence,
    "sampling": _cmd_sampling,
    "cv-compare": _cmd_cv_compare,
    "advise": _cmd_advise,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SpecificationError, UnsupportedOperationError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except (EstimationError, NumericalConsistencyError, GridCoverageError,
            BudgetError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL
    except RandodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
