"""Problem configuration files: parsing, serialization, bundled presets.

A config is a YAML (or JSON) mapping with `t0`, coefficient models under
`coefficients.a` / `coefficients.b`, initial-condition laws under
`initial.y0` / `initial.y1`, an optional `radius`, and optional per-run
`defaults` (role, grid).  Parsing and serialization round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import yaml

from .distributions import DistributionSpec
from .errors import SpecificationError
from .series import CoefficientModel, ProblemSpec

__all__ = [
    "RunDefaults",
    "parse_distribution",
    "distribution_to_config",
    "parse_coefficient_model",
    "coefficient_model_to_config",
    "build_problem",
    "problem_to_config",
    "load_config",
    "preset_names",
    "resolve_config",
]

_PARAM_NAMES = {
    "uniform": ("a", "b"),
    "normal": ("mu", "sigma"),
    "gamma": ("shape", "rate"),
    "beta": ("alpha", "beta"),
    "exponential": ("rate",),
    "bernoulli": ("p",),
    "poisson": ("lam",),
    "point_mass": ("c",),
    "custom": (),
}
_PARAM_ALIASES = {"lambda": "lam", "value": "c", "mean": "mu", "std": "sigma"}


@dataclass
class RunDefaults:
    role: str = "auto"
    grid_lo: Optional[float] = None
    grid_hi: Optional[float] = None
    grid_points: int = 1000


def _fail(path: str, msg: str):
    raise SpecificationError(f"{path}: {msg}")


def parse_distribution(node, path: str = "distribution") -> DistributionSpec:
    """Accepts {family, params (list or named map), truncate?, density?} or a number."""
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return DistributionSpec.point_mass(float(node))
    if not isinstance(node, dict):
        _fail(path, f"expected a mapping or number, got {type(node).__name__}")
    family = str(node.get("family", "")).lower().replace("-", "_")
    if family == "pointmass":
        family = "point_mass"
    if family not in _PARAM_NAMES:
        _fail(path, f"unknown family {node.get('family')!r}")
    raw = node.get("params", [])
    names = _PARAM_NAMES[family]
    if isinstance(raw, dict):
        try:
            params = tuple(
                float(raw[k] if k in raw else raw[_alias_for(k, raw)]) for k in names
            )
        except KeyError as exc:
            _fail(path, f"missing parameter {exc.args[0]!r} for family {family}")
    elif isinstance(raw, (list, tuple)):
        if len(raw) != len(names):
            _fail(path, f"family {family} expects {len(names)} params, got {len(raw)}")
        params = tuple(float(v) for v in raw)
    else:
        _fail(path, "params must be a list or a mapping")
    truncate = node.get("truncate")
    if truncate is not None:
        if not (isinstance(truncate, (list, tuple)) and len(truncate) == 2):
            _fail(path, "truncate must be [lo, hi]")
        truncate = (float(truncate[0]), float(truncate[1]))
    expr = node.get("density")
    if family == "custom" and not expr:
        _fail(path, "custom distribution needs a density expression")
    try:
        return DistributionSpec(family, params, truncate, expr)
    except SpecificationError as exc:
        _fail(path, str(exc))


def _alias_for(name: str, raw: dict) -> str:
    for alias, target in _PARAM_ALIASES.items():
        if target == name and alias in raw:
            return alias
    raise KeyError(name)


def distribution_to_config(dist: DistributionSpec) -> dict:
    out = {"family": dist.family}
    if dist.params:
        out["params"] = [float(p) for p in dist.params]
    if dist.truncate is not None:
        out["truncate"] = [dist.truncate[0], dist.truncate[1]]
    if dist.density_expr is not None:
        out["density"] = dist.density_expr
    return out


def parse_coefficient_model(node, path: str) -> CoefficientModel:
    if isinstance(node, (int, float)) and not isinstance(node, bool):
        return CoefficientModel.explicit([float(node)])
    if isinstance(node, (list, tuple)):
        node = {"kind": "explicit", "entries": list(node)}
    if not isinstance(node, dict):
        _fail(path, f"expected a mapping, list, or number, got {type(node).__name__}")
    kind = str(node.get("kind", "explicit")).lower()
    bounds = node.get("sup_norm_bounds")
    if bounds is not None:
        bounds = tuple(float(v) for v in bounds)
    if kind == "explicit":
        entries = node.get("entries")
        if not isinstance(entries, (list, tuple)) or not entries:
            _fail(path, "explicit model needs a nonempty entries list")
        parsed = []
        for i, e in enumerate(entries):
            if isinstance(e, dict):
                parsed.append(parse_distribution(e, f"{path}.entries[{i}]"))
            elif isinstance(e, (int, float)) and not isinstance(e, bool):
                parsed.append(float(e))
            else:
                _fail(f"{path}.entries[{i}]", "must be a number or a distribution")
        return CoefficientModel.explicit(parsed, sup_norm_bounds=bounds)
    if kind == "rule":
        expr = node.get("expr") or node.get("rule")
        if not expr:
            _fail(path, "rule model needs an 'expr' formula in n")
        degree = node.get("degree_bound")
        return CoefficientModel.rule(str(expr),
                                     degree_bound=None if degree is None else int(degree),
                                     sup_norm_bounds=bounds)
    if kind == "iid":
        fam = node.get("family")
        if fam is None:
            _fail(path, "iid model needs a 'family' distribution")
        law = parse_distribution(fam if isinstance(fam, dict) else node, f"{path}.family")
        return CoefficientModel.iid(law, sup_norm_bounds=bounds)
    _fail(path, f"unknown coefficient model kind {kind!r}")


def coefficient_model_to_config(model: CoefficientModel) -> dict:
    out = {"kind": model.kind}
    if model.kind == "explicit":
        out["entries"] = [
            distribution_to_config(e) if isinstance(e, DistributionSpec) else float(e)
            for e in model.entries
        ]
    elif model.kind == "rule":
        out["expr"] = model.rule_expr
        if model.degree_bound is not None:
            out["degree_bound"] = int(model.degree_bound)
    else:
        out["family"] = distribution_to_config(model.family)
    if model.sup_norm_bounds is not None:
        out["sup_norm_bounds"] = [float(v) for v in model.sup_norm_bounds]
    return out


def build_problem(doc: dict):
    """(ProblemSpec, RunDefaults) from a parsed config mapping."""
    if not isinstance(doc, dict):
        raise SpecificationError("config root must be a mapping")
    if "t0" not in doc:
        _fail("t0", "missing expansion point")
    coeffs = doc.get("coefficients")
    if not isinstance(coeffs, dict) or "a" not in coeffs or "b" not in coeffs:
        _fail("coefficients", "needs sub-entries 'a' and 'b'")
    initial = doc.get("initial")
    if not isinstance(initial, dict) or "y0" not in initial or "y1" not in initial:
        _fail("initial", "needs sub-entries 'y0' and 'y1'")
    spec = ProblemSpec(
        t0=float(doc["t0"]),
        a=parse_coefficient_model(coeffs["a"], "coefficients.a"),
        b=parse_coefficient_model(coeffs["b"], "coefficients.b"),
        y0=parse_distribution(initial["y0"], "initial.y0"),
        y1=parse_distribution(initial["y1"], "initial.y1"),
        radius=None if doc.get("radius") is None else float(doc["radius"]),
    )
    defaults = RunDefaults()
    dnode = doc.get("defaults", {}) or {}
    if "role" in dnode:
        role = str(dnode["role"]).lower()
        if role not in ("auto", "via_y0", "via_y1"):
            _fail("defaults.role", f"unknown role {dnode['role']!r}")
        defaults.role = role
    gnode = dnode.get("grid")
    if gnode:
        defaults.grid_lo = float(gnode["lo"]) if "lo" in gnode else None
        defaults.grid_hi = float(gnode["hi"]) if "hi" in gnode else None
        defaults.grid_points = int(gnode.get("points", defaults.grid_points))
        if (defaults.grid_lo is None) != (defaults.grid_hi is None):
            _fail("defaults.grid", "lo and hi must be given together")
        if defaults.grid_lo is not None and defaults.grid_lo >= defaults.grid_hi:
            _fail("defaults.grid", "lo must be below hi")
    return spec, defaults


def problem_to_config(spec: ProblemSpec, defaults: Optional[RunDefaults] = None) -> dict:
    doc = {
        "t0": float(spec.t0),
        "coefficients": {
            "a": coefficient_model_to_config(spec.a),
            "b": coefficient_model_to_config(spec.b),
        },
        "initial": {
            "y0": distribution_to_config(spec.y0),
            "y1": distribution_to_config(spec.y1),
        },
    }
    if spec.radius is not None:
        doc["radius"] = float(spec.radius)
    if defaults is not None:
        dnode = {}
        if defaults.role != "auto":
            dnode["role"] = defaults.role
        if defaults.grid_lo is not None:
            dnode["grid"] = {"lo": defaults.grid_lo, "hi": defaults.grid_hi,
                             "points": defaults.grid_points}
        if dnode:
            doc["defaults"] = dnode
    return doc


# ---------------------------------------------------------------------------
# loading

def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecificationError(f"{path}: not valid YAML/JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SpecificationError(f"{path}: config root must be a mapping")
    return doc


def preset_names():
    root = resources.files("randode").joinpath("presets")
    return sorted(p.name[: -len(".yaml")] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_config(name_or_path) -> dict:
    """Load a config from a file path or a bundled preset name."""
    p = Path(name_or_path)
    if p.is_file():
        return load_config(p)
    preset = resources.files("randode").joinpath("presets", f"{name_or_path}.yaml")
    if preset.is_file():
        doc = yaml.safe_load(preset.read_text())
        if not isinstance(doc, dict):
            raise SpecificationError(f"preset {name_or_path!r} is malformed")
        return doc
    raise SpecificationError(
        f"config {name_or_path!r} is neither a file nor a preset "
        f"(presets: {', '.join(preset_names())})"
    )
