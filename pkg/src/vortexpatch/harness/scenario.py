"""Typed TOML scenarios: schema, validation, overrides and built-in presets.

A scenario file has three tables::

    [scenario]      name, target, criterion, seed, description
    [params]        target-specific typed keys (see ``PARAMS``)
    [thresholds]    metric = { min = ..., max = ... }

Unknown keys anywhere are errors, reported with their line and column.
"""

from __future__ import annotations

import copy
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable

import tomli

TARGETS = ("simulate2d", "flatten", "solve-elliptic", "evolve3d")


class ScenarioError(ValueError):
    """Parse-stage or precondition failure; carries the source location when known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = ""):
        where = ""
        if line is not None:
            where = f"line {line}, column {column or 1}: "
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{where}{message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Param:
    kind: type | tuple[type, ...]
    default: Any
    check: Callable[[Any], bool] | None = None
    rule: str = ""


def _pos(x) -> bool:
    return x > 0


def _nonneg(x) -> bool:
    return x >= 0


def _one_of(*opts: str) -> Param:
    return Param(str, opts[0], lambda v: v in opts, f"one of {', '.join(opts)}")


_CONTOUR = {
    "contour": _one_of("circle", "ellipse", "perturbed", "random"),
    "radius": Param(float, 1.0, _pos, "> 0"),
    "a": Param(float, 2.0, _pos, "> 0"),
    "b": Param(float, 1.0, _pos, "> 0"),
    "angle": Param(float, 0.0),
    "amplitudes": Param(list, [], lambda v: all(len(p) == 2 and int(p[0]) >= 1 for p in v), "[[mode, amplitude], ...] with mode >= 1"),
    "random_modes": Param(int, 8, _pos, "> 0"),
    "random_amplitude": Param(float, 0.05, _nonneg, ">= 0"),
    "random_decay": Param(float, 2.0, _nonneg, ">= 0"),
    "N": Param(int, 64, _pos, "> 0"),
}

PARAMS: dict[str, dict[str, Param]] = {
    "simulate2d": {
        **_CONTOUR,
        "mode": _one_of("evolve", "oracle"),
        "dt": Param(float, 0.02, _pos, "> 0"),
        "t_end": Param(float, 1.0, _pos, "> 0"),
        "omega_plus": Param(float, 1.0),
        "omega_minus": Param(float, 0.0),
        "monitor_every": Param(int, 0, _nonneg, ">= 0"),
        "snapshot_every": Param(int, 1, _pos, "> 0"),
        "sobolev_k": Param(int, 4, lambda v: v >= 2, ">= 2"),
        "probes": Param(int, 20, _pos, "> 0"),
        "reference_N": Param(int, 0, _nonneg, ">= 0"),
        "reference_t_end": Param(float, 1.0, _pos, "> 0"),
    },
    "flatten": {
        **_CONTOUR,
        "mode": _one_of("jacobian", "gain"),
        "n_theta": Param(int, 100, _pos, "> 0"),
        "k": Param(int, 3, lambda v: v in (2, 3, 4), "2, 3 or 4"),
        "members": Param(int, 10, lambda v: v >= 2, ">= 2"),
        "family_amplitude": Param(float, 0.2, _pos, "> 0"),
        "family_N": Param(int, 64, lambda v: v >= 8, ">= 8"),
        "eps_max": Param(float, 1.0, _pos, "> 0"),
        "eps_min": Param(float, 0.05, _pos, "> 0"),
        "outer_radius": Param(float, 0.0, _nonneg, ">= 0 (0 selects the default)"),
    },
    "solve-elliptic": {
        **_CONTOUR,
        "problem": _one_of("rankine-stream", "rankine-velocity", "manufactured", "manufactured-rough"),
        "h": Param(list, [0.2, 0.1, 0.05], lambda v: len(v) >= 1 and all(float(x) > 0 for x in v), "non-empty list of positive sizes"),
        "degree": Param(int, 1, lambda v: v in (1, 2), "1 or 2"),
    },
    "evolve3d": {
        "preset": _one_of("ring", "ball", "zero"),
        "n": Param(int, 32, lambda v: v >= 8 and v % 2 == 0, "even and >= 8"),
        "half_length": Param(float, math.pi, _pos, "> 0"),
        "method": _one_of("spectral", "fd4"),
        "T": Param(float, 0.5, _pos, "> 0"),
        "M": Param(int, 4, _pos, "> 0"),
        "tol": Param(float, 1e-8, _pos, "> 0"),
        "cg_tol": Param(float, 1e-9, _pos, "> 0"),
        "max_iter": Param(int, 50, _pos, "> 0"),
        "band": Param(float, 0.0, _nonneg, ">= 0 (0 selects three grid spacings)"),
        "radius": Param(float, 1.2, _pos, "> 0"),
        "major": Param(float, 1.2, _pos, "> 0"),
        "minor": Param(float, 0.5, _pos, "> 0"),
        "omega": Param(float, 1.0),
        "refine": Param(list, [], lambda v: all(int(x) >= 8 and int(x) % 2 == 0 for x in v), "list of even grid sizes"),
        "refine_band": Param(float, 0.9, _pos, "> 0"),
        "snapshots": Param(bool, False),
    },
}

METRICS: dict[str, tuple[str, ...]] = {
    "simulate2d": (
        "boundary_drift", "area_drift", "rotation_rate", "rate_rel_error", "deformation",
        "final_chord_arc", "oracle_max_diff", "reference_rate_rel_error", "rate_self_difference",
    ),
    "flatten": (
        "boundary_jacobian_defect", "injectivity_eps", "maps_inside", "disk_norm",
        "gain_ratio_min", "gain_ratio_max", "gain_ratio_spread",
    ),
    "solve-elliptic": (
        "nodal_l2_rate", "l2_rate", "h1_rate", "flux_jump_rate", "center_drop_error",
        "jump_distance", "jump_distance_rate", "mean_tangential_jump", "value_jump",
        "l2_finest", "nodal_l2_finest", "h1_finest",
    ),
    "evolve3d": (
        "iterations", "final_difference", "max_late_factor", "monotone", "velocity_max",
        "zero_mean_defect", "min_coercivity", "max_displacement", "support_leak",
        "data_divergence", "divergence_proxy", "jacobian_defect", "cauchy_residual",
        "tangency_residual", "mean_vorticity_rel", "order_divergence", "order_jacobian",
        "order_cauchy",
    ),
}

_HEADER = {
    "name": Param(str, ""),
    "target": Param(str, "", lambda v: v in TARGETS, f"one of {', '.join(TARGETS)}"),
    "criterion": Param((int, list), 0),
    "seed": Param(int, 0, _nonneg, ">= 0"),
    "description": Param(str, ""),
}


@dataclass
class Scenario:
    name: str
    target: str
    params: dict[str, Any]
    thresholds: dict[str, dict[str, float]] = field(default_factory=dict)
    criterion: list[int] = field(default_factory=list)
    seed: int = 0
    description: str = ""
    source: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": {
                "name": self.name,
                "target": self.target,
                "criterion": list(self.criterion),
                "seed": self.seed,
                "description": self.description,
            },
            "params": dict(sorted(self.params.items())),
            "thresholds": {k: dict(sorted(v.items())) for k, v in sorted(self.thresholds.items())},
        }


def _locate(text: str, key: str, table: str | None = None) -> tuple[int | None, int | None]:
    lines = text.splitlines()
    start = 0
    if table is not None:
        for i, ln in enumerate(lines):
            if re.match(rf"^\s*\[\s*{re.escape(table)}\s*\]", ln):
                start = i
                break
    pat = re.compile(rf"^(\s*)({re.escape(key)}|\"{re.escape(key)}\")\s*=")
    for i in range(start, len(lines)):
        m = pat.match(lines[i])
        if m:
            return i + 1, len(m.group(1)) + 1
    return None, None


def _coerce(name: str, value: Any, spec: Param, text: str, table: str, source: str) -> Any:
    kinds = spec.kind if isinstance(spec.kind, tuple) else (spec.kind,)
    v = value
    if float in kinds and isinstance(v, int) and not isinstance(v, bool):
        v = float(v)
    if not isinstance(v, kinds) or (isinstance(v, bool) and bool not in kinds):
        line, col = _locate(text, name, table)
        names = "/".join(k.__name__ for k in kinds)
        raise ScenarioError(f"{table}.{name} must be {names}, got {type(value).__name__}", line, col, source)
    if spec.check is not None and not spec.check(v):
        line, col = _locate(text, name, table)
        raise ScenarioError(f"{table}.{name} = {value!r} violates precondition: {spec.rule}", line, col, source)
    return v


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse and validate scenario text.

    Raises
    ------
    ScenarioError
        On TOML syntax errors, unknown tables or keys, wrong types and
        violated preconditions, with line and column where available.
    """
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(exc.msg, exc.lineno, exc.colno, source) from None
    for table in doc:
        if table not in ("scenario", "params", "thresholds"):
            line, col = _locate(text, table) if not isinstance(doc[table], dict) else (None, None)
            if line is None:
                for i, ln in enumerate(text.splitlines()):
                    if re.match(rf"^\s*\[\s*{re.escape(table)}\s*\]", ln):
                        line, col = i + 1, 1
                        break
            raise ScenarioError(f"unknown table or key {table!r}", line, col, source)
    head = doc.get("scenario", {})
    for key in head:
        if key not in _HEADER:
            line, col = _locate(text, key, "scenario")
            raise ScenarioError(f"unknown key scenario.{key}", line, col, source)
    hv = {k: _coerce(k, head[k], _HEADER[k], text, "scenario", source) for k in head}
    target = hv.get("target")
    if not target:
        raise ScenarioError("scenario.target is required", source=source)
    name = hv.get("name") or Path(source).stem
    schema = PARAMS[target]
    raw = doc.get("params", {})
    params = {}
    for key, spec in schema.items():
        params[key] = copy.deepcopy(spec.default)
    for key, value in raw.items():
        if key not in schema:
            line, col = _locate(text, key, "params")
            raise ScenarioError(f"unknown parameter params.{key} for target {target}", line, col, source)
        params[key] = _coerce(key, value, schema[key], text, "params", source)
    thresholds: dict[str, dict[str, float]] = {}
    for metric, bound in doc.get("thresholds", {}).items():
        line, col = _locate(text, metric, "thresholds")
        if metric not in METRICS[target]:
            raise ScenarioError(f"unknown metric thresholds.{metric} for target {target}", line, col, source)
        if not isinstance(bound, dict) or not bound or set(bound) - {"min", "max"}:
            raise ScenarioError(f"thresholds.{metric} must be a table with min and/or max", line, col, source)
        thresholds[metric] = {k: float(v) for k, v in bound.items()}
    crit = hv.get("criterion", [])
    crit = [int(c) for c in (crit if isinstance(crit, list) else [crit]) if c]
    scen = Scenario(name, target, params, thresholds, crit, hv.get("seed", 0), hv.get("description", ""), source)
    validate(scen)
    return scen


def validate(scen: Scenario) -> None:
    """Cross-field preconditions of the target module."""
    p = scen.params
    if scen.target in ("simulate2d", "flatten", "solve-elliptic"):
        if p["contour"] == "ellipse" and p["a"] < p["b"]:
            raise ScenarioError("ellipse needs a >= b (a is the major semi-axis)", source=scen.source)
    if scen.target == "flatten" and p["eps_min"] > p["eps_max"]:
        raise ScenarioError("eps_min must not exceed eps_max", source=scen.source)
    if scen.target == "evolve3d":
        if p["preset"] == "ring" and p["minor"] >= p["major"]:
            raise ScenarioError("ring needs minor < major", source=scen.source)
        if p["refine"] and len(p["refine"]) < 2:
            raise ScenarioError("refine needs at least two grid sizes", source=scen.source)
    if scen.target == "solve-elliptic" and p["problem"].startswith("manufactured") and len(p["h"]) < 3:
        raise ScenarioError("convergence studies need at least three mesh sizes", source=scen.source)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


def apply_overrides(scen: Scenario, overrides: dict[str, str]) -> Scenario:
    """Return a copy with ``key=value`` parameter overrides (values in TOML syntax)."""
    out = copy.deepcopy(scen)
    schema = PARAMS[scen.target]
    for key, text in overrides.items():
        if key not in schema:
            raise ScenarioError(f"override {key!r} is not a parameter of target {scen.target}")
        try:
            value = tomli.loads(f"v = {text}")["v"]
        except tomli.TOMLDecodeError:
            value = text
        out.params[key] = _coerce(key, value, schema[key], "", "params", "override")
    validate(out)
    return out


def preset_names() -> list[str]:
    root = resources.files(__package__).joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> Scenario:
    root = resources.files(__package__).joinpath("scenarios")
    res = root.joinpath(f"{name}.toml")
    if not res.is_file():
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return parse_scenario(res.read_text(), f"{name}.toml")
