"""Scenario runner, CLI and series emission around the numerical modules."""

from .report import Check, RunReport, check_thresholds, config_hash, emit_series, run
from .scenario import (
    METRICS,
    PARAMS,
    Scenario,
    ScenarioError,
    apply_overrides,
    load_preset,
    load_scenario,
    parse_scenario,
    preset_names,
)

__all__ = [
    "Check",
    "METRICS",
    "PARAMS",
    "RunReport",
    "Scenario",
    "ScenarioError",
    "apply_overrides",
    "check_thresholds",
    "config_hash",
    "emit_series",
    "load_preset",
    "load_scenario",
    "parse_scenario",
    "preset_names",
    "run",
]
