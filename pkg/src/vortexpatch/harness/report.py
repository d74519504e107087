"""Run reports, threshold checks and byte-stable series emission."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .. import __version__
from ..diagnostics import DiagnosticSeries
from .runners import RUNNERS
from .scenario import Scenario

VERSION = __version__


@dataclass(frozen=True)
class Check:
    metric: str
    value: float
    min: float | None = None
    max: float | None = None

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or math.isnan(v):
            return False
        return (self.min is None or v >= self.min) and (self.max is None or v <= self.max)

    def describe(self) -> str:
        bounds = []
        if self.min is not None:
            bounds.append(f">= {self.min:g}")
        if self.max is not None:
            bounds.append(f"<= {self.max:g}")
        return f"{self.metric} = {self.value:.6g} ({' and '.join(bounds)})"


@dataclass
class RunReport:
    scenario: Scenario
    config_hash: str
    metrics: dict[str, float]
    checks: list[Check]
    series: dict[str, DiagnosticSeries] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    version: str = VERSION

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "version": self.version,
            "config_hash": self.config_hash,
            "metrics": {k: _json_num(v) for k, v in sorted(self.metrics.items())},
            "checks": [
                {
                    "metric": c.metric,
                    "value": _json_num(c.value),
                    "min": c.min,
                    "max": c.max,
                    "passed": c.passed,
                }
                for c in self.checks
            ],
            "passed": self.passed,
            "artifacts": sorted(self.artifacts),
        }


def _json_num(v: float) -> float | str:
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def config_hash(scen: Scenario, version: str = VERSION) -> str:
    blob = json.dumps({"version": version, **scen.to_dict()}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def check_thresholds(scen: Scenario, metrics: dict[str, float]) -> list[Check]:
    checks = []
    for metric, bound in sorted(scen.thresholds.items()):
        value = metrics.get(metric, math.nan)
        checks.append(Check(metric, float(value), bound.get("min"), bound.get("max")))
    return checks


def emit_series(report: RunReport, out_dir: str | Path) -> Path:
    """Write one ``time,value`` CSV per series plus ``manifest.json``.

    Files are named ``<group>.<series>.csv``.  Numbers use ``repr`` so the
    output is byte-identical for identical inputs.  Returns the manifest path.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for group in sorted(report.series):
        diag = report.series[group]
        for name in diag.names():
            fname = f"{group}.{name}.csv"
            t, v = diag.series(name)
            with open(out / fname, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["time", "value"])
                for ti, vi in zip(t, v):
                    w.writerow([repr(float(ti)), repr(float(vi))])
            entries.append({"group": group, "name": name, "file": fname, "rows": int(t.size)})
    manifest = {
        "scenario": report.scenario.name,
        "config_hash": report.config_hash,
        "version": report.version,
        "series": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def run(scen: Scenario, out_dir: str | Path) -> RunReport:
    """Execute a scenario, write its series, artifacts and ``report.json``.

    Raises
    ------
    KeyError
        If the target has no runner.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics, series, artifacts = RUNNERS[scen.target](scen, out)
    report = RunReport(scen, config_hash(scen), metrics, check_thresholds(scen, metrics), series, artifacts)
    emit_series(report, out)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return report
