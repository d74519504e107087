"""Command-line entry point: ``vortexpatch <subcommand> [options]``.

Exit codes: 0 when every declared threshold passes, 1 when any fails (or a
run raises), 2 on usage, parse or dispatch errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .report import run
from .scenario import Scenario, ScenarioError, apply_overrides, load_preset, load_scenario, preset_names

SUBCOMMANDS = {
    "simulate2d": "2-D contour dynamics and the velocity oracle",
    "flatten": "biharmonic extension diagnostics",
    "solve-elliptic": "two-phase finite element studies",
    "evolve3d": "3-D Lagrangian fixed-point runs",
}

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _parse_overrides(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vortexpatch", description="Vortex patch numerics harness")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--scenario", action="append", default=[], metavar="FILE", help="scenario TOML file (repeatable)")
        sp.add_argument("--preset", action="append", default=[], metavar="NAME", help="built-in scenario (repeatable)")
        sp.add_argument("--out", default="runs", metavar="DIR", help="output root; each scenario writes DIR/<name>")
        sp.add_argument("--jobs", type=int, default=1, metavar="N", help="run independent scenarios in parallel")
        sp.add_argument(
            "--resolution-override", action="append", default=[], metavar="K=V",
            help="override a parameter, value in TOML syntax (repeatable)",
        )
        sp.add_argument("--list-presets", action="store_true", help="list built-in scenarios for this command")
        if name == "solve-elliptic":
            sp.add_argument("--problem", help="override params.problem")
            sp.add_argument("--h", type=float, nargs="+", help="override the mesh sizes")
    rp = sub.add_parser("report", help="summarise report.json files under a directory")
    rp.add_argument("--out", default="runs", metavar="DIR")
    return parser


def _execute(scen: Scenario, out: str) -> tuple[str, bool, list[str], str | None]:
    try:
        rep = run(scen, Path(out))
    except ScenarioError as exc:
        return scen.name, False, [], f"dispatch error: {exc}"
    except Exception as exc:  # surfaced verbatim as a failed run
        return scen.name, False, [], f"{type(exc).__name__}: {exc}"
    lines = [("PASS " if c.passed else "FAIL ") + c.describe() for c in rep.checks]
    return scen.name, rep.passed, lines, None


def _collect(args: argparse.Namespace) -> list[Scenario]:
    scens = [load_scenario(f) for f in args.scenario] + [load_preset(n) for n in args.preset]
    if not scens:
        raise ScenarioError("give at least one --scenario or --preset")
    overrides = _parse_overrides(args.resolution_override)
    if getattr(args, "problem", None):
        overrides["problem"] = json.dumps(args.problem)
    if getattr(args, "h", None):
        overrides["h"] = json.dumps(args.h)
    out = []
    for s in scens:
        if s.target != args.command:
            raise ScenarioError(f"scenario {s.name!r} targets {s.target}, not {args.command}")
        out.append(apply_overrides(s, overrides) if overrides else s)
    names = [s.name for s in out]
    if len(set(names)) != len(names):
        raise ScenarioError("scenario names must be distinct (they name the output directories)")
    return out


def _report(out: Path) -> int:
    files = sorted(out.glob("report.json")) + sorted(out.glob("*/report.json"))
    if not files:
        print(f"no report.json under {out}", file=sys.stderr)
        return EXIT_USAGE
    ok = True
    for f in files:
        rep = json.loads(f.read_text())
        name = rep["scenario"]["scenario"]["name"]
        print(f"{'PASS' if rep['passed'] else 'FAIL'} {name} [{rep['config_hash']}]")
        for c in rep["checks"]:
            print(f"  {'pass' if c['passed'] else 'FAIL'} {c['metric']} = {c['value']}")
        ok &= bool(rep["passed"])
    return EXIT_PASS if ok else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    if args.command == "report":
        return _report(Path(args.out))
    if args.list_presets:
        for name in preset_names():
            s = load_preset(name)
            if s.target == args.command:
                print(f"{name}: {s.description}")
        return EXIT_PASS
    try:
        scens = _collect(args)
    except (ScenarioError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    root = Path(args.out)
    jobs = [(s, str(root / s.name)) for s in scens]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_execute, *zip(*jobs)))
    else:
        results = [_execute(s, o) for s, o in jobs]
    code = EXIT_PASS
    for name, passed, lines, err in results:
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        for ln in lines:
            print(f"  {ln}")
        if err:
            print(f"  {err}", file=sys.stderr)
            code = max(code, EXIT_USAGE if err.startswith("dispatch error") else EXIT_FAIL)
        elif not passed:
            code = max(code, EXIT_FAIL)
    return code


if __name__ == "__main__":
    sys.exit(main())
