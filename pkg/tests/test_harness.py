import json

import pytest

from vortexpatch.contour2d import F_MONITOR_NAMES
from vortexpatch.diagnostics import DiagnosticSeries
from vortexpatch.harness import cli
from vortexpatch.harness.report import RunReport, config_hash, emit_series, run
from vortexpatch.harness.scenario import (
    ScenarioError,
    apply_overrides,
    load_preset,
    parse_scenario,
    preset_names,
)

SMALL = """\
[scenario]
name = "small-rankine"
target = "simulate2d"
criterion = 1

[params]
contour = "circle"
N = 16
dt = 0.05
t_end = 0.2
monitor_every = 1

[thresholds]
boundary_drift = { max = 1e-8 }
"""


def test_every_preset_parses_and_maps_to_a_criterion():
    names = preset_names()
    assert len(names) >= 10
    covered = set()
    for name in names:
        s = load_preset(name)
        assert s.criterion, name
        assert s.thresholds, name
        covered.update(s.criterion)
    assert covered == set(range(1, 11))


def test_negative_dt_is_a_parse_stage_error():
    text = SMALL.replace("dt = 0.05", "dt = -0.05")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert "dt" in str(info.value)
    assert (info.value.line, info.value.column) == (9, 1)


def test_unknown_key_reports_position():
    text = SMALL.replace("N = 16", "N = 16\n  n_modes = 3")
    with pytest.raises(ScenarioError) as info:
        parse_scenario(text)
    assert info.value.line == 9 and info.value.column == 3


def test_unknown_metric_is_rejected():
    with pytest.raises(ScenarioError):
        parse_scenario(SMALL.replace("boundary_drift", "bondary_drift"))


def test_toml_syntax_error_has_line_and_column():
    with pytest.raises(ScenarioError) as info:
        parse_scenario(SMALL.replace("N = 16", "N = = 16"))
    assert (info.value.line, info.value.column) == (8, 5)


def test_overrides_are_typed():
    s = apply_overrides(parse_scenario(SMALL), {"N": "32", "dt": "0.01"})
    assert s.params["N"] == 32 and s.params["dt"] == 0.01
    with pytest.raises(ScenarioError):
        apply_overrides(s, {"N": "-1"})
    with pytest.raises(ScenarioError):
        apply_overrides(s, {"nope": "1"})


def test_config_hash_tracks_parameters():
    s = parse_scenario(SMALL)
    assert config_hash(s) == config_hash(parse_scenario(SMALL))
    assert config_hash(s) != config_hash(apply_overrides(s, {"N": "17"}))


def test_empty_diagnostics_give_empty_manifest(tmp_path):
    rep = RunReport(parse_scenario(SMALL), "0" * 16, {}, [])
    manifest = json.loads(emit_series(rep, tmp_path).read_text())
    assert manifest["series"] == []


def test_monitor_run_emits_the_three_summands(tmp_path):
    rep = run(parse_scenario(SMALL), tmp_path)
    assert rep.passed
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    monitor = sorted(e["name"] for e in manifest["series"] if e["group"] == "monitor")
    assert monitor == sorted(F_MONITOR_NAMES)
    head = (tmp_path / "monitor.velocity_gradient_sup.csv").read_text().splitlines()
    assert head[0] == "time,value"


def test_rerun_is_byte_identical(tmp_path):
    scen = parse_scenario(SMALL)
    run(scen, tmp_path / "a")
    run(scen, tmp_path / "b")
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_series_rows_round_trip_floats(tmp_path):
    d = DiagnosticSeries()
    d.add(0.0, "x", 0.1)
    d.add(0.5, "x", 1 / 3)
    rep = RunReport(parse_scenario(SMALL), "0" * 16, {}, [], {"g": d})
    emit_series(rep, tmp_path)
    rows = (tmp_path / "g.x.csv").read_text().splitlines()[1:]
    assert [float(r.split(",")[1]) for r in rows] == [0.1, 1 / 3]


# -- CLI exit codes ------------------------------------------------------------


def test_cli_pass(tmp_path, capsys):
    code = cli.main(["flatten", "--preset", "boundary-jacobian-circle", "--out", str(tmp_path)])
    assert code == 0
    assert "PASS boundary-jacobian-circle" in capsys.readouterr().out
    assert cli.main(["report", "--out", str(tmp_path)]) == 0


def test_cli_fail(tmp_path):
    f = tmp_path / "strict.toml"
    f.write_text(SMALL.replace("max = 1e-8", "max = -1.0"))
    assert cli.main(["simulate2d", "--scenario", str(f), "--out", str(tmp_path / "out")]) == 1
    assert cli.main(["report", "--out", str(tmp_path / "out")]) == 1


def test_cli_usage_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL.replace("dt = 0.05", "dt = -1.0"))
    assert cli.main(["simulate2d", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert cli.main(["flatten", "--preset", "rankine-stationarity", "--out", str(tmp_path)]) == 2
    assert cli.main(["simulate2d", "--out", str(tmp_path)]) == 2
    assert cli.main(["simulate2d", "--preset", "no-such-preset"]) == 2
    assert cli.main(["no-such-command"]) == 2
    assert cli.main(["report", "--out", str(tmp_path / "empty")]) == 2


def test_cli_resolution_override(tmp_path):
    code = cli.main([
        "flatten", "--preset", "boundary-jacobian-perturbed", "--out", str(tmp_path),
        "--resolution-override", "N=16",
    ])
    assert code == 0
    rep = json.loads((tmp_path / "boundary-jacobian-perturbed" / "report.json").read_text())
    assert rep["scenario"]["params"]["N"] == 16


def test_cli_parallel_jobs(tmp_path):
    code = cli.main([
        "flatten", "--preset", "boundary-jacobian-circle", "--preset", "boundary-jacobian-perturbed",
        "--out", str(tmp_path), "--jobs", "2",
    ])
    assert code == 0
    assert (tmp_path / "boundary-jacobian-circle" / "report.json").exists()
    assert (tmp_path / "boundary-jacobian-perturbed" / "report.json").exists()
