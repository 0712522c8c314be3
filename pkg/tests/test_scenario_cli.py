"""Scenario files, run artifacts, manifests, and the command line."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from naimstab.cli import (
    EXIT_CERTIFICATE,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from naimstab.manifolds import GeometryError
from naimstab.scenario import (
    ScenarioError,
    _fmt,
    bundled_scenario_names,
    bundled_scenario_path,
    load_scenario,
    run_diagnose,
    run_simulate,
    run_sweep,
    scenario_from_dict,
    scenario_to_json,
)

BUNDLED = {"fig1", "so3_covariant_oracle", "so3_jets", "sweep_demo", "underactuated"}


def mini_doc(**over):
    doc = {
        "name": "mini",
        "manifold": {"kind": "sphere_s2"},
        "field": {"kind": "rotation_s2", "axis": [0.0, 0.0, 1.0]},
        "epsilon": 0.5,
        "initial_conditions": [{"q": [1.0, 0.0, 0.0], "v": [0.0, 0.3, 0.4]}],
        "horizon": 2.0,
        "dt": 0.001,
        "record_every": 10,
    }
    doc.update(over)
    return doc


def write_doc(tmp_path, doc, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


# ----------------------------------------------------------------- parsing


def test_bundled_scenarios_round_trip():
    assert set(bundled_scenario_names()) == BUNDLED
    for name in bundled_scenario_names():
        path = bundled_scenario_path(name)
        assert scenario_to_json(load_scenario(path)) == path.read_text()


def test_unknown_bundled_name():
    with pytest.raises(ScenarioError):
        bundled_scenario_path("does_not_exist")


@pytest.mark.parametrize(
    "mutation",
    [
        lambda d: d.pop("epsilon"),
        lambda d: d.pop("initial_conditions"),
        lambda d: d.update(manifold={"kind": "torus"}),
        lambda d: d.update(field={"kind": "rotation_s2", "axis": [0.0, 0.0]}),
        lambda d: d.update(epsilon=-1.0),
        lambda d: d.update(epsilon=[]),
        lambda d: d.update(initial_conditions=[]),
        lambda d: d.update(initial_conditions=[{"q": [1.0, 0.0], "v": [0.0, 1.0]}]),
        lambda d: d.update(initial_conditions=[{"q": [1.002, 0.0, 0.0], "v": [0.0, 1.0, 0.0]}]),
        lambda d: d.update(record_every=0),
        lambda d: d.update(horizon=-2.0),
        lambda d: d.update(diagnostics={"bunching": {"taus": [-1.0]}}),
    ],
)
def test_parse_rejects_bad_documents(mutation):
    doc = mini_doc()
    mutation(doc)
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_field_manifold_mismatch():
    doc = mini_doc(field={"kind": "spin_so3", "axis": [1.0, 0.0, 0.0]})
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_constant_law_validated_eagerly():
    doc = mini_doc(control={"law": "constant", "coefficients": [1.0]})
    with pytest.raises((ScenarioError, GeometryError)):
        scenario_from_dict(doc)


def test_small_snap_accepted_and_recorded():
    doc = mini_doc(initial_conditions=[{"q": [1.0005, 0.0, 0.0], "v": [0.0, 0.3, 0.4]}])
    s = scenario_from_dict(doc)
    assert s.snap_distances[0] == pytest.approx(5e-4, rel=1e-2)
    assert np.linalg.norm(s.initial_conditions[0].q) == pytest.approx(1.0, abs=1e-12)
    assert s.raw_initial_conditions[0]["q"][0] == 1.0005


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{ not json")
    with pytest.raises(ScenarioError):
        load_scenario(bad)
    top = tmp_path / "top.json"
    top.write_text("[]")
    with pytest.raises(ScenarioError):
        load_scenario(top)


def test_sweep_scenario_needs_resolved_epsilon():
    s = scenario_from_dict(mini_doc(epsilon=[0.5, 1.0]))
    with pytest.raises(ScenarioError):
        s.config()
    assert s.config(1.0).epsilon == 1.0


def test_float_formatting_round_trips():
    for x in [0.1, 1.0 / 3.0, 1e-17, -0.0, 1.2345678901234567, np.float64(np.pi)]:
        assert float(_fmt(x)) == float(x)


# ----------------------------------------------------------------- running


def test_run_simulate_artifact_contract(tmp_path):
    s = scenario_from_dict(mini_doc())
    out = tmp_path / "run"
    summary = run_simulate(s, out)
    assert summary["trajectories"] == 1 and summary["epsilon"] == 0.5

    header, rows = read_csv(out / "trajectory_ic00.csv")
    assert header == ["t", "q1", "q2", "q3", "v1", "v2", "v3"]
    assert rows[0, 0] == 0.0
    assert np.allclose(rows[0, 1:4], [1.0, 0.0, 0.0])
    assert np.allclose(rows[0, 4:], [0.0, 0.3, 0.4])
    assert np.all(np.diff(rows[:, 0]) > 0)
    assert rows.shape[0] == 1 + 2000 // 10

    ref_header, ref_rows = read_csv(out / "reference_ic00.csv")
    assert ref_header == header and ref_rows.shape == rows.shape

    res_header, res_rows = read_csv(out / "residual_ic00.csv")
    assert res_header == ["t", "res_norm_sq"]
    assert np.all(res_rows[:, 1] >= 0.0)
    assert res_rows[-1, 1] < res_rows[0, 1]

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["scenario"] == "mini" and manifest["command"] == "simulate"
    assert manifest["snap_distances"] == [0.0]
    by_path = {a["path"]: a for a in manifest["artifacts"]}
    assert by_path["trajectory_ic00.csv"]["rows"] == rows.shape[0]
    assert by_path["residual_ic00.csv"]["epsilon"] == 0.5
    import hashlib

    digest = hashlib.sha256((out / "trajectory_ic00.csv").read_bytes()).hexdigest()
    assert by_path["trajectory_ic00.csv"]["sha256"] == digest


def test_run_simulate_is_deterministic(tmp_path):
    doc = mini_doc(horizon=1.0)
    a, b = tmp_path / "a", tmp_path / "b"
    run_simulate(scenario_from_dict(doc), a)
    run_simulate(scenario_from_dict(doc), b)
    for name in ["trajectory_ic00.csv", "reference_ic00.csv", "residual_ic00.csv"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    ma.pop("elapsed_seconds"), mb.pop("elapsed_seconds")
    assert ma == mb


def test_run_simulate_so3_layout(tmp_path):
    eye = np.eye(3).tolist()
    spin = [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]
    doc = mini_doc(
        name="mini_so3",
        manifold={"kind": "rotation_so3", "inertia": [1.0, 2.0, 3.0]},
        field={"kind": "spin_so3", "axis": [1.0, 0.0, 0.0]},
        epsilon=1.0,
        horizon=0.5,
        initial_conditions=[{"q": eye, "v": spin}],
    )
    out = tmp_path / "so3"
    run_simulate(scenario_from_dict(doc), out)
    header, rows = read_csv(out / "trajectory_ic00.csv")
    assert header[:1] + header[1:10] == ["t"] + [f"q{i}" for i in range(1, 10)]
    assert header[10:] == [f"v{i}" for i in range(1, 10)]
    assert np.allclose(rows[0, 1:10], np.eye(3).ravel())
    assert np.allclose(rows[0, 10:], np.asarray(spin).ravel())


def test_run_sweep_rates_and_schema(tmp_path):
    s = scenario_from_dict(mini_doc(horizon=4.0))
    out = tmp_path / "sweep"
    summary = run_sweep(s, [0.5, 1.2, 2.0], out)
    header, rows = read_csv(out / "sweep.csv")
    assert header == ["epsilon", "fitted_rate_norm", "fitted_rate_norm_sq", "sandwich_ok"]
    assert rows.shape == (3, 4)
    for eps, rate_norm, rate_sq, ok in rows:
        assert abs(rate_norm - 1.0 / eps) < 0.01 / eps
        assert rate_sq == pytest.approx(2.0 * rate_norm)
        assert ok == 1.0
    assert summary["sandwich_all_ok"]
    for j in range(3):
        assert (out / f"residual_eps{j}.csv").is_file()


def test_run_sweep_rejects_bad_gains(tmp_path):
    s = scenario_from_dict(mini_doc())
    with pytest.raises(ScenarioError):
        run_sweep(s, [], tmp_path / "x")
    with pytest.raises(ScenarioError):
        run_sweep(s, [0.5, -1.0], tmp_path / "y")


def test_run_diagnose_requires_some_diagnostics(tmp_path):
    s = scenario_from_dict(mini_doc())
    with pytest.raises(ScenarioError):
        run_diagnose(s, tmp_path / "d")


def test_run_diagnose_sandwich(tmp_path):
    s = scenario_from_dict(mini_doc(diagnostics={"sandwich": True}))
    out = tmp_path / "diag"
    report, failed = run_diagnose(s, out)
    assert not failed
    assert report["metric_bounds"]["c"] == 1.0
    assert report["sandwich"][0]["ok"]
    payload = json.loads((out / "diagnostics.json").read_text())
    assert payload == report


# ----------------------------------------------------------------- the CLI


def test_cli_simulate_and_list(tmp_path, capsys):
    path = write_doc(tmp_path, mini_doc(horizon=1.0))
    out = tmp_path / "out"
    assert main(["simulate", str(path), "--out", str(out)]) == EXIT_OK
    assert (out / "manifest.json").is_file()
    captured = capsys.readouterr()
    assert "1 trajectories" in captured.out

    assert main(["list-scenarios"]) == EXIT_OK
    lines = [ln for ln in capsys.readouterr().out.splitlines() if ln.strip()]
    assert {ln.split(":")[0] for ln in lines} == BUNDLED


def test_cli_epsilon_override(tmp_path, capsys):
    path = write_doc(tmp_path, mini_doc(horizon=1.0))
    out = tmp_path / "out"
    assert main(["simulate", str(path), "--out", str(out), "--epsilon", "0.8"]) == EXIT_OK
    assert "epsilon=0.8" in capsys.readouterr().out
    manifest = json.loads((out / "manifest.json").read_text())
    res = next(a for a in manifest["artifacts"] if a["path"] == "residual_ic00.csv")
    assert res["epsilon"] == 0.8
    assert main(["simulate", str(path), "--out", str(out), "--epsilon", "-1"]) == EXIT_USAGE


def test_cli_out_dir_from_environment(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("NAIMSTAB_OUT", str(tmp_path / "envroot"))
    path = write_doc(tmp_path, mini_doc(horizon=1.0))
    assert main(["simulate", str(path)]) == EXIT_OK
    assert (tmp_path / "envroot" / "mini_simulate" / "manifest.json").is_file()


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["simulate", "not_a_bundled_name"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE
    assert main(["--help"]) == EXIT_OK
    capsys.readouterr()


def test_cli_numeric_failure(tmp_path, capsys):
    doc = mini_doc(
        horizon=10.0,
        dt=5.0,
        initial_conditions=[{"q": [1.0, 0.0, 0.0], "v": [0.0, 3.0, 0.0]}],
    )
    path = write_doc(tmp_path, doc)
    code = main(["simulate", str(path), "--out", str(tmp_path / "blow")])
    assert code == EXIT_NUMERIC
    assert "numerical failure" in capsys.readouterr().err


def test_cli_strict_certificate_failure(tmp_path, capsys):
    doc = mini_doc(diagnostics={"bunching": {"taus": [0.0], "k": 1, "n_base": 2}})
    path = write_doc(tmp_path, doc)
    out = tmp_path / "diag"
    assert main(["diagnose", str(path), "--out", str(out)]) == EXIT_OK
    assert "failures" in capsys.readouterr().out
    code = main(["diagnose", str(path), "--out", str(out), "--strict"])
    assert code == EXIT_CERTIFICATE


def test_cli_sweep(tmp_path, capsys):
    path = write_doc(tmp_path, mini_doc(horizon=4.0))
    out = tmp_path / "sw"
    assert main(["sweep", str(path), "--out", str(out), "--epsilons", "0.5,2.0"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "epsilon=0.5" in text and "epsilon=2" in text
    header, rows = read_csv(out / "sweep.csv")
    assert rows.shape[0] == 2
