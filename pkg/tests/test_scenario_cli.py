import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from invariant_sta import bundled_scenario
from invariant_sta.algebra import builtin_algebra, dump_rep
from invariant_sta.cli import main
from invariant_sta.designer import LinearRamp, design
from invariant_sta.errors import ConstraintConflictError, PipelineNotAvailableError, ScenarioError
from invariant_sta.scenario import (
    RunReport,
    exit_code,
    parse_scenario,
    read_trajectory_csv,
    run_algebra_check,
    run_design,
    run_min_time,
    spec_from_dict,
    spec_to_dict,
)


def _fig1_dict():
    return json.loads(bundled_scenario("fig1").read_text())


def _write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def test_parse_bundled(specs):
    s1 = specs["fig1"]
    assert s1.algebra == "su2" and s1.t_f == 200 and s1.forbidden == {2}
    assert s1.imposed == {1: LinearRamp(0.0, 0.4)}
    s3 = specs["fig3"]
    assert s3.algebra == "u3s3" and s3.t_f == 80 and s3.forbidden == {2, 3}
    assert s3.imposed == {4: LinearRamp(1.0, 0.0)}


def test_defaults_applied():
    data = _fig1_dict()
    for key in ("c1", "c2", "grid_points", "ansatz_degree", "name"):
        data.pop(key)
    spec = spec_from_dict(data, default_name="x")
    assert (spec.c1, spec.c2, spec.grid_points, spec.ansatz_degree, spec.name) == ("auto", 0.0, 2001, 5, "x")


def test_dict_round_trip(specs):
    for spec in specs.values():
        assert spec_from_dict(spec_to_dict(spec)) == spec


@pytest.mark.parametrize("mutate, error", [
    (lambda d: d.update(forbidden=[2], imposed={"2": {"type": "linear", "from": 0, "to": 0}}),
     ConstraintConflictError),
    (lambda d: d.update(colour="red"), ScenarioError),
    (lambda d: d.update(t_f="200"), ScenarioError),
    (lambda d: d.update(h_initial=[0, 1]), ScenarioError),
    (lambda d: d.pop("t_f"), ScenarioError),
    (lambda d: d.update(imposed={"1": {"type": "cubic"}}), ScenarioError),
    (lambda d: d.update(imposed={"9": {"type": "linear", "from": 0, "to": 0.4}}), ScenarioError),
    (lambda d: d.update(forbidden=[1], imposed={"3": {"type": "linear", "from": 1, "to": 0}}),
     PipelineNotAvailableError),
    (lambda d: d.update(algebra="so3"), ScenarioError),
    (lambda d: d.update(c1=-1), ScenarioError),
])
def test_schema_errors(tmp_path, mutate, error):
    data = _fig1_dict()
    mutate(data)
    with pytest.raises(error):
        parse_scenario(_write(tmp_path, data))


def test_rep_file_algebra_has_no_pipeline(tmp_path):
    _write(tmp_path, dump_rep(builtin_algebra("su2")[1]), "mine.json")
    data = _fig1_dict()
    data["algebra"] = {"rep_file": "mine.json"}
    with pytest.raises(PipelineNotAvailableError):
        parse_scenario(_write(tmp_path, data))


def test_run_design_outputs(tmp_path, specs):
    report = run_design(specs["fig1"], tmp_path)
    assert exit_code(report) == 0 and report.verified
    t, h, f = read_trajectory_csv(tmp_path / "trajectory.csv")
    assert h[0, 2] == 1.0 and h[-1, 2] == 0.0
    s = t / 200
    assert np.allclose(f[:, 2], 1 - 10 * s**3 + 15 * s**4 - 6 * s**5, atol=1e-12)
    header = (tmp_path / "verify.csv").read_text().splitlines()[0]
    assert header == "t,lambda_1,lambda_2,pop_1,pop_2,invariant_residual_local"
    saved = json.loads((tmp_path / "report.json").read_text())
    assert saved["fidelities"] == report.fidelities
    assert saved["c1"] == 1.0


def test_trajectory_csv_round_trip_is_exact(tmp_path, specs):
    sol = design(specs["fig3"])
    run_design(specs["fig3"], tmp_path)
    t, h, f = read_trajectory_csv(tmp_path / "trajectory.csv")
    assert np.array_equal(t, sol.times)
    assert np.array_equal(h, sol.h_traj)
    assert np.array_equal(f, sol.f_traj)


def test_fig3_report_fidelities(tmp_path, specs):
    report = run_design(specs["fig3"], tmp_path)
    assert all(f >= 1 - 1e-6 for f in report.fidelities)


def test_infeasible_run(tmp_path, specs):
    report = run_design(specs["fig1"].with_final_time(100), tmp_path)
    assert exit_code(report) == 2
    saved = json.loads((tmp_path / "report.json").read_text())
    assert 0 < saved["first_violation_time"] < 100
    assert not (tmp_path / "trajectory.csv").exists()


def test_verification_failure_exit_code(tmp_path, specs):
    # feasible on a coarse grid, but the sampled control is too rough for 1e-6
    report = run_design(replace(specs["fig3_reverse"], grid_points=101), tmp_path)
    assert report.feasible and report.verified is False
    assert exit_code(report) == 3


def test_exit_code_depends_only_on_fields():
    assert exit_code(RunReport("a", feasible=False, verified=True)) == 2
    assert exit_code(RunReport("a", feasible=True, verified=False)) == 3
    assert exit_code(RunReport("a", feasible=True, verified=True)) == 0
    assert exit_code(RunReport("a", feasible=True)) == 0


def test_run_min_time(specs):
    assert 160 <= run_min_time(specs["fig1"], (50, 400)).min_time <= 170
    whole = run_min_time(specs["fig1"], (400, 500))
    assert whole.min_time == 400 and whole.notes
    assert run_min_time(specs["fig3"], (1, 80)).min_time < 80
    none = run_min_time(specs["fig1"], (10, 50))
    assert not none.feasible and exit_code(none) == 2


def test_algebra_check_text():
    out = run_algebra_check("u3s3")
    assert "center: dimension 1" in out
    assert "-0.707107 T_3 +0.707107 T_4" in out
    assert "center: trivial" in run_algebra_check("su2")


def test_cli_design_and_usage(tmp_path, capsys):
    assert main(["design", str(bundled_scenario("fig2")), "-o", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "report.json").exists()
    assert main(["design", str(tmp_path / "missing.json")]) == 1
    assert main(["min-time", str(bundled_scenario("fig1")), "--bracket", "oops"]) == 1
    assert main([]) == 1


def test_cli_non_hermitian_file(tmp_path, capsys):
    rep = dump_rep(builtin_algebra("su2")[1])
    rep["generators"][2][0][1] = [0.5, 0.0]
    p = _write(tmp_path, rep, "bad.json")
    assert main(["algebra-check", str(p)]) == 1
    assert "T_3" in capsys.readouterr().err


def test_cli_batch(tmp_path, capsys):
    fig1 = _fig1_dict()
    fig1["t_f"] = 100
    fig1["name"] = "too_fast"
    _write(tmp_path, fig1, "too_fast.json")
    batch = _write(tmp_path, [str(bundled_scenario("fig1")), "too_fast.json"], "batch.json")
    code = main(["batch", str(batch), "--jobs", "2", "-o", str(tmp_path / "out")])
    assert code == 2
    assert (tmp_path / "out" / "fig1" / "trajectory.csv").exists()
    assert (tmp_path / "out" / "too_fast" / "report.json").exists()


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "invariant_sta", "algebra-check", "su2"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "Jacobi residual" in r.stdout
