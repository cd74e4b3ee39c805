import json

import pandas as pd
import pytest
from click.testing import CliRunner

from lib.storage import manifest_path
from pipeline.orchestration.cli import EXIT_INFEASIBLE, EXIT_INPUT, FRONTIER_COLUMNS, main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def stylized_path(runner, tmp_path):
    path = tmp_path / "stylized.json"
    result = runner.invoke(main, ["stylized", "--out", str(path)])
    assert result.exit_code == 0, result.output
    return path


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args])


def test_solve_stylized(runner, tmp_path, stylized_path):
    out = tmp_path / "result.json"
    result = invoke(runner, "solve", "--instance", stylized_path, "--out", out)

    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text())
    assert document["status"] == "optimal"
    assert document["mode"] == "screen"
    assert document["expected_utility"] == pytest.approx(4000.0, abs=1e-6)
    assert document["screening"][:8] == pytest.approx([1.0] * 8)
    assert json.loads(manifest_path(out).read_text())["status"] == "completed"


def test_solve_with_lambda_floor(runner, tmp_path, stylized_path):
    out = tmp_path / "result.json"
    result = invoke(runner, "solve", "--instance", stylized_path, "--lambda", 0, "--out", out)

    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text())
    assert document["expected_utility"] == pytest.approx(4000.0, abs=1e-6)
    assert json.loads(manifest_path(out).read_text())["config"]["lambda"] == 0.0


def test_solve_noscreen(runner, tmp_path, stylized_path):
    out = tmp_path / "baseline.json"
    result = invoke(runner, "solve", "--instance", stylized_path, "--mode", "noscreen", "--out", out)

    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text())
    assert document["expected_utility"] == pytest.approx(3750.0, abs=1e-6)
    assert document["screening"] == [0.0] * 13


def test_solve_infeasible_writes_result_and_exits_3(runner, tmp_path, stylized_path):
    out = tmp_path / "result.json"
    result = invoke(runner, "solve", "--instance", stylized_path, "--lambda", "1e6",
                    "--constraint-mode", "exactly", "--out", out)

    assert result.exit_code == EXIT_INFEASIBLE
    assert json.loads(out.read_text())["status"] == "infeasible"
    assert json.loads(manifest_path(out).read_text())["status"] == "infeasible"


def test_gen_rejects_unknown_regime(runner, tmp_path):
    result = invoke(runner, "gen", "--regime", "bogus", "--out", tmp_path / "x.json")
    assert result.exit_code == 2
    assert not (tmp_path / "x.json").exists()


def test_gen_is_deterministic(runner, tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for path in paths:
        result = invoke(runner, "gen", "--regime", "hi-val-lo-cost", "--seed", 11, "--n", 20, "--bins", 11,
                        "--out", path)
        assert result.exit_code == 0, result.output

    assert paths[0].read_bytes() == paths[1].read_bytes()
    document = json.loads(paths[0].read_text())
    assert len(document["applicants"]) == 20
    assert json.loads(manifest_path(paths[0]).read_text())["seed"] == 11


def test_frontier_single_point(runner, tmp_path, stylized_path):
    out = tmp_path / "frontier.csv"
    result = invoke(runner, "frontier", "--instance", stylized_path, "--lambda-min", 0, "--lambda-max", 0,
                    "--lambda-steps", 1, "--workers", 1, "--out", out)

    assert result.exit_code == 0, result.output
    raw = out.read_bytes()
    assert raw.count(b"\r\n") == 2
    assert raw.decode().split("\r\n")[0] == ",".join(FRONTIER_COLUMNS)
    frame = pd.read_csv(out)
    assert len(frame) == 1
    assert frame.loc[0, "utility_screen"] == pytest.approx(3750.0, abs=1e-5)
    assert frame.loc[0, "utility_noscreen"] == pytest.approx(3750.0, abs=1e-5)
    assert frame.loc[0, "status_screen"] == "optimal"


def test_frontier_rejects_reversed_range(runner, stylized_path):
    result = invoke(runner, "frontier", "--instance", stylized_path, "--lambda-min", 10, "--lambda-max", 0)
    assert result.exit_code == 2


def test_simulate_from_solve_result(runner, tmp_path, stylized_path):
    policy = tmp_path / "result.json"
    assert invoke(runner, "solve", "--instance", stylized_path, "--out", policy).exit_code == 0
    out = tmp_path / "simulation.json"
    result = invoke(runner, "simulate", "--instance", stylized_path, "--policy", policy, "--draws", 1,
                    "--seed", 5, "--workers", 1, "--out", out)

    assert result.exit_code == 0, result.output
    document = json.loads(out.read_text())
    assert document["draws"] == 1
    assert document["seed"] == 5
    assert document["exact"]["expected_utility"] == pytest.approx(4000.0, abs=1e-6)
    manifest = json.loads(manifest_path(out).read_text())
    assert set(manifest["inputs"]) == {"instance", "policy"}


def test_simulate_rejects_policy_of_another_instance(runner, tmp_path, stylized_path):
    policy = tmp_path / "policy.json"
    policy.write_text(json.dumps({"screening": [0.0] * 4, "thresholds": ["+inf", "+inf"],
                                  "boundary_probs": [0.0, 0.0]}))

    result = invoke(runner, "simulate", "--instance", stylized_path, "--policy", policy, "--draws", 1)
    assert result.exit_code == EXIT_INPUT
    assert "4 entries" in result.stderr


def test_invalid_instance_lists_violations(runner, tmp_path, stylized_path):
    document = json.loads(stylized_path.read_text())
    document["applicants"][0]["posterior"]["probs"] = [0.6, 0.6]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(document))

    result = invoke(runner, "solve", "--instance", bad)
    assert result.exit_code == EXIT_INPUT
    assert "applicant 0" in result.stderr
    assert "probs sum" in result.stderr
