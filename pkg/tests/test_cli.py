import csv
import json

import pytest

from sampid.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from sampid.config import PipelineConfig

TINY = {
    "data": {"stage1_seconds": 6.0, "validation_seconds": 4.0},
    "cmaes": {"stage1": {"population": 6, "iterations": 2}, "stage2": {"population": 6, "iterations": 2},
              "plan": {"population": 4, "iterations": 1}},
    "segmentation": {"h_min": 0.2, "h_max": 1.0},
    "excitation": {"n_segments": 1, "init_samples": 1, "rounds": 1},
}


@pytest.fixture
def config(tmp_path):
    return str(PipelineConfig.from_dict(TINY).save(tmp_path / "config.json"))


@pytest.fixture(scope="module")
def full_run_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = PipelineConfig.from_dict(TINY).save(d / "in.json")
    assert main(["full-run", "--config", str(cfg), "--out", str(d / "out")]) == EXIT_OK
    return d / "out"


def test_full_run_writes_report(full_run_dir):
    out = full_run_dir
    for name in ("config.json", "theta_stage1.json", "theta_active.json", "plan.json", "metrics.json",
                 "metrics.csv", "cost_curves.csv", "summary.json", "stage1.jsonl", "validation.jsonl"):
        assert (out / name).exists(), name
    for svg in ("cost_curves.svg", "trajectory_overlay.svg", "plan_objective.svg"):
        assert (out / svg).read_text().lstrip().startswith(("<?xml", "<svg"))
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["metrics"]["theta0"]["normalized"]["j_rpos"] == 1.0
    rows = list(csv.DictReader((out / "metrics.csv").open()))
    assert [r["estimate"] for r in rows] == ["theta0", "stage1", "active", "truth"]
    # the snapshot re-creates the run configuration
    assert PipelineConfig.load(out / "config.json").to_dict() == PipelineConfig.from_dict(TINY).to_dict()


def test_stepwise_subcommands(tmp_path, config, full_run_dir):
    data = tmp_path / "data"
    assert main(["gen-data", "--config", config, "--out", str(data)]) == EXIT_OK
    assert main(["identify", "--config", config, "--data", str(data), "--out", str(tmp_path / "s1")]) == EXIT_OK
    theta1 = tmp_path / "s1" / "theta_stage1.json"
    assert (tmp_path / "s1" / "cost_curves.svg").exists()
    assert main(["excite", "--config", config, "--theta", str(theta1), "--out", str(data)]) == EXIT_OK
    assert (data / "plan.json").exists() and (data / "stage2.jsonl").exists()
    assert main(["refine", "--config", config, "--theta", str(theta1), "--data", str(data),
                 "--out", str(tmp_path / "s2")]) == EXIT_OK
    out = tmp_path / "ev"
    assert main(["evaluate", "--theta", str(tmp_path / "s2" / "theta_active.json"), "--data", str(data),
                 "--baseline", str(theta1), "--config", config, "--out", str(out)]) == EXIT_OK
    m = json.loads((out / "metrics.json").read_text())
    assert m["baseline"] == "theta_stage1" and m["j_rpos"] >= 0
    assert (out / "metrics.csv").exists()


def test_configuration_errors_exit_2(tmp_path, config):
    assert main(["identify", "--config", str(tmp_path / "nope.json"), "--data", str(tmp_path),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["identify", "--config", config, "--data", str(tmp_path / "empty"),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["gen-data", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_numerical_failure_exit_3(tmp_path, full_run_dir):
    th = json.loads((full_run_dir / "theta_stage1.json").read_text())
    th["values"][0] = -30.0  # vanishing mass blows up every clip
    p = tmp_path / "theta.json"
    p.write_text(json.dumps(th))
    assert main(["evaluate", "--theta", str(p), "--data", str(full_run_dir)]) == EXIT_NUMERIC


def test_parser_rejects_unknown_kind(capsys):
    with pytest.raises(SystemExit) as info:
        main(["ablate", "--kind", "friction", "--config", "c.json"])
    assert info.value.code == 2
