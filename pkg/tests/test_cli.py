import json
import subprocess
import sys

import pytest

from fsp_plunge.cli import main


def run(*argv):
    assert main([str(a) for a in argv]) == 0


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    d = root / "data"
    run("synth", "--out", d)
    train = sorted(str(p) for p in d.glob("train*.csv"))
    run("fit", "--runs", *train, "--out", root / "fit")
    run("control", "--model", root / "fit/model.json", "--setpoint", 775, "--regime", "fast",
        "--runs", *train, "--out", root / "ctl")
    run("simulate", "--profile", root / "ctl/profile.json", "--plant", d / "plant.json", "--out", root / "truth.csv")
    run("simulate", "--profile", root / "ctl/profile.json", "--model", root / "fit/model.json",
        "--out", root / "model.csv")
    run("eval", "--trajectory", root / "truth.csv", "--reference", root / "model.csv",
        "--profile", root / "ctl/profile.json", "--out", root / "metrics.json")
    return root


def test_synth_outputs(pipeline):
    names = sorted(p.name for p in (pipeline / "data").iterdir())
    assert names == ["heldout.csv", "plant.json"] + [f"train{i}.csv" for i in range(7)]
    plant = json.loads((pipeline / "data/plant.json").read_text())
    assert plant["kind"] == "synthetic" and set(plant["provenance"]) == {"config_hash", "seed"}


def test_fit_outputs(pipeline):
    report = json.loads((pipeline / "fit/fit_report.json").read_text())
    hist = (pipeline / "fit/loss_history.csv").read_text().splitlines()
    assert hist[0].startswith("# config_hash=") and hist[1] == "iter,loss"
    assert float(hist[-1].split(",")[1]) == report["final_loss"]
    assert "wall_time_s" not in report


def test_profile_document(pipeline):
    doc = json.loads((pipeline / "ctl/profile.json").read_text())
    for key in ("setpoint_C", "regime", "phi_kW", "t_end_s", "predicted_end_temp_C", "predicted_max_T_C",
                "predicted_handoff_s"):
        assert key in doc
    assert doc["phi_kW"][0] == 1.0 and doc["regime"] == "fast" and doc["weights"][2] == 1e6
    rows = (pipeline / "ctl/profile.csv").read_text().splitlines()
    assert rows[1] == "time_s,power_kW" and len(rows) == 2 + 1201


def test_eval_matches_embedded_prediction(pipeline, tmp_path):
    run("eval", "--trajectory", pipeline / "model.csv", "--profile", pipeline / "ctl/profile.json",
        "--out", tmp_path / "m.json")
    m = json.loads((tmp_path / "m.json").read_text())["trajectory"]
    doc = json.loads((pipeline / "ctl/profile.json").read_text())
    assert m["end_temp_C"] == doc["predicted_end_temp_C"]
    assert m["max_T_C"] == doc["predicted_max_T_C"]
    assert m["handoff_s"] == doc["predicted_handoff_s"]


def test_end_to_end_within_1_percent_default_weights(pipeline):
    m = json.loads((pipeline / "metrics.json").read_text())["trajectory"]
    assert abs(m["end_temp_C"] - 775.0) <= 0.01 * 775.0, m["end_temp_C"]


def test_slow_regime_recorded(pipeline, tmp_path):
    run("control", "--model", pipeline / "fit/model.json", "--setpoint", 775, "--regime", "slow",
        "--out", tmp_path)
    doc = json.loads((tmp_path / "profile.json").read_text())
    assert doc["regime"] == "slow" and doc["weights"][2] == 1e7


def test_custom_regime_requires_weights(pipeline, tmp_path, capsys):
    assert main(["control", "--model", str(pipeline / "fit/model.json"), "--regime", "custom",
                 "--out", str(tmp_path)]) == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigurationError" and err["command"] == "control"


def test_plot(pipeline, tmp_path):
    run("plot", "--trajectory", pipeline / "model.csv", "--label", "model", "--trajectory", pipeline / "truth.csv",
        "--label", "plant", "--profile", pipeline / "ctl/profile.json", "--out", tmp_path / "p.svg")
    svg = (tmp_path / "p.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 4 and "setpoint 775" in svg


def test_quick_commands_are_byte_deterministic(pipeline, tmp_path):
    train = sorted(str(p) for p in (pipeline / "data").glob("train*.csv"))[:2]
    for out in ("a", "b"):
        run("synth", "--out", tmp_path / out / "data", "--seed", 5)
        run("fit", "--runs", *train, "--adam-epochs", 5, "--lbfgs-max-iters", 5, "--out", tmp_path / out / "fit")
    for name in ("data/plant.json", "data/train3.csv", "fit/model.json", "fit/fit_report.json",
                 "fit/loss_history.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_bad_run_file_single_line_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("time_s,temp_C,power_kW\n0,1,1\n1,oops,1\n")
    proc = subprocess.run([sys.executable, "-m", "fsp_plunge", "fit", "--runs", str(bad), "--out",
                           str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode != 0
    lines = proc.stderr.strip().splitlines()
    assert len(lines) == 1
    err = json.loads(lines[0])
    assert err["error"] == "RunFileError" and ":3:" in err["message"]
    assert not (tmp_path / "o").exists()
