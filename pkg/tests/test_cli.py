import json
import subprocess
import sys

import pytest

from alip.cli import main


@pytest.fixture
def household(tmp_path):
    assert main(["simulate", "--preset", "household", "--seed", "3", "--length", "600",
                 "--out", str(tmp_path / "d.csv"), "--model-out", str(tmp_path / "m.yaml")]) == 0
    return tmp_path


def run_cli(tmp, tag, *extra):
    rc = main(["run", "--model", str(tmp / "m.yaml"), "--data", str(tmp / "d.csv"), "--block-size", "100",
               "--report", str(tmp / f"r{tag}.json"), "--plot-data", str(tmp / f"p{tag}.csv"), *extra])
    assert rc == 0
    return (tmp / f"r{tag}.json").read_bytes(), (tmp / f"p{tag}.csv").read_bytes()


def test_run_is_byte_identical_across_runs_and_threads(household, capsys):
    a = run_cli(household, "a")
    b = run_cli(household, "b")
    c = run_cli(household, "c", "--threads", "3")
    assert a == b == c
    out = capsys.readouterr().out
    assert "ms/sample" in out and "ACC" in out


def test_report_contents(household):
    run_cli(household, "a")
    rep = json.loads((household / "ra.json").read_text())
    assert rep["label"] == "ALIP"
    assert set(rep["accuracy"]["AC"]) == {"CDE", "FRG", "HPE", "B1E"}
    assert rep["config"]["lag"] == 4


def test_baseline_and_stage_selection(household):
    assert main(["baseline", "--model", str(household / "m.yaml"), "--data", str(household / "d.csv"),
                 "--report", str(household / "ip.json")]) == 0
    assert json.loads((household / "ip.json").read_text())["label"] == "IP"
    assert main(["run", "--model", str(household / "m.yaml"), "--data", str(household / "d.csv"),
                 "--stages", "constraints,median", "--report", str(household / "cm.json")]) == 0
    assert json.loads((household / "cm.json").read_text())["label"] == "IP+constraints+median"


def test_score_reproduces_run_accuracy(household, capsys):
    run_cli(household, "a", "--estimates", str(household / "e.csv"))
    capsys.readouterr()
    assert main(["score", "--data", str(household / "d.csv"), "--estimates", str(household / "e.csv"),
                 "--report", str(household / "s.json")]) == 0
    scored = json.loads((household / "s.json").read_text())
    ran = json.loads((household / "ra.json").read_text())
    assert scored["ACC"] == ran["accuracy"]["ACC"]


def test_ablate_on_preset(tmp_path, capsys):
    assert main(["ablate", "--preset", "collision", "--seed", "1", "--length", "800",
                 "--report", str(tmp_path / "a.json"), "--plot-data", str(tmp_path / "a.csv"), "--block-size", "200"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in out] == [
        "IP", "IP+constraints", "IP+std_correction", "IP+median", "IP+lp_refine", "ALIP"]
    doc = json.loads((tmp_path / "a.json").read_text())
    assert len(doc["runs"]) == 6
    assert (tmp_path / "a.csv").read_text().count("\n") == 1 + 1 + 4


def test_downsampling_flags(household, capsys):
    assert main(["run", "--model", str(household / "m.yaml"), "--data", str(household / "d.csv"),
                 "--factor", "20", "--mode", "mean"]) == 0
    assert "ALIP: 30 samples" in capsys.readouterr().out


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["run", "--data", str(tmp_path / "missing.csv")]) == 2
    assert "needs --model" in capsys.readouterr().err
    (tmp_path / "m.yaml").write_text("appliances:\n  - id: A\n    states: [{label: on, rating: -1}]\n")
    (tmp_path / "d.csv").write_text("timestamp,aggregate\n0,1\n")
    assert main(["run", "--model", str(tmp_path / "m.yaml"), "--data", str(tmp_path / "d.csv")]) == 2
    assert "m.yaml:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["run", "--stages", "bogus"])


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "alip.cli", "simulate", "--preset", "sanity", "--length", "50", "--out", str(tmp_path / "s.csv")],
        capture_output=True, text=True, check=True,
    )
    assert "50 samples" in out.stdout
    assert (tmp_path / "s.csv").read_text().startswith("# schema=alip-readings/1\n")
