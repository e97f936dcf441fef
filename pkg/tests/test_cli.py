import csv
import json

import pytest

from mintime_dkf.cli import dump_json, fmt, main
from mintime_dkf.config import serialize_config
from mintime_dkf.scenarios import small_n5

EXPECTED_CSV = {
    "summary.json",
    "truth.csv",
    "ckf.csv",
    "estimates_a0.csv",
    "estimates_a1.csv",
    "s_elements.csv",
    "errors.csv",
    "detections.csv",
}


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_bundle(tmp_path):
    out = tmp_path / "o"
    assert main(["--scenario", "scenario_small_n5", "--steps", "50", "--out", str(out)]) == 0
    assert {p.name for p in out.iterdir()} == EXPECTED_CSV
    truth = read_csv(out / "truth.csv")
    assert truth[0] == ["step", "time", "x0", "x1"]
    assert len(truth) == 51
    assert truth[4][0] == "3"
    assert float(truth[4][1]) == pytest.approx(3 * 0.015)
    est = read_csv(out / "estimates_a1.csv")
    assert est[0] == ["step", "time", "node", "x0", "x1"]
    assert len(est) == 1 + 50 * 5
    summary = json.loads((out / "summary.json").read_text())
    assert summary["steps"] == 50
    assert summary["acceptance"]["a1_assembled_matches"] is True
    assert summary["resolved"]["arithmetic"] == "exact"
    assert "a0_tolerance" in summary["config"]
    assert "first step after which" in summary["a0_tolerance_definition"]


def test_json_format(tmp_path):
    out = tmp_path / "o"
    assert main(["--scenario", "scenario_small_n5", "--steps", "5", "--format", "json", "--out", str(out)]) == 0
    traces = json.loads((out / "traces.json").read_text())
    assert traces["truth"]["columns"] == ["step", "time", "x0", "x1"]
    assert len(traces["truth"]["rows"]) == 5


def test_zero_steps(tmp_path):
    out = tmp_path / "o"
    assert main(["--scenario", "scenario_small_n5", "--steps", "0", "--out", str(out)]) == 0
    for name in EXPECTED_CSV - {"summary.json"}:
        assert len(read_csv(out / name)) == 1


def test_overrides(tmp_path):
    out = tmp_path / "o"
    args = ["--scenario", "scenario_small_n5", "--steps", "20", "--algorithms", "ckf,a1", "--seed", "5"]
    args += ["--sigma-threshold", "1e-6", "--rho", "0.5", "--out", str(out)]
    assert main(args) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["algorithms"] == ["ckf", "a1"]
    assert summary["config"]["run_seed"] == 5
    assert summary["config"]["sigma_threshold"] == 1e-6
    assert not (out / "estimates_a0.csv").exists()


def test_malformed_scenario_exit_1_no_output(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("process: [1, 2\n")
    out = tmp_path / "o"
    assert main(["--scenario", str(bad), "--out", str(out)]) == 1
    assert not out.exists()
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "extra",
    [["--algorithms", "ckf,zz"], ["--steps", "-3"], ["--bogus"], ["--format", "xml"], ["--steps", "x"]],
)
def test_invalid_flags_exit_1(tmp_path, extra):
    out = tmp_path / "o"
    assert main(["--scenario", "scenario_small_n5", "--out", str(out), *extra]) == 1
    assert not out.exists()


def test_invalid_step_size_exit_1(tmp_path):
    f = tmp_path / "s.yaml"
    f.write_text(serialize_config(small_n5()).replace("step_size: 0.1", "step_size: 0.5"))
    assert main(["--scenario", str(f), "--out", str(tmp_path / "o")]) == 1


def test_numerical_failure_exit_2(tmp_path):
    # a process with a zero-variance direction and a zero prior makes the
    # local covariance singular at the first update
    f = tmp_path / "s.yaml"
    text = serialize_config(small_n5(steps=5)).replace("p0: 10.0", "p0: 0.0")
    f.write_text(text)
    out = tmp_path / "o"
    assert main(["--scenario", str(f), "--out", str(out)]) == 2
    assert not out.exists()


def test_byte_identical_outputs(tmp_path):
    for fmt_name in ("csv", "json"):
        a, b = tmp_path / f"a_{fmt_name}", tmp_path / f"b_{fmt_name}"
        args = ["--scenario", "scenario_noisy_a2", "--steps", "60", "--format", fmt_name]
        assert main([*args, "--out", str(a)]) == 0
        assert main([*args, "--out", str(b)]) == 0
        for f in a.iterdir():
            assert f.read_bytes() == (b / f.name).read_bytes()


def test_float_formatting():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(3) == "3"
    assert fmt(True) == "true"
    assert fmt(float("nan")) == "nan"
    assert dump_json({"b": [1.5, None], "a": float("nan")}) == '{\n  "a": null,\n  "b": [1.5, null]\n}'
