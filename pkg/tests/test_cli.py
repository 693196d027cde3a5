import csv
import json
import subprocess
import sys

import pytest

from unbiased_pde.cli import _levels, main
from unbiased_pde.problems import save_problem

from conftest import zero_drift_config

FAST = ["--gamma", "0.3333333333", "--theta", "1.5", "--n0", "2", "--n1", "1"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_wall(text):
    data = json.loads(text)
    data.pop("total_wall_time", None)
    return data


def test_params_command(capsys):
    code, out, _ = run(capsys, "params", "--q", "5", "--epsilon", "0.001")
    assert code == 0
    data = json.loads(out)
    assert data["gamma"] == pytest.approx(1 / 3 - 12 * 0.001)
    assert data["q"] == 5.0


def test_params_from_problem(capsys):
    code, out, _ = run(capsys, "params", "--problem", "example2")
    assert code == 0 and json.loads(out)["theta"] == pytest.approx(4 / 3)


def test_estimate_to_file_and_csv(capsys, tmp_path):
    out, per = tmp_path / "r.json", tmp_path / "c.csv"
    code, stdout, _ = run(capsys, "estimate", "--copies", "30", "--seed", "3", *FAST,
                          "--out", str(out), "--per-copy-csv", str(per))
    assert code == 0 and stdout == ""
    rep = json.loads(out.read_text())
    assert rep["copies"] == 30 and rep["estimator"] == "W" and rep["seed"] == 3
    lo, hi = rep["ci95"]
    assert lo == pytest.approx(rep["estimate"] - 1.96 * rep["std_error"])
    with open(per) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 30
    assert sum(float(r["value"]) for r in rows) / 30 == pytest.approx(rep["estimate"])


def test_estimate_threads_identical(capsys):
    args = ["estimate", "--copies", "200", "--seed", "42", *FAST]
    _, one, _ = run(capsys, *args, "--threads", "1")
    _, eight, _ = run(capsys, *args, "--threads", "8")
    assert strip_wall(one) == strip_wall(eight)


def test_estimate_z_target(capsys):
    code, out, _ = run(capsys, "estimate", "--copies", "20", "--target", "Z", *FAST)
    assert code == 0 and json.loads(out)["estimator"] == "Z"


def test_numeric_failure_exit_code(capsys, tmp_path):
    cfg = zero_drift_config()
    cfg["sigma"] = {"family": "linear", "scale": 1e200}
    cfg["f"] = {"family": "square"}
    path = tmp_path / "blow.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(capsys, "estimate", "--problem", str(path), "--copies", "4")
    assert code == 3 and "non-finite" in err


@pytest.mark.parametrize("argv", [
    ["estimate", "--problem", "no-such-file.json"],
    ["estimate", "--gamma", "0.3"],
    ["estimate", "--copies", "1"],
    ["params", "--epsilon", "0.5"],
    ["estimate", "--epsilon", "0.001", "--gamma", "0.3", "--theta", "1.5"],
    ["convergence", "--levels", "2,3"],
    ["histogram", "--samples", "absent.csv"],
    ["histogram", "--problem", "ou-example1", "--bins", "1", "--copies", "4", *FAST],
])
def test_config_errors_exit_two(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err.startswith("error:")


def test_empty_samples_exit_two(capsys, tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    code, _, err = run(capsys, "histogram", "--samples", str(path))
    assert code == 2 and "no samples" in err


def test_level_lists():
    assert _levels("2-5") == [2, 3, 4, 5]
    assert _levels("1,3,4") == [1, 3, 4]


def test_convergence_command(capsys, tmp_path):
    path = tmp_path / "z.json"
    path.write_text(json.dumps(zero_drift_config()))
    code, out, _ = run(capsys, "convergence", "--problem", str(path), "--levels", "1-3",
                       "--samples", "1000")
    assert code == 0
    rep = json.loads(out)
    assert rep["delta"]["status"] == "degenerate: exact zeros" and rep["nested"] is None


def test_compare_command(capsys, tmp_path, zero_drift):
    path = tmp_path / "z.json"
    save_problem(zero_drift, path)
    code, out, _ = run(capsys, "compare", "--problem", str(path), "--copies", "20")
    assert code == 0
    rep = json.loads(out)
    assert rep["verdict"] == "no significant bias detected"
    assert set(rep) == {"unbiased", "biased", "disjoint", "biased_higher", "verdict"}


def test_histogram_from_estimate_csv(capsys, tmp_path):
    per = tmp_path / "c.csv"
    run(capsys, "estimate", "--copies", "64", *FAST, "--per-copy-csv", str(per))
    out = tmp_path / "h.csv"
    code, _, _ = run(capsys, "histogram", "--samples", str(per), "--bins", "8", "--out", str(out))
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 8 and sum(int(r["count"]) for r in rows) == 64


def test_histogram_inline(capsys):
    code, out, _ = run(capsys, "histogram", "--problem", "ou-example1", "--copies", "40",
                       "--bins", "5", *FAST)
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "left,right,count" and len(lines) == 6


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "unbiased_pde.cli", "--help"],
                         capture_output=True, text=True, check=True)
    for cmd in ("params", "estimate", "convergence", "compare", "histogram"):
        assert cmd in res.stdout
