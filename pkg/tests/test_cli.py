import json
import subprocess
import sys

import pytest

from fracplap import UsageError
from fracplap.cli import main, parse_config


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_eig_outputs(tmp_path, capsys):
    assert run(tmp_path, "eig", "--s", "0.5", "--p", "2", "--n", "64", "--h", "const:1") == 0
    d = json.loads((tmp_path / "result.json").read_text())
    assert set(d) == {"lambda", "residual", "iterations", "converged", "values"}
    lines = (tmp_path / "result.csv").read_text().splitlines()
    assert lines[0] == "x,u" and len(lines) == 65
    assert capsys.readouterr().out.startswith("eig: lambda=")


def test_window_violation_exits_1(tmp_path, capsys):
    assert run(tmp_path, "eig", "--s", "1.2") == 1
    assert "s must lie in (0,1)" in capsys.readouterr().err
    assert run(tmp_path, "eig", "--n", "2") == 1
    assert run(tmp_path, "solve", "--s", "0.3", "--q", "9") == 1


def test_unknown_flag_and_command(tmp_path):
    assert run(tmp_path, "eig", "--bogus", "1") == 1
    assert run(tmp_path, "frobnicate") == 1


def test_unconverged_exits_2(tmp_path):
    assert run(tmp_path, "eig", "--p", "3", "--n", "64", "--max-iter", "1") == 2
    assert json.loads((tmp_path / "result.json").read_text())["converged"] is False


def test_check_weight(tmp_path, capsys):
    code = run(tmp_path, "check-weight", "--class", "Bq", "--beta", "0.9", "--q", "2", "--p", "2",
               "--s", "0.5", "--N", "1")
    assert code == 0
    d = json.loads((tmp_path / "result.json").read_text())
    assert d["a"] == pytest.approx(1.0) and d["r"] == pytest.approx(2.25)
    assert "a=1 r=2.25" in capsys.readouterr().out
    assert run(tmp_path, "check-weight", "--beta", "1.2", "--q", "2") == 2
    assert json.loads((tmp_path / "result.json").read_text())["refused"] is True


def test_multi_array(tmp_path):
    assert run(tmp_path, "multi", "--q", "4", "--n", "64", "--count", "2") == 0
    d = json.loads((tmp_path / "result.json").read_text())
    assert isinstance(d, list) and len(d) == 2
    assert d[0]["phi"] < d[1]["phi"]
    assert (tmp_path / "result.csv").read_text().splitlines()[0] == "x,u1,u2"


def test_solve_both_regimes(tmp_path):
    assert run(tmp_path, "solve", "--q", "1.5", "--n", "64") == 0
    assert json.loads((tmp_path / "result.json").read_text())["method"] == "minimize"
    assert run(tmp_path, "solve", "--q", "4", "--n", "64") == 0
    assert json.loads((tmp_path / "result.json").read_text())["method"] == "mountain-pass"


def test_hardy_csv(tmp_path):
    assert run(tmp_path, "hardy", "--s", "0.6", "--n", "64") == 0
    lines = (tmp_path / "result.csv").read_text().splitlines()
    assert lines[0] == "index,ratio" and len(lines) == 51


def test_moser_and_scaling(tmp_path):
    assert run(tmp_path, "moser", "--n", "64") == 0
    assert json.loads((tmp_path / "result.json").read_text())["issued"] is True
    assert run(tmp_path, "scaling", "--p", "3", "--n", "64", "--t", "8") == 0


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep point\ns = 0.3\np = 2.5\nn = 40\nclass = Bq\n")
    rc = parse_config(["eig", "--config", str(cfg), "--n", "50"])
    assert (rc.s, rc.p, rc.n, rc.cls) == (0.3, 2.5, 50, "Bq")
    bad = tmp_path / "bad.cfg"
    bad.write_text("s = 0.3\nwidth = 2\n")
    with pytest.raises(UsageError, match="unknown key"):
        parse_config(["eig", "--config", str(bad)])
    bad.write_text("s 0.3\n")
    with pytest.raises(UsageError):
        parse_config(["eig", "--config", str(bad)])
    with pytest.raises(UsageError):
        parse_config(["eig", "--config", str(tmp_path / "missing.cfg")])


def test_seed_environment(monkeypatch):
    monkeypatch.setenv("FRACP_SEED", "17")
    assert parse_config(["eig", "--seed", "3"]).seed == 17
    monkeypatch.setenv("FRACP_SEED", "x")
    with pytest.raises(UsageError):
        parse_config(["eig"])


def test_module_entry_point_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cmd = [sys.executable, "-m", "fracplap.cli", "eig", "--p", "2.5", "--n", "64",
               "--init", "random", "--seed", "5", "--out", str(out)]
        assert subprocess.run(cmd, capture_output=True).returncode == 0
        outs.append(((out / "result.json").read_bytes(), (out / "result.csv").read_bytes()))
    assert outs[0] == outs[1]
