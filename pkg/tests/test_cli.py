import json
import subprocess
import sys

import pytest

from allocopt.cli import RunConfig, main, round_sig, run
from allocopt.errors import AllocError


def _json(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out else None), out.err


def test_solve_unlimited(capsys):
    code, d, _ = _json(capsys, ["solve", "--nodes", "45", "--budget", "10", "--access-prob", "0.05"])
    assert code == 0
    assert d["case"] == "Case1" and d["n_star"] == 10 and d["p1_n_star"] == 10


def test_solve_constant_memory(capsys):
    code, d, _ = _json(capsys, ["solve", "--nodes", "3", "--budget", "1.4", "--access-prob", "0.1", "--memory", "0.5"])
    assert code == 0
    assert d["case"] == "Case1a" and sorted(d["allocation"]) == [0.4, 0.5, 0.5]


def test_solve_profile_keeps_original_order(capsys, tmp_path):
    prof = tmp_path / "caps.json"
    prof.write_text("[2.0, 0.5, 0.5]")
    code, d, _ = _json(capsys, ["solve", "--nodes", "3", "--budget", "2.2", "--access-prob", "0.1",
                                "--profile", str(prof)])
    assert code == 0
    assert d["caps"] == [2.0, 0.5, 0.5]
    assert all(x <= c + 1e-9 for x, c in zip(d["allocation"], d["caps"]))


def test_eval_single_node(capsys):
    code, d, _ = _json(capsys, ["eval", "--alloc", "[1.0, 0]", "--access-prob", "0.4", "--method", "exact"])
    assert code == 0 and d["value"] == 0.4


def test_eval_mc_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["eval", "--alloc", "[0.5,0.5,0.4]", "--access-prob", "0.3", "--method", "mc", "--trials", "20000"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_solve_output_round_trips_through_eval(capsys, tmp_path):
    out = tmp_path / "solve.json"
    assert main(["solve", "--nodes", "4", "--budget", "1.4", "--access-prob", "0.5", "--memory", "0.5",
                 "--out", str(out)]) == 0
    solved = json.loads(out.read_text())
    code, d, _ = _json(capsys, ["eval", "--alloc", str(out), "--access-prob", "0.5"])
    assert code == 0
    assert d["value"] == pytest.approx(solved["success_prob"], abs=1e-11)


def test_oracle_compare_round_trip(capsys, tmp_path):
    prof = tmp_path / "caps.json"
    prof.write_text("[0.7, 0.9, 1.2]")
    rep = tmp_path / "rep.json"
    assert main(["oracle-compare", "--nodes", "3", "--budget", "2.0", "--access-prob", "0.4",
                 "--profile", str(prof), "--granularity", "8", "--out", str(rep)]) == 0
    first = json.loads(rep.read_text())
    code, again, _ = _json(capsys, ["oracle-compare", "--from", str(rep), "--granularity", "8"])
    assert code == 0
    assert again["oracle_score"] == first["oracle_score"] and again["gap"] == first["gap"]


def test_oracle_compare_without_profile(capsys):
    code, d, _ = _json(capsys, ["oracle-compare", "--nodes", "3", "--budget", "2", "--access-prob", "0.9",
                                "--granularity", "2"])
    assert code == 0 and d["best_score"] == 0.99


def test_scan_fields(capsys):
    code, d, _ = _json(capsys, ["scan", "--nodes", "5", "--p-step", "0.1", "--t-step", "0.5"])
    assert code == 0
    assert list(d) == ["alpha", "beta", "grid_points_total", "grid_points_pT_gt_1", "mismatches"]


def test_curve_csv(capsys):
    assert main(["curve", "--nodes", "4", "--budget", "2", "--access-prob", "0.3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n,p1_objective,p2_objective" and len(lines) == 5


def test_two_command(capsys):
    code, d, _ = _json(capsys, ["two", "--t1", "1.4", "--t2", "0.6", "--p1", "0.8", "--access-prob", "0.1",
                                "--nodes", "4", "--memory", "0.5", "--granularity", "4"])
    assert code == 0
    assert d["allocation_1"] == [0.5, 0.5, 0.4, 0.0]
    assert {"greedy_score", "oracle_score", "gap", "strategy_scores"} <= set(d["report"])


def test_two_from_spec_json(capsys):
    spec = '{"t1": 1.0, "t2": 1.0, "p1": 0.5, "access_prob": 0.6}'
    code, d, _ = _json(capsys, ["two", "--spec", spec, "--nodes", "3", "--memory", "1.0"])
    assert code == 0 and d["p2"] == 0.5


def test_infeasible_exit_code(capsys):
    code, _, err = _json(capsys, ["solve", "--nodes", "3", "--budget", "2", "--access-prob", "0.1", "--memory", "0.5"])
    assert code == 2 and "sum M_i" in err


def test_malformed_profile_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("[0.5,\n 0.5,,]")
    code, _, err = _json(capsys, ["solve", "--nodes", "3", "--budget", "1.4", "--access-prob", "0.1",
                                  "--profile", str(bad)])
    assert code == 2 and "line 2" in err and "column" in err


def test_missing_arguments(capsys):
    code, _, err = _json(capsys, ["eval", "--access-prob", "0.3"])
    assert code == 2 and "--alloc" in err


def test_run_config_rejects_unknown_command():
    with pytest.raises(AllocError):
        RunConfig(command="plot")


def test_internal_error_exit_code(monkeypatch, capsys):
    import allocopt.cli as cli

    def boom(cfg):
        raise RuntimeError("unexpected")
    monkeypatch.setitem(cli.HANDLERS, "curve", boom)
    assert run(RunConfig(command="curve")) == 1
    assert "internal error" in capsys.readouterr().err


def test_round_sig():
    assert round_sig({"a": [1 / 3, float("inf")], "b": 7}) == {"a": [0.333333333333, None], "b": 7}


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "allocopt", "eval", "--alloc", "[1.0]", "--access-prob", "0.25"],
                       capture_output=True, text=True, check=True)
    assert json.loads(r.stdout)["value"] == 0.25
