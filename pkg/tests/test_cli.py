import json
import subprocess
import sys

import pytest

from torusrgg import cli
from torusrgg.errors import InternalConsistencyError


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_expect_example(capsys):
    code, out, _ = run(capsys, "expect", "--pattern", "C3", "--n", "100", "--d", "1000", "--q", "inf", "--p", "0.5", "--seed", "1")
    assert code == 0
    assert "seed=1" in out
    assert "signed" in out.lower() and "asymptotic" in out.lower()


def test_expect_finite_q_is_validation_error(capsys):
    code, _, err = run(capsys, "expect", "--pattern", "C3", "--q", "2")
    assert code == 1 and "error" in err


def test_mc_verify_example(tmp_path, capsys):
    out_path = tmp_path / "mc.csv"
    code, out, _ = run(capsys, "mc-verify", "--pattern", "C4", "--n", "200", "--d", "30", "--p", "0.5",
                       "--reps", "300", "--seed", "7", "--out", str(out_path))
    assert code == 0 and "seed=7" in out
    text = out_path.read_text()
    assert text.startswith("# tool: torusrgg")
    assert '"seed": 7' in text


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["expect", "--nope", "1"],
    ["power", "--p", "1.5"],
    ["sample", "--n", "0"],
    [],
])
def test_usage_errors_exit_1(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_help_exits_0(capsys):
    assert run(capsys, "--help")[0] == 0


def test_internal_failure_exits_2(monkeypatch, capsys):
    def boom(args):
        raise InternalConsistencyError("broken invariant")

    monkeypatch.setattr(cli, "cmd_selftest", boom)
    code, _, err = run(capsys, "selftest")
    assert code == 2 and "broken invariant" in err


def test_seed_printed_when_omitted(capsys):
    code, out, _ = run(capsys, "sample", "--model", "er", "--n", "10")
    assert code == 0
    seed = int(out.strip().split("seed=")[-1])
    code2, out2, _ = run(capsys, "sample", "--model", "er", "--n", "10", "--seed", str(seed))
    assert out2 == out


@pytest.mark.parametrize("argv", [
    ["sample", "--model", "rgg", "--n", "30", "--d", "4"],
    ["sample", "--model", "complement1d", "--n", "30", "--lam", "0.1"],
    ["sample", "--model", "hypercube", "--n", "30", "--d", "5", "--sigma", "threshold:1"],
    ["signed-expect", "--pattern", "C4", "--d", "30"],
    ["signed-expect", "--pattern", "C4", "--d", "6", "--q", "2", "--tuples", "20000"],
    ["detect", "--n", "120", "--d", "8", "--stat", "C4"],
    ["estimate-dim", "--n", "400", "--value", "1000"],
    ["phase-diagram", "--model", "lq"],
    ["bounds", "--kind", "kl", "--n", "20", "--d", "100000"],
    ["bounds", "--kind", "moment", "--d", "100"],
    ["bounds", "--kind", "gamma", "--d", "6", "--outer", "200", "--inner", "100"],
    ["bounds", "--kind", "small-ball", "--d", "10", "--q", "2", "--a", "1", "--b", "2", "--samples", "10000"],
    ["bounds", "--kind", "influence", "--d", "5", "--sigma", "threshold:1"],
    ["bounds", "--kind", "hypercube-tv", "--n", "10", "--d", "6", "--sigma", "dictator:0"],
    ["advantage", "--n", "30", "--d", "40", "--D", "4", "--vmax", "4"],
])
def test_subcommands_run(tmp_path, capsys, argv):
    code, out, err = run(capsys, *argv, "--seed", "3", "--out", str(tmp_path / "o"), "--json")
    assert code == 0, err
    assert "seed=3" in out
    assert (tmp_path / "o").exists()


def test_bounds_json_output(tmp_path, capsys):
    path = tmp_path / "b.json"
    assert run(capsys, "bounds", "--kind", "influence", "--d", "5", "--sigma", "threshold:1", "--seed", "1", "--out", str(path))[0] == 0
    doc = json.loads(path.read_text())
    assert doc["meta"]["command"] == "bounds"
    assert doc["result"]["influences"] == [3 / 32] * 5


def test_detect_on_graph_file(tmp_path, capsys):
    g = tmp_path / "g.txt"
    assert run(capsys, "sample", "--model", "er", "--n", "60", "--seed", "2", "--out", str(g))[0] == 0
    code, out, _ = run(capsys, "detect", "--graph", str(g), "--n", "60", "--d", "10", "--seed", "2")
    assert code == 0 and ("H0" in out or "H1" in out)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# power run\nn = 40\nd-grid = 4, 8\nreps = 12\nseed = 11\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, "power", "--config", str(cfg), "--out", str(a))[0] == 0
    assert run(capsys, "power", "--n", "40", "--d-grid", "4,8", "--reps", "12", "--seed", "11", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    assert run(capsys, "power", "--config", str(cfg), "--reps", "13", "--out", str(c))[0] == 0
    assert c.read_bytes() != a.read_bytes()
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert run(capsys, "power", "--config", str(bad))[0] == 1


def test_threads_do_not_change_output(tmp_path, capsys):
    outs = []
    for t in ("1", "4"):
        path = tmp_path / f"p{t}.csv"
        assert run(capsys, "power", "--n", "50", "--d-grid", "4,8", "--reps", "16", "--seed", "5", "--threads", t, "--out", str(path))[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_selftest_subcommand(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0 and "FAIL" not in out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "torusrgg", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "torusrgg" in res.stdout
