import json
import subprocess
import sys

from colnorm import cli, ensemble
from colnorm.reports import read_report


def run(*args):
    return cli.main([str(a) for a in args])


def test_trial_writes_report(tmp_path):
    out = tmp_path / "t.csv"
    assert run("trial", "--d", 200, "--p", 4, "--m", 5, "--trials", 3, "--out", out) == 0
    table = read_report(out)
    assert len(table.rows) == 3 and table.meta["kind"] == "trials"
    assert table.column("seed") == [0, 1, 2]


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 200, "p": 4, "m_list": [3, 5], "trials": 4, "seed_base": 3}))
    out = tmp_path / "s.json"
    assert run("sweep", "--config", cfg, "--trials", 2, "--out", out, "--format", "json") == 0
    table = read_report(out)
    assert table.column("m") == [3, 5] and table.column("trials") == [2, 2]
    assert table.meta["config"]["seed_base"] == 3


def test_refusal_exit_code(tmp_path, capsys):
    assert run("trial", "--d", 24, "--p", 4, "--m", 3) == 2
    assert "refused" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("sweep", "--config", bad) == 2
    assert run("erp-check", "--d", 40, "--p", 2, "--m", 4, "--s", 10) == 2


def test_runtime_error_exit_code(tmp_path, capsys):
    assert run("erp-check", "--matrix", tmp_path / "nope.txt", "--s", 1) == 1
    assert "error" in capsys.readouterr().err


def test_draw_then_erp_check_and_inradius(tmp_path, capsys):
    dump = tmp_path / "g.txt"
    assert run("draw", "--d", 24, "--p", 4, "--m", 3, "--delta", 0.125, "--seed", 0,
               "--out", dump) == 0
    dr = ensemble.read_draw(dump)
    assert dr.gamma.shape == (3, 24) and dr.seed == 0
    assert run("erp-check", "--matrix", dump, "--s", 2) == 0
    text = capsys.readouterr().out
    assert text.startswith("# colnorm-report v1")
    assert "false" in text.splitlines()[4]  # three rows cannot give ERP(2) on 24 columns
    assert run("inradius", "--matrix", dump, "--format", "json") == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["rows"][0][1] >= 0


def test_moments_and_positive_control(tmp_path):
    out = tmp_path / "m.csv"
    assert run("moments", "--d", 200, "--p", 4, "--q-list", "2,4", "--out", out) == 0
    rows = read_report(out).records()
    assert [r["q"] for r in rows] == [2.0, 4.0] and all(r["passed"] for r in rows)
    out = tmp_path / "pc.csv"
    assert run("positive-control", "--d", 8, "--m", 8, "--s", 1, "--trials", 3, "--out", out) == 0
    assert read_report(out).meta["rate"] == 1.0


def test_inradius_over_draws(capsys):
    assert run("inradius", "--d", 200, "--p", 4, "--m", 3, "--trials", 2) == 0
    rows = capsys.readouterr().out.splitlines()[4:]
    assert len(rows) == 2


def test_identical_invocations_give_identical_bytes(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("sweep", "--d", 200, "--p", 4, "--m", 5, "--trials", 4, "--seed", 9,
                   "--out", out) == 0
    assert a.read_bytes() == b.read_bytes()


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "colnorm.cli", "trial", "--d", "24",
                           "--p", "4", "--m", "3"], capture_output=True, text=True)
    assert proc.returncode == 2
    proc = subprocess.run([sys.executable, "-m", "colnorm.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "positive-control" in proc.stdout
