import json

from elldet import IdentityId, harness
from elldet.cli import main

from test_harness import wrong_syl


def test_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert any(line.startswith("thm21 ") for line in out)
    assert len(out) == 16


def test_run_and_replay(tmp_path, capsys):
    report = tmp_path / "r.jsonl"
    code = main(["run", "--identities", "thm21,rcg", "--grid", "1x1,2x1", "--draws", "2",
                 "--seed", "42", "--tol", "1e-8", "--format", "json", "-o", str(report)])
    assert code == 0
    lines = report.read_text().splitlines()
    assert len(lines) == 1 + 8 + 1
    capsys.readouterr()
    assert main(["replay", "--report", str(report), "--case", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["identical_residual"] and out["case"] == 3


def test_run_from_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"identities": ["syl_bin"], "grid": ["2x3"],
                               "draws_per_cell": 3, "output_format": "csv"}))
    assert main(["run", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "identity,r1,r2,draw,residual,passed" and len(out) == 4


def test_failures_give_exit_code_one(capsys, monkeypatch):
    monkeypatch.setitem(harness.CHECKS, IdentityId.SYL_BIN, wrong_syl)
    assert main(["run", "--identities", "syl_bin", "--grid", "2x2", "--draws", "1",
                 "--format", "text"]) == 1
    assert capsys.readouterr().out.startswith("FAIL syl_bin")


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "tolerance": "tiny"\n}')
    assert main(["run", "--config", str(cfg)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["run", "--grid", "3by3"]) == 2
    assert main(["replay", "--report", str(tmp_path / "missing.jsonl"), "--case", "0"]) == 2
