import io
import json

import numpy as np
import pytest

from elldet import IdentityId, IdentityReport, TrackedValue, build_B, det_lu, harness
from elldet.identities import rhs_syl_bin
from elldet.harness import (
    GENERICITY_FLOOR, ConfigError, EllipticFParams, EllipticGParams, RunConfig,
    SylvesterBinomialParams, parse_grid, parse_identities, read_report, replay, run_check, run_suite,
    sample_params, task_rng)


def small(**kw):
    base = dict(identities=(IdentityId.THM21, IdentityId.RCG), grid=((1, 1), (2, 1)),
                draws_per_cell=2, seed=5)
    return RunConfig(**{**base, **kw})


def test_parse_grid():
    assert parse_grid("2x2, 2x3") == ((2, 2), (2, 3))
    assert parse_grid([[1, 0], "0x2"]) == ((1, 0), (0, 2))
    cells = parse_grid("n<=8")
    assert len(cells) == 44 and max(a + b for a, b in cells) == 8 and (0, 1) in cells
    with pytest.raises(ValueError):
        parse_grid("2y3")


def test_parse_identities():
    assert parse_identities("thm21,rcg") == (IdentityId.THM21, IdentityId.RCG)
    everything = parse_identities("all")
    assert IdentityId.REFLECT not in everything and len(everything) == 15
    with pytest.raises(ValueError):
        parse_identities("thm99")


def test_config_round_trip():
    cfg = small(tolerance=1e-9, output_format="csv")
    assert RunConfig.from_json(json.dumps(cfg.to_dict())) == cfg


@pytest.mark.parametrize("text,needle", [
    ('{\n  "seed": 1,\n  "tolerance": -1\n}', "line 3: field 'tolerance'"),
    ('{\n  "draws_per_cell": 2.5\n}', "line 2: field 'draws_per_cell'"),
    ('{\n  "seed": 1,\n  "colour": "red"\n}', "line 3: unknown field 'colour'"),
    ('{\n  "grid": "2x"\n}', "line 2: field 'grid'"),
    ('{\n  "identities": ["thm21", "nope"]\n}', "line 2: field 'identities'"),
    ('{\n  "seed": 1,\n', "line 3"),
    ('[1, 2]', "top level"),
])
def test_config_errors_name_field_and_line(text, needle):
    with pytest.raises(ConfigError, match=needle.replace("(", r"\(")):
        RunConfig.from_json(text)


def test_task_streams_are_independent_and_stable():
    a = task_rng(1, IdentityId.THM21, 2, 2, 0).random(3)
    assert np.array_equal(a, task_rng(1, IdentityId.THM21, 2, 2, 0).random(3))
    for other in [(2, IdentityId.THM21, 2, 2, 0), (1, IdentityId.RCG, 2, 2, 0),
                  (1, IdentityId.THM21, 2, 3, 0), (1, IdentityId.THM21, 2, 2, 1)]:
        assert not np.array_equal(a, task_rng(*other).random(3))


def test_sample_params_examples():
    rng = task_rng(0, IdentityId.SYL_BIN, 2, 3, 0)
    p = sample_params(IdentityId.SYL_BIN, 2, 3, rng)
    assert isinstance(p, SylvesterBinomialParams) and (p.r1, p.r2) == (2, 3)
    p = sample_params(IdentityId.THM21, 2, 2, task_rng(0, IdentityId.THM21, 2, 2, 0), 0.3)
    assert isinstance(p, EllipticFParams) and abs(p.bn.p) <= 0.3
    p = sample_params(IdentityId.THM41, 2, 2, task_rng(0, IdentityId.THM41, 2, 2, 0))
    assert isinstance(p, EllipticGParams)
    # screened: re-evaluating at the genericity floor raises nothing
    assert run_check(IdentityId.THM41, p, 1e-8, GENERICITY_FLOOR).passed


def test_syl_single_draw():
    cfg = RunConfig(identities=(IdentityId.SYL_BIN,), grid=((2, 3),), draws_per_cell=1)
    s = run_suite(cfg)
    assert (s.passed, s.total) == (1, 1)


def test_all_identities_smallest_cell():
    s = run_suite(RunConfig(grid=((0, 1),), draws_per_cell=1))
    assert s.total == 15 and s.passed == 15


def test_reports_are_byte_identical():
    outs = []
    for jobs in (1, 1, 2):
        buf = io.StringIO()
        run_suite(small(), buf, jobs=jobs)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1] == outs[2]
    head = json.loads(outs[0].splitlines()[0])
    assert head["schema"] == 1 and "Philox" in head["prng"]["name"]


def test_csv_columns():
    buf = io.StringIO()
    run_suite(small(output_format="csv"), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "identity,r1,r2,draw,residual,passed"
    assert len(lines) == 1 + 8
    assert lines[1].startswith("thm21,1,1,0,") and lines[1].endswith(",true")


def test_replay_reproduces_residual(tmp_path):
    path = tmp_path / "report.jsonl"
    with open(path, "w") as fh:
        run_suite(small(), fh)
    _, recs, summary = read_report(path)
    assert summary["total"] == len(recs) == 8
    for rec in recs:
        stored, rep = replay(path, rec["case"])
        assert float(rep.rel_residual) == stored["rel_residual"]
    with pytest.raises(KeyError):
        replay(path, 99)


def wrong_syl(p, tol, min_abs):
    """A deliberately false identity: the closed form off by one part in a thousand."""
    lhs = det_lu(build_B(p)).value
    return IdentityReport.single(IdentityId.SYL_BIN, lhs,
                                 TrackedValue.of(rhs_syl_bin(p) * 1.001), tol, p.to_dict())


def test_failing_cases_replay_identically(tmp_path, monkeypatch):
    monkeypatch.setitem(harness.CHECKS, IdentityId.SYL_BIN, wrong_syl)
    path = tmp_path / "report.jsonl"
    with open(path, "w") as fh:
        s = run_suite(small(identities=(IdentityId.SYL_BIN,)), fh)
    assert s.passed == 0 and s.total == 4
    _, recs, _ = read_report(path)
    for rec in recs:
        stored, rep = replay(path, rec["case"])
        assert not rep.passed and float(rep.rel_residual) == stored["rel_residual"]
