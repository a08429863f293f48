"""Acceptance suite: one PASS/FAIL line per criterion at the pinned tolerances.

The lines are collected in ``LINES`` and printed in the pytest terminal summary
(see conftest.py). Running this file directly prints them as well.
"""

import io
import time

import numpy as np

from elldet import IdentityId as I
from elldet import SylvesterBinomialParams, build_B, det_lu
from elldet.harness import RunConfig, parse_grid, run_suite

from conftest import cz

LINES = []
GRID8 = parse_grid("n<=8")


def record(n, ok, what):
    LINES.append(f"{'PASS' if ok else 'FAIL'}  criterion {n:>2}: {what}")
    return ok


def suite(ids, grid=GRID8, draws=20, tol=1e-8, seed=0, **kw):
    cfg = RunConfig(seed=seed, identities=tuple(ids), grid=tuple(grid), draws_per_cell=draws,
                    tolerance=tol, **kw)
    start = time.perf_counter()
    s = run_suite(cfg)
    return s, time.perf_counter() - start


def worst(recs, sub=None):
    """Largest residual (of a named subcheck if given) and the tolerances used."""
    res, tols = 0.0, set()
    for r in recs:
        if sub is None:
            res = max(res, r["rel_residual"])
            tols.add(r["tolerance"])
        else:
            s = r["diagnostics"]["subchecks"][sub]
            res = max(res, s["residual"])
            tols.add(s["tolerance"])
    return res, tols


def all_pass(s):
    return s.passed == s.total


def test_01_sylvester_baseline():
    s, t = suite([I.SYL_BIN], [(2, 3)], tol=1e-10)
    w, tols = worst(s.records)
    rng = np.random.default_rng(1)
    rank_def = True
    for _ in range(20):
        z = cz(rng)
        d = det_lu(build_B(SylvesterBinomialParams(z, z, 2, 3)))
        rank_def &= d.rank_deficient and d.value.is_zero
    ok = all_pass(s) and s.total == 20 and tols == {1e-10} and rank_def and t < 1
    assert record(1, ok, f"SYL_BIN (2,3) {s.passed}/{s.total}, worst {w:.1e} <= 1e-10, "
                         f"exact rank deficiency at s1=s2 {rank_def}, {t:.2f} s < 1 s")


def test_02_fkx():
    s, t = suite([I.FKX], draws=10, tol=1e-9)
    w, tols = worst(s.records)
    ok = all_pass(s) and s.total == 440 and tols == {1e-9} and t < 5
    assert record(2, ok, f"FKX r1+r2<=8 x10 {s.passed}/{s.total}, worst {w:.1e} <= 1e-9, "
                         f"{t:.1f} s < 5 s")


def test_03_elliptic_determinant():
    s, t = suite([I.THM21], p_modulus_max=0.5)
    main, t1 = worst(s.records, "thm21")
    alt, t2 = worst(s.records, "thm21_alt")
    agree, t3 = worst(s.records, "forms_agree")
    ok = (all_pass(s) and s.total == 880 and t1 == t2 == {1e-8} and t3 == {1e-10}
          and t < 30)
    assert record(3, ok, f"THM21 |p|<=0.5 {s.passed}/{s.total}, forms {main:.1e}/{alt:.1e} "
                         f"<= 1e-8, agree {agree:.1e} <= 1e-10, {t:.1f} s < 30 s")


def test_04_corollaries_at_zero_nome():
    s, t = suite([I.COR22, I.COR23])
    w, tols = worst(s.records)
    nome_zero = all(r["params_echo"]["p"] == [0.0, 0.0] for r in s.records)
    ok = all_pass(s) and s.total == 1760 and tols == {1e-8} and nome_zero and t < 10
    assert record(4, ok, f"COR22/COR23 p=0 {s.passed}/{s.total}, worst {w:.1e} <= 1e-8, "
                         f"{t:.1f} s < 10 s")


def test_05_theta_minor_lemma():
    grid = [(r1, r2) for r1 in range(6) for r2 in range(6)]
    s, _ = suite([I.LEMMA32], grid, draws=10)
    w, tols = worst(s.records)
    ok = all_pass(s) and s.total == 360 and tols == {1e-8}
    assert record(5, ok, f"LEMMA32 r1,r2<=5 x10 kvecs {s.passed}/{s.total}, "
                         f"worst {w:.1e} <= 1e-8")


def test_06_warnaar_lemma():
    s, _ = suite([I.WARNAAR_LEMMA], [(0, n) for n in range(1, 6)])
    w, tols = worst(s.records)
    pre = max(max(r["diagnostics"]["pretest"].values()) for r in s.records)
    ok = all_pass(s) and s.total == 100 and tols == {1e-8} and pre <= 1e-10
    assert record(6, ok, f"WARNAAR n<=5 {s.passed}/{s.total}, pretests {pre:.1e} <= 1e-10, "
                         f"worst {w:.1e} <= 1e-8")


def test_07_cn_summation():
    s, t = suite([I.CN_SUM])
    w, tols = worst(s.records)
    ok = all_pass(s) and s.total == 880 and tols == {1e-8} and t < 20
    assert record(7, ok, f"CN_SUM {s.passed}/{s.total}, worst {w:.1e} <= 1e-8, "
                         f"{t:.1f} s < 20 s")


def test_08_cn_transformation():
    s, _ = suite([I.RCG])
    w, tols = worst(s.records)
    ok = all_pass(s) and s.total == 880 and tols == {1e-8}
    assert record(8, ok, f"RCG {s.passed}/{s.total}, worst {w:.1e} <= 1e-8")


def test_09_g_versus_h():
    s, _ = suite([I.THM41])
    w, tols = worst(s.records)
    ok = all_pass(s) and s.total == 880 and tols == {1e-8}
    assert record(9, ok, f"THM41 {s.passed}/{s.total}, worst {w:.1e} <= 1e-8")


def test_10_reduction_chain():
    s, _ = suite([I.SEC5_LHS, I.SEC5_HPRIME, I.SEC5_RHS])
    by = {i: [r for r in s.records if r["identity"] == i.value]
          for i in (I.SEC5_LHS, I.SEC5_HPRIME, I.SEC5_RHS)}
    lhs, tl = worst(by[I.SEC5_LHS])
    hp, th = worst(by[I.SEC5_HPRIME], "det_vs_diagonal")
    rhs, tr = worst(by[I.SEC5_RHS], "reduces_to_det_F")
    exact = all(all(r["diagnostics"]["flags"].values()) for r in by[I.SEC5_HPRIME])
    ok = (all_pass(s) and s.total == 3 * 880 and tl == tr == {1e-8} and th == {1e-9}
          and exact)
    assert record(10, ok, f"reduction chain {s.passed}/{s.total}: lhs {lhs:.1e} <= 1e-8, "
                          f"H' exactly block-triangular {exact} and {hp:.1e} <= 1e-9, "
                          f"rhs {rhs:.1e} <= 1e-8")


def test_11_laplace():
    s, _ = suite([I.LAPLACE_XCHECK])
    lap, t1 = worst(s.records, "laplace_vs_lu")
    minor, t2 = worst(s.records, "minor_closed_form")
    ok = all_pass(s) and s.total == 880 and t1 == {1e-9} and t2 == {1e-8}
    assert record(11, ok, f"Laplace {s.passed}/{s.total}: expansion vs LU {lap:.1e} <= 1e-9, "
                          f"minors {minor:.1e} <= 1e-8")


def test_12_determinism():
    cfg = RunConfig(seed=42, grid=parse_grid("2x2,1x3"), draws_per_cell=2)
    outs = []
    for jobs in (1, 1, 2):
        buf = io.StringIO()
        run_suite(cfg, buf, jobs=jobs)
        outs.append(buf.getvalue().encode())
    ok = outs[0] == outs[1] == outs[2]
    assert record(12, ok, f"all identities, seed 42: three runs byte-identical "
                          f"({len(outs[0])} bytes)")


def test_combined_elliptic_runtime():
    s, t = suite([I.THM21, I.THM41, I.RCG])
    ok = all_pass(s) and t < 60
    assert ok, f"THM21+THM41+RCG {s.passed}/{s.total} in {t:.1f} s"
    LINES.append(f"note            : THM21+THM41+RCG {s.passed}/{s.total} in {t:.1f} s < 60 s")


if __name__ == "__main__":
    import sys
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    print("\n".join(LINES))
    sys.exit(1 if failed else 0)
