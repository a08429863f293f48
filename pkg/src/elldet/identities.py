"""Closed-form right-hand sides and both-sides checkers.

Each ``*_check`` function evaluates the two sides of one identity at a
parameter point and returns an :class:`IdentityReport`. Left-hand sides are
either LU determinants of the built matrices or directly accumulated
multiple sums; right-hand sides are coded from the closed products.
"""

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

from .core import P as PMONO
from .arith import FLOAT, MpBackend
from .core import BaseNome, Evaluator, Q, sym
from .linalg import det_lu, laplace_block_expand, subsets
from .matrices import (
    EllipticFParams, EllipticGParams, HypergeomParams, QHypergeomParams,
    SylvesterBinomialParams, _Params, build_B, build_F, build_Fprime, build_G,
    build_H, build_M, build_U, build_V, c2, f_entry, rising)
from .report import IdentityId, IdentityReport, SubCheck
from .report import rel_residual as _res
from .tracked import ONE, TrackedValue, tracked_prod, tracked_sum

DEFAULT_TOL = 1e-8

# A float64 result is trusted when the error estimate
#   condition * eps * (ROUNDING_BUDGET + 1 / theta_floor)
# stays below ESCALATION_FRACTION * tolerance; otherwise the check is rerun
# with mpmath. Entries are products of up to a few hundred rounded factors
# (observed residuals stay under about 800 * condition * eps), and a theta
# factor of reduced modulus t amplifies argument rounding by about 1/t.
ROUNDING_BUDGET = 1024
ESCALATION_FRACTION = 0.1


MAX_DPS = 400


def _exact_zeros(rep):
    """Both sides are structural zeros, so no rounding enters the comparison."""
    return ("subchecks" not in rep.diagnostics
            and rep.lhs.is_zero and rep.rhs.is_zero)


def _budgets(rep):
    """``(condition, tolerance)`` for every sub-check of a report.

    A sub-check may carry its own condition (products of thetas have none
    beyond rounding); otherwise the report-wide one applies.
    """
    cond = rep.diagnostics.get("condition", 1.0)
    subs = rep.diagnostics.get("subchecks")
    if not subs:
        return [(cond, rep.tolerance)]
    return [(v.get("condition", cond), v["tolerance"]) for v in subs.values()]


def error_estimate(rep, eps=FLOAT.eps, condition=None):
    """A-priori error bound at unit roundoff ``eps`` from a report's diagnostics."""
    if condition is None:
        condition = max(c for c, _ in _budgets(rep))
    floor = rep.diagnostics.get("theta_floor") or 1.0
    return condition * eps * (ROUNDING_BUDGET + 1.0 / floor)


def _uncertified(rep, eps):
    """Largest condition among sub-checks whose estimate exceeds their budget."""
    if _exact_zeros(rep):
        return None
    bad = [c for c, tol in _budgets(rep)
           if error_estimate(rep, eps, c) > ESCALATION_FRACTION * tol]
    return max(bad) if bad else None


def escalation_dps(rep, condition=None):
    """Decimal digits for a rerun that keeps about 25 digits after cancellation."""
    lost = error_estimate(rep, 1.0, condition)
    if not math.isfinite(lost):
        return None
    return max(30, 25 + math.ceil(math.log10(max(lost, 1.0))))


def adaptive(check):
    """Rerun ``check`` in extended precision until its error estimate is small.

    The decision uses only each run's own condition estimate (determinant
    and sum sensitivities recorded by its Evaluator, computed in the working
    precision), never the residual, so it cannot turn a genuine mismatch
    into a pass. A condition estimate near ``1/eps`` may itself be rounding
    noise, so a rerun is checked again at its own precision.
    """
    @functools.wraps(check)
    def run(p, *args, escalate=True, **kw):
        rep = check(p, *args, **kw)
        bn = getattr(p, "bn", None)
        if bn is None:
            # plain parameters: the check takes the backend directly
            if not escalate or kw.get("backend", FLOAT) is not FLOAT:
                return rep
            rerun = lambda b: check(p, *args, **{**kw, "backend": b})
        else:
            if not escalate or bn.backend is not FLOAT:
                return rep
            rerun = lambda b: check(p.with_backend(b), *args, **kw)
        first, eps, dps = rep, FLOAT.eps, 0
        while True:
            cond = _uncertified(rep, eps)
            if cond is None:
                break
            want = escalation_dps(rep, cond)
            # an infinite estimate (flagged rank deficiency, total cancellation)
            # gives no digit count, so step up and let the rerun measure again
            dps = min(MAX_DPS, dps + 30 if want is None else max(want, dps + 20))
            backend = MpBackend(dps)
            rep = rerun(backend)
            rep.params_echo = first.params_echo
            rep.diagnostics["precision"] = backend.name
            rep.diagnostics["float64_condition"] = first.diagnostics.get("condition", 1.0)
            rep.diagnostics["float64_residual"] = first.rel_residual
            eps = backend.eps
            if dps >= MAX_DPS:
                break
        return rep
    return run


def c3(n):
    return n * (n - 1) * (n - 2) // 6


# parameter bundles specific to the determinant lemmas -----------------------

@dataclass(frozen=True)
class Lemma32Params(_Params):
    bn: BaseNome
    a: complex
    r1: int
    r2: int
    kvec: tuple

    def __post_init__(self):
        k = self.kvec
        if len(k) != self.r2 or any(x >= y for x, y in zip(k, k[1:])):
            raise ValueError(f"kvec must be strictly increasing of length r2, got {k}")

    def evaluator(self, min_abs=0.0):
        return Evaluator(self.bn, {"a": self.a}, min_abs)


@dataclass(frozen=True)
class WarnaarParams(_Params):
    bn: BaseNome
    c: complex
    A: tuple
    x: tuple
    n: int

    def __post_init__(self):
        if len(self.A) != self.n or len(self.x) != self.n:
            raise ValueError("A and x must both have length n")

    def evaluator(self, min_abs=0.0):
        vals = {"c": self.c}
        vals.update({f"A{i}": v for i, v in enumerate(self.A)})
        vals.update({f"x{i}": v for i, v in enumerate(self.x)})
        return Evaluator(self.bn, vals, min_abs)


# hypergeometric and binomial ------------------------------------------------

def rhs_syl_bin(p, num=complex):
    return (-1) ** (p.r1 * p.r2) * (num(p.s1) - num(p.s2)) ** (p.r1 * p.r2)


def rhs_fkx(p, num=complex):
    s1, s2 = num(p.s1), num(p.s2)
    out = (-1) ** (p.r1 * p.r2)
    for j in range(1, p.r1 + 1):
        den = rising(s1 + s2 + p.r1 + p.r2 + j - 2, p.r2)
        if den == 0:
            raise ZeroDivisionError("rising factorial denominator vanishes")
        out = out / den
    return out


@adaptive
def syl_bin_check(p, tolerance=1e-10, backend=FLOAT):
    d = det_lu(build_B(p, backend.num))
    return IdentityReport.single(
        IdentityId.SYL_BIN, d.value, rhs_syl_bin(p, backend.num), tolerance, p.to_dict(),
        {"growth_factor": d.growth_factor, "rank_deficient": d.rank_deficient,
         "condition": d.condition})


@adaptive
def fkx_check(p, tolerance=1e-9, backend=FLOAT):
    d = det_lu(build_M(p, backend.num))
    return IdentityReport.single(
        IdentityId.FKX, d.value, rhs_fkx(p, backend.num), tolerance, p.to_dict(),
        {"growth_factor": d.growth_factor, "condition": d.condition})


# elliptic determinant evaluation --------------------------------------------

def rhs_thm21(p, form="main", ev=None):
    """Closed product for ``det F``; ``form`` is ``"main"`` or ``"alt"``."""
    ev = ev or p.evaluator()
    s1, s2, t1, t2 = p.monos()
    r1, r2 = p.r1, p.r2
    out = ONE
    for j in range(1, r1 + 1):
        x = s2 * Q ** (j - r2)
        third = (s1 * s2 * Q ** (j - r2) / (t1 * t2) if form == "main"
                 else t1 * t2 * Q ** (j - r1) / (s1 * s2))
        out = out * ev.facs([x / t1, x / t2, third], r2) / ev.fac(
            s1 * s2 * Q ** (r1 + r2 + j - 2), r2)
    n = r1 * r2
    if form == "main":
        pre = (-1) ** n * ev.num(t1 * t2 / s2) ** n * ev.q ** (n * (r1 + 4 * r2 - 3) // 2)
    elif form == "alt":
        pre = ev.num(s1) ** n * ev.q ** (n * (r1 + r2 - 1) + r1 * c2(r2))
    else:
        raise ValueError(f"unknown form {form!r}")
    return TrackedValue.of(pre) * out


@adaptive
def thm21_check(p, form="main", tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    d = _det(ev, build_F(p, ev))
    main = rhs_thm21(p, "main", ev)
    alt = rhs_thm21(p, "alt", ev)
    rhs = main if form == "main" else alt
    ident = IdentityId.THM21 if form == "main" else IdentityId.THM21_ALT
    other = IdentityId.THM21_ALT if form == "main" else IdentityId.THM21
    # the headline form first; the report names the worst sub-check
    checks = [SubCheck(ident.value, d.value, rhs, tolerance),
              SubCheck(other.value, d.value, alt if form == "main" else main, tolerance),
              SubCheck("forms_agree", main, alt, min(tolerance, 1e-10))]
    return _finish(ev, IdentityReport.build(ident, checks, p.to_dict(),
                                {"growth_factor": d.growth_factor}),
                   {"forms_agree": 1.0})


def rhs_cor22(p, ev=None):
    ev = ev or p.evaluator()
    s1, s2 = sym("s1"), sym("s2")
    r1, r2 = p.r1, p.r2
    out = TrackedValue.of((-1) ** (r1 * r2) / ev.num(s2) ** (r1 * r2)
                          * ev.q ** (r1 * c2(r2)))
    for j in range(1, r1 + 1):
        out = out / ev.fac(s1 * s2 * Q ** (r1 + r2 + j - 2), r2)
    return out


def rhs_cor23(p, ev=None):
    """Uses the same per-symbol square-root branch as :func:`build_V`."""
    ev = ev or p.evaluator()
    s1, s2 = sym("s1"), sym("s2")
    r1, r2 = p.r1, p.r2
    half = Fraction(1, 2)
    out = ev.tracked((s1 / s2) ** (half * r1 * r2)) * ev.qpow(r1 * c2(r2))
    for j in range(1, r1 + 1):
        out = out * ev.fac((s2 / s1) ** half * Q ** (j - r2), r2) / ev.facs(
            [(s1 * s2) ** half * Q ** (j - 1), s1 * s2 * Q ** (r1 + r2 + j - 2)], r2)
    return out


@adaptive
def cor22_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    d = _det(ev, build_U(p, ev))
    return _finish(ev, IdentityReport.single(IdentityId.COR22, d.value, rhs_cor22(p, ev),
                                 tolerance, p.to_dict(),
                                 {"growth_factor": d.growth_factor}))


@adaptive
def cor23_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    d = _det(ev, build_V(p, ev))
    return _finish(ev, IdentityReport.single(IdentityId.COR23, d.value, rhs_cor23(p, ev),
                                 tolerance, p.to_dict(),
                                 {"growth_factor": d.growth_factor}))


# determinant lemmas ----------------------------------------------------------

def default_P(ev, i, x):
    """``P_i(x) = (c^(1/2)/x)^i (x q^(1-i), x/c)_i`` for a monomial ``x``."""
    c = sym("c")
    pre = ev.tracked((c ** Fraction(1, 2) / x) ** i)
    return pre * ev.facs([x * Q ** (1 - i), x / c], i)


def warnaar_pretest(ev, n, P=default_P, tolerance=1e-10, probes=("x0", "A0")):
    """Quasi-periodicity and symmetry of ``P_0..P_{n-1}`` at probe points.

    Returns the worst residual for each condition; raises ValueError naming
    the failed condition.
    """
    c = sym("c")
    worst = {"quasi_periodicity": 0.0, "symmetry": 0.0}
    for name in probes:
        x = sym(name)
        for i in range(n):
            base = P(ev, i, x)
            if ev.p != 0:
                shifted = P(ev, i, x * PMONO)
                factor = ev.tracked((c / (x ** 2 * PMONO)) ** i)
                r = _res(shifted, factor * base)
                worst["quasi_periodicity"] = max(worst["quasi_periodicity"], r)
            r = _res(P(ev, i, c / x), base)
            worst["symmetry"] = max(worst["symmetry"], r)
    for cond, r in worst.items():
        if r > tolerance:
            raise ValueError(f"P fails {cond}: residual {r:.3g}")
    return worst




@adaptive
def warnaar_lemma_check(p, P=default_P, tolerance=DEFAULT_TOL, min_abs=0.0):
    """Theta determinant lemma for n x n matrices ``P_i(x_j) prod theta(...)``."""
    ev = p.evaluator(min_abs)
    n = p.n
    c = sym("c")
    A = [sym(f"A{i}") for i in range(n)]
    x = [sym(f"x{i}") for i in range(n)]
    pre = warnaar_pretest(ev, n, P, probes=tuple(f"x{i}" for i in range(n)))
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            v = P(ev, i, x[j])
            for k in range(i + 1, n):
                v = v * ev.thetas([A[k] * x[j], c * A[k] / x[j]])
            row.append(v)
        rows.append(row)
    d = _det(ev, rows)
    rhs = ONE
    for j in range(n):
        for i in range(j):
            rhs = rhs * ev.tracked(c * A[j] / x[j]) * ev.thetas([x[j] / x[i], x[i] * x[j] / c])
    for i in range(n):
        rhs = rhs * P(ev, i, A[i] ** -1)
    diag = {"pretest": pre, "growth_factor": d.growth_factor}
    return _finish(ev, IdentityReport.single(IdentityId.WARNAAR_LEMMA, d.value, rhs, tolerance,
                                 p.to_dict(), diag))


def lemma32_matrix(ev, a, r1, r2, kvec):
    rows = []
    for i in range(r2):
        row = []
        for k in kvec:
            v = ev.qpow(-i * k) * ev.facs([Q ** (k - i + 1), a * Q ** k], i)
            v = v * ev.facs([Q ** (r1 - k + i + 1), a * Q ** (r1 + k + i + 1)], r2 - i - 1)
            row.append(v)
        rows.append(row)
    return rows


def lemma32_rhs(ev, a, r1, r2, kvec):
    out = ev.qpow(-sum(i * k for i, k in enumerate(kvec)))
    for j in range(r2):
        for i in range(j):
            out = out * ev.thetas([Q ** (kvec[j] - kvec[i]), a * Q ** (kvec[i] + kvec[j])])
    for i in range(r2):
        out = out * ev.facs([Q ** (r1 + 1), a * Q ** (r1 + i)], i)
    return out


@adaptive
def lemma32_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    a = sym("a")
    d = _det(ev, lemma32_matrix(ev, a, p.r1, p.r2, p.kvec))
    rhs = lemma32_rhs(ev, a, p.r1, p.r2, p.kvec)
    return _finish(ev, IdentityReport.single(IdentityId.LEMMA32, d.value, rhs, tolerance,
                                 p.to_dict(), {"growth_factor": d.growth_factor}))


# C_n summation ----------------------------------------------------------------

def _ratio_product(ev, nums, dens, k):
    """``(nums)_k / (dens)_k`` with numerator and denominator interleaved."""
    out = ONE
    for a, b in zip(nums, dens):
        out = out * ev.fac(a, k) / ev.fac(b, k)
    return out


def _vwp_summand(ev, a, nums, dens, ks, r2):
    """Very-well-poised C_n summand shared by the 10V9 and 12V11 sums."""
    out = ev.qpow(sum((2 * r2 - 2 * i - 1) * k for i, k in enumerate(ks)))
    for j, k in enumerate(ks):
        out = out * _ratio_product(ev, nums, dens, k)
        out = out * ev.theta(a * Q ** (2 * k)) / ev.theta(a)
        for i in range(j):
            t = ev.thetas([Q ** (k - ks[i]), a * Q ** (ks[i] + k)])
            out = out * t * t
    return out


def _finish(ev, rep, conditions=None):
    """Attach sensitivity diagnostics; ``conditions`` overrides per sub-check."""
    rep.diagnostics["condition"] = ev.condition
    for name, c in (conditions or {}).items():
        rep.diagnostics["subchecks"][name]["condition"] = c
    rep.diagnostics["theta_floor"] = (float(ev.smallest) if math.isfinite(ev.smallest)
                                      else None)
    return rep


def _det(ev, m):
    d = det_lu(m)
    ev.note_condition(d.condition)
    return d


def sum_condition(terms):
    """``sum |t| / |sum t|`` over the leading-order terms (inf on total cancellation).

    The total is formed in the precision of the mantissas.
    """
    terms = [t for t in terms if not t.is_zero]
    if not terms:
        return 1.0
    low = min(t.zero_order for t in terms)
    live = [t for t in terms if t.zero_order == low]
    e = max(t.exp2 for t in live)
    vals = [t.scaled(e) for t in live]
    total = abs(sum(vals))
    if total == 0:
        return math.inf
    return float(sum(abs(v) for v in vals) / total)


def _sum_terms(terms, ev=None):
    terms = [t for t in terms if not t.is_zero]
    if any(t.is_pole for t in terms):
        raise ArithmeticError("pole in multiple sum")
    if ev is not None:
        ev.note_condition(sum_condition(terms))
    return tracked_sum(terms)


def cn_sum_terms(p, ev):
    s1, s2, t1, t2 = p.monos()
    r1, r2 = p.r1, p.r2
    m = r1 + r2 - 1
    e5 = s1 * s2 ** 2 * Q ** (r1 - r2) / (t1 * t2)
    nums = [s1 * s2 / Q, s1, t1, t2, e5, Q ** -m]
    dens = [Q, s2, s1 * s2 / t1, s1 * s2 / t2, t1 * t2 * Q ** (r2 - r1) / s2,
            s1 * s2 * Q ** m]
    a = s1 * s2 / Q
    return [_vwp_summand(ev, a, nums, dens, s.ks, r2) for s in subsets(r1 + r2, r2)]


def cn_sum_lhs(p, ev=None, reverse=False):
    ev = ev or p.evaluator()
    terms = cn_sum_terms(p, ev)
    if reverse:
        terms = terms[::-1]
    return _sum_terms(terms, ev)


def cn_sum_rhs(p, ev=None):
    ev = ev or p.evaluator()
    s1, s2, t1, t2 = p.monos()
    r1, r2 = p.r1, p.r2
    e5 = s1 * s2 ** 2 * Q ** (r1 - r2) / (t1 * t2)
    out = ev.qpow(-4 * c3(r2)) * ev.tracked((s2 / (t1 * t2 * Q ** 2)) ** c2(r2))
    for j in range(1, r2 + 1):
        out = out * ev.facs([Q, s1, t1, t2, e5], j - 1) * ev.facs([Q, s1 * s2], r1 + r2 - 1)
        x = s2 * Q ** (1 - j)
        out = out * ev.facs([x / t1, x / t2, s1 * x / (t1 * t2)], r1)
        out = out / ev.facs([Q, s2, s1 * s2 / t1, s1 * s2 / t2,
                             s2 * Q ** (1 - 2 * r2 + j) / (t1 * t2)], r1 + r2 - j)
    return out


@adaptive
def cn_sum_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    terms = cn_sum_terms(p, ev)
    lhs = _sum_terms(terms, ev)
    return _finish(ev, IdentityReport.single(
        IdentityId.CN_SUM, lhs, cn_sum_rhs(p, ev), tolerance, p.to_dict(),
        {"terms": len(terms)}))


# C_n transformation -------------------------------------------------------------

def _rcg_parts_left(p, ev):
    return _rcg_parts(p, ev, right=False)


def _rcg_parts(p, ev, right=True):
    a, b, c, d, e, f = p.monos()
    lam = p.lam_mono()
    r1, r2 = p.r1, p.r2
    m = r1 + r2 - 1
    aq = a * Q
    left_nums = [a, b, c, d, e, f, lam * a * Q ** (r1 + 1) / (e * f), Q ** -m]
    left_dens = [Q, aq / b, aq / c, aq / d, aq / e, aq / f, e * f * Q ** -r1 / lam,
                 a * Q ** (m + 1)]
    right_nums = [lam, lam * b / a, lam * c / a, lam * d / a, e, f,
                  lam * a * Q ** (r1 + 1) / (e * f), Q ** -m]
    right_dens = [Q, aq / b, aq / c, aq / d, lam * Q / e, lam * Q / f,
                  e * f * Q ** -r1 / a, lam * Q ** (m + 1)]
    left = [_vwp_summand(ev, a, left_nums, left_dens, s.ks, r2)
            for s in subsets(r1 + r2, r2)]
    if not right:
        return left, None, None
    right = [_vwp_summand(ev, lam, right_nums, right_dens, s.ks, r2)
             for s in subsets(r1 + r2, r2)]
    pre = ONE
    for j in range(1, r2 + 1):
        pre = pre * ev.facs([b, c, d, e * f / a], j - 1) * ev.fac(aq, m)
        pre = pre * ev.fac(aq / (e * f), r1) * ev.facs([lam * Q / e, lam * Q / f], m + 1 - j)
        pre = pre / ev.facs([lam * b / a, lam * c / a, lam * d / a, e * f / lam], j - 1)
        pre = pre / (ev.fac(lam * Q, m) * ev.fac(lam * Q / (e * f), r1))
        pre = pre / ev.facs([aq / e, aq / f], m + 1 - j)
    return left, pre, right


def rcg_sides(p, ev=None):
    """Return ``(left sum, prefactor, right sum)`` as TrackedValues."""
    ev = ev or p.evaluator()
    left, pre, right = _rcg_parts(p, ev)
    return _sum_terms(left, ev), pre, _sum_terms(right, ev)


@adaptive
def rcg_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    left, pre, right = rcg_sides(p, ev)
    return _finish(ev, IdentityReport.single(IdentityId.RCG, left, pre * right, tolerance,
                                 p.to_dict(), {"terms": 2 * _ncomb(p.r1 + p.r2, p.r2),
                                               "lambda": _cp(ev.num(p.lam_mono()))}))


@adaptive
def rcg_summation_specialisation(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    """RCG left sum at ``e = lambda q^r1`` against the C_n summation.

    With that choice the numerator ``lambda a q^(r1+1)/(ef)`` equals the
    denominator ``aq/f`` paired with ``f``, the 12V11 summand collapses to
    the 10V9 one, and the left sum is the summation LHS at
    ``(s1, s2, t1, t2) = (b, aq/b, c, d)``. The right side then carries a
    terminating factor, so only the left sum is compared.
    """
    ev0 = p.evaluator()
    e = ev0.num(p.lam_mono() * Q ** p.r1)
    g = EllipticGParams(p.bn, p.a, p.b, p.c, ev0.num(p.monos()[3]), e, p.f, p.r1, p.r2)
    ev = g.evaluator(min_abs)
    left, _, _ = _rcg_parts_left(g, ev)
    lhs = _sum_terms(left, ev)
    aqb = ev.num(sym("a") * Q / sym("b"))
    fp = EllipticFParams(p.bn, g.b, aqb, g.c, g.d, p.r1, p.r2)
    fev = fp.evaluator(min_abs)
    checks = [SubCheck("rcg_left_vs_sum_lhs", lhs, cn_sum_lhs(fp, fev), tolerance),
              SubCheck("rcg_left_vs_sum_rhs", lhs, cn_sum_rhs(fp, fev), tolerance)]
    rep = IdentityReport.build(IdentityId.RCG, checks, g.to_dict())
    rep.diagnostics["condition"] = max(ev.condition, fev.condition)
    rep.diagnostics["theta_floor"] = float(min(ev.smallest, fev.smallest))
    return rep


def _ncomb(n, r):
    from math import comb
    return comb(n, r)


def _cp(z):
    z = complex(z)
    return [z.real, z.imag]


# transformation of determinants -------------------------------------------------

def thm41_factor(p, ev=None):
    """``(a/lambda)^(r1 r2) prod_j (lambda q^(r1+r2+j-1))_r2 / (a q^(r1+r2+j-1))_r2``."""
    ev = ev or p.evaluator()
    a = sym("a")
    lam = p.lam_mono()
    r1, r2 = p.r1, p.r2
    out = ev.tracked((a / lam) ** (r1 * r2))
    for j in range(1, r1 + 1):
        out = out * ev.fac(lam * Q ** (r1 + r2 + j - 1), r2) / ev.fac(
            a * Q ** (r1 + r2 + j - 1), r2)
    return out


@adaptive
def thm41_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    ev = p.evaluator(min_abs)
    dg = _det(ev, build_G(p, ev))
    dh = _det(ev, build_H(p, ev))
    rhs = thm41_factor(p, ev) * dh.value
    return _finish(ev, IdentityReport.single(
        IdentityId.THM41, dg.value, rhs, tolerance, p.to_dict(),
        {"growth_factor_G": dg.growth_factor, "growth_factor_H": dh.growth_factor,
         "lambda": _cp(ev.num(p.lam_mono()))}))


# d = aq/c reduction -----------------------------------------------------------------

def _c_ratio(ev, p):
    a, _, c, _, _, _ = p.monos()
    out = ONE
    for i in range(p.r1):
        out = out * ev.facs([c, a * Q / c], p.r2 + i) / ev.facs([c, a * Q / c], i)
    return out


def hprime_closed_form(p, ev=None):
    """Closed product for ``det H'`` (``d = aq/c``, ``lambda = a q^(1-r2)/b``)."""
    p = p.specialised()
    ev = ev or p.evaluator()
    a, b, c, _, e, f = p.monos()
    r1, r2 = p.r1, p.r2
    lam = a * Q ** (1 - r2) / b
    out = ev.qpow(r1 * r1 * r2 + r1 * c2(r2))
    for i in range(r1):
        out = out * ev.facs([c, a * Q / c], r2 + i) / (
            ev.facs([c, a * Q / c], i) * ev.fac(lam * Q ** (r1 + r2 + i), r2))
    for i in range(1, r1 + 1):
        x = a * Q ** (i + 1 - r2) / b
        out = out * ev.facs([x / e, x / f, e * f * Q ** (i - 1 - r1) / a], r2)
    return out


def trans_special_rhs(p, ev=None):
    """The specialised right-hand side as a closed product."""
    p = p.specialised()
    ev = ev or p.evaluator()
    a, b, c, _, e, f = p.monos()
    r1, r2 = p.r1, p.r2
    out = ev.tracked(b ** (r1 * r2)) * ev.qpow(r1 * r2 * (r1 + r2 - 1) + r1 * c2(r2))
    out = out * _c_ratio(ev, p)
    for i in range(1, r1 + 1):
        x = a * Q ** (i + 1 - r2) / b
        out = out * ev.facs([x / e, x / f, e * f * Q ** (i - 1 - r1) / a], r2)
        out = out / ev.fac(a * Q ** (r1 + r2 + i - 1), r2)
    return out


def hprime_structure(h, r1, r2):
    """Exact-zero pattern of H': returns a dict of boolean flags."""
    upper_tri = all(h[i, j].is_zero for i in range(r2) for j in range(i))
    upper_unit = all(not h[i, i].is_zero and abs(h[i, i].scaled(0) - 1) < 1e-12
                     and h[i, i].zero_order == 0 for i in range(r2))
    upper_right = all(h[i, j].is_zero for i in range(r2) for j in range(r2, r1 + r2))
    lower_tri = all(h[i, j].is_zero for i in range(r2, r1 + r2)
                    for j in range(i + 1, r1 + r2))
    return {"upper_left_unit_upper_triangular": upper_tri and upper_unit,
            "upper_right_zero": upper_right,
            "lower_right_lower_triangular": lower_tri}


@adaptive
def sec5_lhs_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    p = p.specialised()
    ev = p.evaluator(min_abs)
    dg = _det(ev, build_G(p, ev))
    df = _det(ev, build_Fprime(p, ev))
    return _finish(ev, IdentityReport.single(IdentityId.SEC5_LHS, dg.value, _c_ratio(ev, p) * df.value,
                                 tolerance, p.to_dict()))


@adaptive
def sec5_hprime_check(p, tolerance=1e-9, min_abs=0.0):
    p = p.specialised()
    ev = p.evaluator(min_abs)
    h = build_H(p, ev)
    dh = _det(ev, h)
    diag = tracked_prod(h[i, i] for i in range(h.n))
    checks = [SubCheck("det_vs_diagonal", dh.value, diag, tolerance),
              SubCheck("diagonal_vs_closed_form", diag, hprime_closed_form(p, ev), tolerance)]
    return _finish(ev, IdentityReport.build(IdentityId.SEC5_HPRIME, checks, p.to_dict(),
                                flags=hprime_structure(h, p.r1, p.r2)))


@adaptive
def sec5_rhs_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    """Specialised transformation against the closed products.

    Checks factor * det H' against the specialised closed form, and, after
    dividing out the (c, aq/c) ratios, against the s1-prefactor product for
    det F at (s1, s2, t1, t2) = (b, aq/b, e, f).
    """
    p = p.specialised()
    ev = p.evaluator(min_abs)
    dh = _det(ev, build_H(p, ev))
    transformed = thm41_factor(p, ev) * dh.value
    closed = trans_special_rhs(p, ev)
    b, aqb, e, f = (ev.num(m) for m in (sym("b"), sym("a") * Q / sym("b"), sym("e"), sym("f")))
    fp = EllipticFParams(p.bn, b, aqb, e, f, p.r1, p.r2)
    alt = rhs_thm21(fp, "alt")
    reduced = transformed / _c_ratio(ev, p)
    checks = [SubCheck("transformed_vs_closed", transformed, closed, tolerance),
              SubCheck("reduces_to_det_F", reduced, alt, tolerance)]
    return _finish(ev, IdentityReport.build(IdentityId.SEC5_RHS, checks, p.to_dict()))


def sec5_reduction_check(p, tolerance=DEFAULT_TOL):
    """All three d = aq/c sub-checks folded into one report."""
    parts = [sec5_lhs_check(p, tolerance), sec5_hprime_check(p, min(tolerance, 1e-9)),
             sec5_rhs_check(p, tolerance)]
    checks = [SubCheck(r.id.value, r.lhs, r.rhs, r.tolerance) for r in parts]
    flags = parts[1].diagnostics.get("flags", {})
    rep = IdentityReport.build(IdentityId.SEC5_HPRIME, checks, p.specialised().to_dict(),
                               flags=flags)
    rep.diagnostics["parts"] = {r.id.value: r.rel_residual for r in parts}
    rep.diagnostics["condition"] = max(r.diagnostics.get("condition", 1.0) for r in parts)
    floors = [r.diagnostics.get("theta_floor") for r in parts]
    floors = [f for f in floors if f is not None]
    rep.diagnostics["theta_floor"] = min(floors) if floors else None
    return rep


# Laplace cross-check ---------------------------------------------------------------

def d1_closed_form(p, ks, ev=None):
    """Top Laplace minor ``det(f_{i,k_j})`` evaluated through the theta lemma."""
    ev = ev or p.evaluator()
    s1, s2, t1, t2 = p.monos()
    r1, r2 = p.r1, p.r2
    e4 = s1 * s2 ** 2 * Q ** (r1 - r2) / (t1 * t2)
    expo = (sum(c2(k) for k in ks) + r2 * sum(ks) - (2 * r2 - 1) * r2 * (r2 - 1) // 6
            - sum(i * k for i, k in enumerate(ks)))
    out = ev.qpow(expo)
    s12 = s1 * s2
    for i in range(r2):
        out = out * ev.fac(Q, r1) * ev.facs([Q ** (r1 + 1), s12 * Q ** (r1 + i - 1)], i)
        out = out * ev.fac(s12 * Q ** r1, 2 * i) / ev.facs([s1, t1, t2, e4], i)
    for k in ks:
        out = out * ev.facs([s1, t1, t2, e4], k)
        out = out / (ev.facs([Q, s12 * Q ** (k - 1)], k) * ev.fac(Q, r1 + r2 - k - 1)
                     * ev.fac(s12 * Q ** r1, r2 + k - 1))
    for j in range(r2):
        for i in range(j):
            out = out * ev.thetas([Q ** (ks[j] - ks[i]), s12 * Q ** (ks[i] + ks[j] - 1)])
    return out


@adaptive
def laplace_cross_check(p, tolerance=DEFAULT_TOL, min_abs=0.0):
    """Block Laplace expansion of det F and closed forms of its top minors."""
    ev = p.evaluator(min_abs)
    F = build_F(p, ev)
    worst = {"residual": 0.0, "ks": None, "lhs": ONE, "rhs": ONE}

    terms = []

    def per_term(s, d1, d2):
        ev.note_condition(d1.condition)
        t = d1.value * d2.value
        terms.append(-t if s.sign < 0 else t)
        closed = d1_closed_form(p, s.ks, ev)
        r = _res(d1.value, closed)
        if worst["ks"] is None or r > worst["residual"]:
            worst.update(residual=r, ks=list(s.ks), lhs=d1.value, rhs=closed)

    expanded = laplace_block_expand(F, p.r2, per_term)
    ev.note_condition(sum_condition(terms))
    direct = _det(ev, F)
    checks = [SubCheck("laplace_vs_lu", expanded, direct.value, 1e-9),
              SubCheck("minor_closed_form", worst["lhs"], worst["rhs"], tolerance)]
    return _finish(ev, IdentityReport.build(IdentityId.LAPLACE_XCHECK, checks, p.to_dict(),
                                {"worst_subset": worst["ks"],
                                 "terms": _ncomb(p.r1 + p.r2, p.r2)}))
