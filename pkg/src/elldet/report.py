"""Identity identifiers and the both-sides report."""

import enum
import math
from dataclasses import dataclass, field

from .tracked import TrackedValue

RESIDUAL_FLOOR = 1e-300


class IdentityId(enum.Enum):
    SYL_BIN = "syl_bin"
    FKX = "fkx"
    THM21 = "thm21"
    THM21_ALT = "thm21_alt"
    COR22 = "cor22"
    COR23 = "cor23"
    WARNAAR_LEMMA = "warnaar_lemma"
    LEMMA32 = "lemma32"
    CN_SUM = "cn_sum"
    LAPLACE_XCHECK = "laplace_xcheck"
    THM41 = "thm41"
    RCG = "rcg"
    SEC5_LHS = "sec5_lhs"
    SEC5_HPRIME = "sec5_hprime"
    SEC5_RHS = "sec5_rhs"
    REFLECT = "reflect"

    @classmethod
    def parse(cls, text):
        text = text.strip().lower()
        for member in cls:
            if member.value == text or member.name.lower() == text:
                return member
        raise ValueError(f"unknown identity {text!r}")


ANCHORS = {
    IdentityId.SYL_BIN: "binomial Sylvester matrix B: det B = (-1)^(r1 r2) (s1 - s2)^(r1 r2)",
    IdentityId.FKX: "hypergeometric Sylvesteresque matrix M: det M as a product of rising factorials",
    IdentityId.THM21: "elliptic matrix F: det F, closed product with (t1 t2/s2)^(r1 r2) prefactor",
    IdentityId.THM21_ALT: "elliptic matrix F: det F, closed product with s1^(r1 r2) prefactor",
    IdentityId.COR22: "q-matrix U (p = 0): det U product",
    IdentityId.COR23: "q-matrix V (p = 0): det V product with half-power branch",
    IdentityId.WARNAAR_LEMMA: "theta determinant lemma for quasi-periodic, symmetric P_i",
    IdentityId.LEMMA32: "r2 x r2 theta determinant at x_j = q^(k_j)",
    IdentityId.CN_SUM: "C_n 10V9 multiple summation over k_0 < ... < k_(r2-1)",
    IdentityId.LAPLACE_XCHECK: "Laplace expansion of det F along the first r2 rows; closed-form top minors",
    IdentityId.THM41: "det G = (a/lambda)^(r1 r2) prod(...) det H, lambda = a^2 q^(2-r2)/bcd",
    IdentityId.RCG: "C_n 12V11 multiple transformation, lambda = a^2 q^(2-r2)/bcd",
    IdentityId.SEC5_LHS: "d = aq/c: det G' = prod (c, aq/c) ratios * det F'",
    IdentityId.SEC5_HPRIME: "d = aq/c: H' block triangular, det H' = diagonal product = closed form",
    IdentityId.SEC5_RHS: "d = aq/c: specialised transformation reproduces the s1^(r1 r2) product for det F",
    IdentityId.REFLECT: "theta factorial reflections (a)_n = (pa)_n (-a)^n q^C(n,2) = (q^(1-n)/a)_n (-a)^n q^C(n,2)",
}


def rel_residual(lhs, rhs):
    """Relative residual of two TrackedValues; both exact zeros give 0."""
    lhs, rhs = TrackedValue.of(lhs), TrackedValue.of(rhs)
    if lhs.is_zero and rhs.is_zero:
        return 0.0
    if lhs.is_pole or rhs.is_pole:
        return math.inf
    e = max(v.exp2 for v in (lhs, rhs) if not v.is_zero)
    a, b = lhs.scaled(e), rhs.scaled(e)
    den = max(abs(a), abs(b), RESIDUAL_FLOOR)
    return float(abs(a - b) / den)


@dataclass
class SubCheck:
    name: str
    lhs: TrackedValue
    rhs: TrackedValue
    tolerance: float

    @property
    def residual(self):
        return rel_residual(self.lhs, self.rhs)

    @property
    def passed(self):
        return self.residual <= self.tolerance


def _log10_abs(v):
    if v.is_zero:
        return None
    if v.is_pole:
        return math.inf
    return v.log_abs() / math.log(10)


@dataclass
class IdentityReport:
    id: IdentityId
    lhs: TrackedValue
    rhs: TrackedValue
    rel_residual: float
    tolerance: float
    passed: bool
    params_echo: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def build(cls, id, checks, params_echo=None, diagnostics=None, flags=None):
        """Combine sub-checks; the worst one (residual/tolerance) is reported.

        ``flags`` maps names of exact structural checks to booleans; a False
        flag fails the report regardless of residuals.
        """
        checks = list(checks)
        diagnostics = dict(diagnostics or {})
        flags = dict(flags or {})
        worst = max(checks, key=lambda c: c.residual / c.tolerance)
        if len(checks) > 1:
            diagnostics["subchecks"] = {
                c.name: {"residual": c.residual, "tolerance": c.tolerance}
                for c in checks}
        if flags:
            diagnostics["flags"] = flags
        diagnostics["log10_abs_lhs"] = _log10_abs(worst.lhs)
        diagnostics["log10_abs_rhs"] = _log10_abs(worst.rhs)
        passed = all(c.passed for c in checks) and all(flags.values())
        return cls(id, worst.lhs, worst.rhs, worst.residual, worst.tolerance,
                   passed, dict(params_echo or {}), diagnostics)

    @classmethod
    def single(cls, id, lhs, rhs, tolerance, params_echo=None, diagnostics=None):
        return cls.build(id, [SubCheck(id.value, TrackedValue.of(lhs),
                                       TrackedValue.of(rhs), tolerance)],
                         params_echo, diagnostics)
