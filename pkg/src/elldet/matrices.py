"""Parameter bundles and the two-block Sylvester-like matrix families.

Every family is an (r1 + r2) x (r1 + r2) matrix whose first r2 rows come
from one entry formula and whose last r1 rows come from a second one with
swapped parameters. Entries are TrackedValues, so band zeros produced by
``1/(q; q, p)_{-r}`` are exact.
"""

import json
import math
from dataclasses import dataclass, fields, replace
from fractions import Fraction

from .core import BaseNome, Evaluator, Q, sym
from .tracked import ONE, TrackedValue


def c2(n):
    """Binomial ``C(n, 2)`` for any integer ``n``."""
    return n * (n - 1) // 2


def binom(r, m):
    if m < 0 or m > r:
        return 0
    return math.comb(r, m)


def rising(a, k):
    """Rising factorial ``(a)_k = a (a+1) ... (a+k-1)``, ``k >= 0``."""
    if k < 0:
        raise ValueError("rising factorial index must be non-negative")
    out = 1
    for j in range(k):
        out = out * (a + j)
    return out


def _cpair(z):
    z = complex(z)
    return [z.real, z.imag]


def _cval(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


_INTS = {"r1", "r2", "n"}
_INT_TUPLES = {"kvec"}
_COMPLEX_TUPLES = {"A", "x"}


class _Params:
    """Shared (de)serialisation for the parameter dataclasses."""

    def to_dict(self):
        out = {"type": type(self).__name__}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, BaseNome):
                out["q"] = _cpair(v.q)
                out["p"] = _cpair(v.p)
            elif isinstance(v, bool) or v is None:
                out[f.name] = v
            elif isinstance(v, int):
                out[f.name] = v
            elif f.name in _INT_TUPLES:
                out[f.name] = [int(k) for k in v]
            elif isinstance(v, tuple):
                out[f.name] = [_cpair(z) for z in v]
            else:
                out[f.name] = _cpair(v)
        return out

    def with_backend(self, backend):
        """The same point evaluated through another arithmetic backend."""
        bn = getattr(self, "bn", None)
        if bn is None:
            return self
        return replace(self, bn=BaseNome(bn.q, bn.p, backend))

    @classmethod
    def from_dict(cls, d, backend=None):
        kw = {}
        for f in fields(cls):
            if f.name == "bn":
                extra = {} if backend is None else {"backend": backend}
                kw["bn"] = BaseNome(_cval(d["q"]), _cval(d["p"]), **extra)
            elif f.name in _INTS:
                kw[f.name] = int(d[f.name])
            elif f.name in _INT_TUPLES:
                kw[f.name] = tuple(int(k) for k in d[f.name])
            elif d.get(f.name) is None:
                kw[f.name] = None
            elif f.name in _COMPLEX_TUPLES:
                kw[f.name] = tuple(_cval(z) for z in d[f.name])
            else:
                kw[f.name] = _cval(d[f.name])
        return cls(**kw)


@dataclass(frozen=True)
class SylvesterBinomialParams(_Params):
    s1: complex
    s2: complex
    r1: int
    r2: int


@dataclass(frozen=True)
class HypergeomParams(_Params):
    s1: complex
    s2: complex
    r1: int
    r2: int


@dataclass(frozen=True)
class EllipticFParams(_Params):
    bn: BaseNome
    s1: complex
    s2: complex
    t1: complex
    t2: complex
    r1: int
    r2: int

    def evaluator(self, min_abs=0.0):
        return Evaluator(self.bn, {"s1": self.s1, "s2": self.s2,
                                   "t1": self.t1, "t2": self.t2}, min_abs)

    def monos(self):
        return sym("s1"), sym("s2"), sym("t1"), sym("t2")


@dataclass(frozen=True)
class QHypergeomParams(_Params):
    """Parameters of the p = 0 matrices U and V."""

    bn: BaseNome
    s1: complex
    s2: complex
    r1: int
    r2: int

    def __post_init__(self):
        if self.bn.p != 0:
            raise ValueError("U and V are defined at p = 0")

    def evaluator(self, min_abs=0.0):
        return Evaluator(self.bn, {"s1": self.s1, "s2": self.s2}, min_abs)


@dataclass(frozen=True)
class EllipticGParams(_Params):
    """Parameters of G and H. ``d=None`` means ``d = aq/c`` exactly."""

    bn: BaseNome
    a: complex
    b: complex
    c: complex
    d: complex
    e: complex
    f: complex
    r1: int
    r2: int

    def evaluator(self, min_abs=0.0):
        vals = {k: getattr(self, k) for k in "abcef"}
        if self.d is not None:
            vals["d"] = self.d
        return Evaluator(self.bn, vals, min_abs)

    def monos(self):
        a, b, c, e, f = (sym(k) for k in "abcef")
        d = a * Q / c if self.d is None else sym("d")
        return a, b, c, d, e, f

    def lam_mono(self):
        a, b, c, d, _, _ = self.monos()
        return a ** 2 * Q ** (2 - self.r2) / (b * c * d)

    @property
    def lam(self):
        """``lambda = a^2 q^(2-r2) / (b c d)``, always recomputed."""
        return self.evaluator().num(self.lam_mono())

    def specialised(self):
        """The same point with ``d`` replaced by ``aq/c``."""
        return replace(self, d=None)


@dataclass(frozen=True)
class Matrix:
    """An immutable square matrix of TrackedValues with its provenance."""

    family: str
    r1: int
    r2: int
    params: dict
    entries: tuple

    @property
    def n(self):
        return len(self.entries)

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def rows(self):
        return [list(r) for r in self.entries]

    def to_array(self):
        import numpy as np
        return np.array([[complex(v.value) for v in row] for row in self.entries],
                        dtype=complex)

    def to_json(self):
        return json.dumps({
            "family": self.family, "r1": self.r1, "r2": self.r2,
            "params": self.params,
            "entries": [[[complex(v.mantissa).real, complex(v.mantissa).imag,
                          v.zero_order, v.exp2] for v in row] for row in self.entries],
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        entries = tuple(tuple(TrackedValue(complex(e[0], e[1]), int(e[2]),
                                           int(e[3]) if len(e) > 3 else 0)
                              for e in row) for row in d["entries"])
        return cls(d["family"], d["r1"], d["r2"], d["params"], entries)


def _two_block(family, params, r1, r2, upper, lower):
    n = r1 + r2
    rows = []
    for i in range(n):
        if i < r2:
            rows.append(tuple(upper(i, j) for j in range(n)))
        else:
            rows.append(tuple(lower(i - r2, j) for j in range(n)))
    return Matrix(family, r1, r2, params.to_dict(), tuple(rows))


# entry formulas ------------------------------------------------------------

def f_entry(ev, i, j, s1, s2, t1, t2, r1, r2):
    """``f_ij(s1, s2, t1, t2, r1, r2)`` for monomial parameters."""
    n = j - i
    qi = Q ** i
    num = ev.fac(Q, r1) * ev.facs(
        [s1 * qi, t1 * qi, t2 * qi, s1 * s2 ** 2 * Q ** (r1 - r2 + i) / (t1 * t2)], n)
    den = ev.fac(Q, r1 - n) * ev.facs(
        [Q, s1 * s2 * Q ** (i + j - 1), s1 * s2 * Q ** (r1 + 2 * i)], n)
    return ev.qpow(c2(n) + r2 * n) * num / den


def g_entry(ev, i, j, a, b, c, d, e, f, r1, r2):
    """``g_ij(a; b, c, d, e, f; r1, r2)`` for monomial parameters."""
    n = j - i
    qi = Q ** i
    sixth = a ** 3 * Q ** (r1 - r2 + i + 3) / (b * c * d * e * f)
    num = ev.fac(Q, r1) * ev.facs(
        [b * qi, c * qi, d * qi, e * qi, f * qi, sixth], n)
    den = ev.fac(Q, r1 - n) * ev.facs(
        [Q, a * Q ** (i + j), a * Q ** (r1 + 2 * i + 1)], n)
    return ev.qpow(c2(n) + r2 * n) * num / den


def u_entry(ev, i, j, s1, s2, r1, r2):
    """``u_ij(s1, s2, r1, r2)``; meaningful at p = 0."""
    n = j - i
    num = ev.fac(Q, r1) * ev.fac(s1 * Q ** i, n)
    den = ev.fac(Q, r1 - n) * ev.facs(
        [Q, s1 * s2 * Q ** (i + j - 1), s1 * s2 * Q ** (r1 + 2 * i)], n)
    return ev.qpow(c2(n)) * num / den


# builders -------------------------------------------------------------------

def build_B(p, num=complex):
    """Binomial Sylvester matrix with entries ``C(r, j-i) s^(j-i)``.

    ``num`` converts the parameters (``complex`` or an mpmath backend's ``num``).
    """
    def b(i, j, s, r):
        c = binom(r, j - i)
        return TrackedValue.of(c * s ** (j - i)) if c else TrackedValue.zero()

    return _two_block("B", p, p.r1, p.r2,
                      lambda i, j: b(i, j, num(p.s1), p.r1),
                      lambda i, j: b(i, j, num(p.s2), p.r2))


def m_entry(i, j, s1, s2, r):
    c = binom(r, j - i)
    if not c:
        return TrackedValue.zero()
    n = j - i
    den = rising(s1 + s2 + i + j - 1, n) * rising(s1 + s2 + r + 2 * i, n)
    num = c * rising(s1 + i, n)
    return TrackedValue.of(num) / TrackedValue.of(den)


def build_M(p, num=complex):
    """Hypergeometric Sylvesteresque matrix; lower rows carry ``(-1)^(j-i-r2)``."""
    s1, s2 = num(p.s1), num(p.s2)
    return _two_block(
        "M", p, p.r1, p.r2,
        lambda i, j: m_entry(i, j, s1, s2, p.r1),
        lambda i, j: (-1) ** ((j - i) % 2) * m_entry(i, j, s2, s1, p.r2))


def _f_blocks(ev, s1, s2, t1, t2, r1, r2):
    upper = lambda i, j: f_entry(ev, i, j, s1, s2, t1, t2, r1, r2)
    lower = lambda i, j: f_entry(ev, i, j, s2, s1, s1 * s2 / t1, s1 * s2 / t2, r2, r1)
    return upper, lower


def build_F(p, ev=None):
    ev = ev or p.evaluator()
    return _two_block("F", p, p.r1, p.r2, *_f_blocks(ev, *p.monos(), p.r1, p.r2))


def build_U(p, ev=None):
    ev = ev or p.evaluator()
    s1, s2 = sym("s1"), sym("s2")
    r1, r2 = p.r1, p.r2
    return _two_block(
        "U", p, r1, r2,
        lambda i, j: ev.qpow(c2(j) - c2(i)) * u_entry(ev, i, j, s1, s2, r1, r2),
        lambda i, j: TrackedValue.of((-1 / ev.num(s2)) ** (j - i))
        * u_entry(ev, i, j, s2, s1, r2, r1))


def build_V(p, ev=None):
    """V uses ``(s1/s2)^((j-i+r2)/2)`` through the per-symbol principal branch."""
    ev = ev or p.evaluator()
    s1, s2 = sym("s1"), sym("s2")
    r1, r2 = p.r1, p.r2
    return _two_block(
        "V", p, r1, r2,
        lambda i, j: u_entry(ev, i, j, s1, s2, r1, r2),
        lambda i, j: ev.tracked((s1 / s2) ** Fraction(j - i, 2))
        * u_entry(ev, i, j, s2, s1, r2, r1))


def build_G(p, ev=None):
    ev = ev or p.evaluator()
    a, b, c, d, e, f = p.monos()
    r1, r2 = p.r1, p.r2
    aq = a * Q
    return _two_block(
        "G" if p.d is not None else "G'", p, r1, r2,
        lambda i, j: g_entry(ev, i, j, a, b, c, d, e, f, r1, r2),
        lambda i, j: g_entry(ev, i, j, a, aq / b, aq / c, aq / d, aq / e, aq / f, r2, r1))


def build_H(p, ev=None):
    ev = ev or p.evaluator()
    a, b, c, d, e, f = p.monos()
    lam = p.lam_mono()
    r1, r2 = p.r1, p.r2
    aq = a * Q
    return _two_block(
        "H" if p.d is not None else "H'", p, r1, r2,
        lambda i, j: g_entry(ev, i, j, lam, lam * b / a, lam * c / a, lam * d / a, e, f, r1, r2),
        lambda i, j: g_entry(ev, i, j, lam, aq / b, aq / c, aq / d, lam * Q / e,
                             lam * Q / f, r2, r1))


def build_Gprime(p, ev=None):
    return build_G(p.specialised(), ev)


def build_Hprime(p, ev=None):
    return build_H(p.specialised(), ev)


def build_Fprime(p, ev=None):
    """F at ``(s1, s2, t1, t2) = (b, aq/b, e, f)``."""
    ev = ev or p.evaluator()
    a, b, _, _, e, f = p.monos()
    m = _two_block("F'", p, p.r1, p.r2,
                   *_f_blocks(ev, b, a * Q / b, e, f, p.r1, p.r2))
    return m


def band_zero(i, j, r1, r2):
    """Integer predicate: is entry (i, j) of F, G, U or V forced to vanish?"""
    if i < r2:
        return j < i or j > r1 + i
    i -= r2
    return j < i or j > r2 + i


__all__ = [
    "SylvesterBinomialParams", "HypergeomParams", "EllipticFParams",
    "QHypergeomParams", "EllipticGParams", "Matrix", "build_B", "build_M",
    "build_F", "build_U", "build_V", "build_G", "build_H", "build_Fprime",
    "build_Gprime", "build_Hprime", "band_zero", "f_entry", "g_entry",
    "u_entry", "rising", "binom", "c2", "ONE",
]
