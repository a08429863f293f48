"""Modified theta functions and theta shifted factorials.

The modified Jacobi theta function is

    theta(a; p) = prod_{j>=0} (1 - a p^j)(1 - p^{j+1}/a),

and the theta shifted factorial is ``(a; q, p)_k = prod_{j<k} theta(a q^j; p)``,
with the usual reciprocal convention for negative ``k``.

Arguments may be plain numbers or :class:`Mono` monomials. A monomial in
named parameters, ``q`` and ``p`` lets exact zeros such as ``theta(q^0)`` be
recognised by integer arithmetic on the exponents instead of by comparing
floats.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .arith import FLOAT, log_abs
from .tracked import ONE, TrackedValue


class DomainError(ValueError):
    """Argument outside the domain of theta (a = 0 or |p| >= 1)."""


class NonGenericError(ValueError):
    """A theta factor came too close to a zero for a generic parameter draw."""

    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


@dataclass(frozen=True)
class BaseNome:
    """The base ``q`` and nome ``p``."""

    q: complex
    p: complex = 0j
    backend: object = field(default=FLOAT, compare=False, repr=False)

    def __post_init__(self):
        if self.q == 0:
            raise DomainError("q must be nonzero")
        if abs(self.p) >= 1:
            raise DomainError(f"|p| must be < 1, got {abs(self.p)}")


@dataclass(frozen=True)
class Mono:
    """``prod(sym**exp) * q**qexp * p**pexp`` with exact exponents.

    Symbol exponents are Fractions so half powers such as ``(s1 s2)^(1/2)``
    are representable; they evaluate through one fixed branch per symbol.
    """

    syms: tuple = ()
    qexp: int = 0
    pexp: int = 0

    @property
    def structural(self):
        """True when the monomial is a pure power of q and p."""
        return not self.syms

    def __mul__(self, other):
        if not isinstance(other, Mono):
            return NotImplemented
        if not other.syms:
            syms = self.syms
        elif not self.syms:
            syms = other.syms
        else:
            d = dict(self.syms)
            for s, e in other.syms:
                d[s] = d.get(s, 0) + e
            syms = tuple(sorted((s, _exp(e)) for s, e in d.items() if e != 0))
        return Mono(syms, self.qexp + other.qexp, self.pexp + other.pexp)

    def __truediv__(self, other):
        if not isinstance(other, Mono):
            return NotImplemented
        return self * other ** -1

    def __pow__(self, n):
        n = _exp(n)
        if type(n) is not int and (self.qexp or self.pexp):
            raise ValueError("fractional powers of q and p are not supported")
        return Mono(tuple((s, _exp(e * n)) for s, e in self.syms if e * n != 0),
                    int(self.qexp * n), int(self.pexp * n))

    def __repr__(self):
        parts = [s if e == 1 else f"{s}^{e}" for s, e in self.syms]
        if self.qexp:
            parts.append(f"q^{self.qexp}")
        if self.pexp:
            parts.append(f"p^{self.pexp}")
        return "*".join(parts) or "1"


def _exp(e):
    """Exponents are ints when integral, Fractions otherwise (cheap hashing)."""
    if type(e) is int:
        return e
    e = Fraction(e)
    return int(e) if e.denominator == 1 else e


def sym(name):
    return Mono(((name, 1),))


ONE_MONO = Mono()
Q = Mono(qexp=1)
P = Mono(pexp=1)


def _nterms(absa, absp, tail_eps, cap):
    if absp == 0:
        return 1
    big = max(abs(log_abs(absa)), 0.0)
    n = math.ceil((math.log(tail_eps) - big) / math.log(float(absp)))
    return max(1, min(int(n), cap))


def _theta_product(a, p, backend, skip=None):
    """Truncated product; returns (mantissa, number of exact zero factors).

    ``skip`` = ("lo"|"hi", j) omits a factor known to vanish structurally.
    """
    n = _nterms(abs(a), abs(p), backend.tail_eps, backend.max_terms)
    out = backend.num(1)
    zeros = 0
    pj = backend.num(1)
    for j in range(n):
        lo = 1 - a * pj
        pj = pj * p
        hi = 1 - pj / a
        if skip == ("lo", j):
            lo = 1
        if skip == ("hi", j):
            hi = 1
        if lo == 0:
            zeros += 1
            lo = 1
        if hi == 0:
            zeros += 1
            hi = 1
        out = out * lo * hi
    return out, zeros


def _theta_series(y, p, backend):
    """Triple product form ``sum_n (-1)^n p^C(n,2) y^n / (p; p)_inf``.

    Converges like ``|p|^(n^2/2)``; used by the extended precision backend,
    where the few digits lost near a zero of theta are spare.
    """
    tol = backend.tail_eps
    total = backend.num(1)
    # n > 0: t_n = t_{n-1} * (-y p^(n-1))
    t, step = backend.num(1), -y
    while True:
        t = t * step
        total = total + t
        step = step * p
        if abs(t) < tol:
            break
    # n < 0: t_{-m} = t_{-m+1} * (-p^m / y)
    t, step = backend.num(1), -p / y
    while True:
        t = t * step
        total = total + t
        step = step * p
        if abs(t) < tol:
            break
    if total == 0:
        return backend.num(1), 1
    return total / backend.euler(p), 0


def _theta_value(a, p, backend):
    """theta(a; p) via the quasi-periodicity ``theta(p^k y) = (-1/y)^k p^-C(k,2) theta(y)``.

    ``y`` is taken in the annulus ``|p|^(1/2) <= |y| <= |p|^(-1/2)``, whose
    only zero of theta is ``y = 1``, so ``1 - y`` is formed without a prior
    rounding and the product converges quickly; the prefactor is carried exactly in the TrackedValue exponent.
    """
    return _theta_reduced(a, p, backend)[0]


def _theta_reduced(a, p, backend):
    """Returns ``(theta(a; p), |theta(y; p)|)`` where ``y`` is the reduced argument.

    The prefactor has modulus at least ``|p|^(1/2)``, so the second item
    measures how close ``a`` is to a zero ``p^k`` of theta.
    """
    k = 0
    if p != 0:
        la, lp = log_abs(a), log_abs(p)
        k = math.floor(la / lp + 0.5) if la != 0 else 0
    y = a if k == 0 else a / p ** k
    if getattr(backend, "series", False) and p != 0:
        m, z = _theta_series(y, p, backend)
    else:
        m, z = _theta_product(y, p, backend)
    if k == 0:
        return TrackedValue(m, z), (0.0 if z else abs(m))
    pre = TrackedValue(-1 / y) ** k * TrackedValue(p) ** (-(k * (k - 1) // 2))
    return pre * TrackedValue(m, z), (0.0 if z else abs(m))


def theta(a, p, backend=FLOAT):
    """Modified theta function ``theta(a; p)`` as a TrackedValue.

    For a plain number an exact zero is reported only when some factor is
    exactly 0.0 in floating point (``a == 1`` for instance).

    >>> theta(0.5, 0).value
    (0.5+0j)
    """
    if isinstance(a, Mono):
        if not a.structural or a.qexp:
            raise TypeError("only pure powers of p are accepted here; "
                            "use an Evaluator for other monomials")
        return Evaluator(BaseNome(1.0 + 0j, p, backend), {}).theta(a)
    if a == 0:
        raise DomainError("theta(0; p) is undefined")
    if abs(p) >= 1:
        raise DomainError(f"|p| must be < 1, got {abs(p)}")
    return _theta_value(backend.num(a), backend.num(p), backend)


def qp_factorial(a, k, bn):
    """Theta shifted factorial ``(a; q, p)_k`` for any integer ``k``.

    ``a`` may be a number or a structural :class:`Mono` such as ``Q``; the
    latter gives exact zeros, e.g. ``1/(q; q, p)_{-r} = 0``.
    """
    if isinstance(a, Mono):
        return Evaluator(bn, {}).fac(a, k)
    a = bn.backend.num(a)
    q = bn.backend.num(bn.q)
    if k >= 0:
        out = ONE
        x = a
        for _ in range(k):
            out = out * theta(x, bn.p, bn.backend)
            x = x * q
        return out
    out = ONE
    x = a
    for _ in range(-k):
        x = x / q
        out = out * theta(x, bn.p, bn.backend)
    return out.reciprocal()


def qp_factorial_multi(args, k, bn):
    """``(a_1, ..., a_r; q, p)_k``, the product over all arguments."""
    out = ONE
    for a in args:
        out = out * qp_factorial(a, k, bn)
    return out


class Evaluator:
    """Numeric evaluation of monomials, thetas and factorials at fixed values.

    ``values`` maps symbol names to numbers. Results are memoised, so one
    Evaluator should serve a single parameter point. When ``min_abs`` is
    positive, any non-structural theta whose modulus falls below it raises
    :class:`NonGenericError`; samplers use this to reject draws near zeros.
    """

    def __init__(self, bn, values, min_abs=0.0):
        self.bn = bn
        self.backend = bn.backend
        self.values = {k: self.backend.num(v) for k, v in values.items()}
        self.q = self.backend.num(bn.q)
        self.p = self.backend.num(bn.p)
        self.min_abs = min_abs
        self._logs = {}
        self._num = {}
        self._theta = {}
        self._fac = {}
        self._runs = {}
        self.smallest = math.inf
        self.smallest_factor = None
        self.condition = 1.0

    def note_condition(self, k):
        """Record the condition number of a determinant or sum built here."""
        self.condition = max(self.condition, k)

    def num(self, m):
        """Numeric value of a monomial (or pass a number through)."""
        if not isinstance(m, Mono):
            return self.backend.num(m)
        try:
            return self._num[m]
        except KeyError:
            pass
        out = self.backend.num(1)
        for s, e in m.syms:
            v = self.values[s]
            if type(e) is int:
                out = out * v ** e
            else:
                lg = self._logs.get(s)
                if lg is None:
                    lg = self._logs[s] = self.backend.log(v)
                out = out * self.backend.exp(lg * e.numerator / e.denominator)
        if m.qexp:
            out = out * self.q ** m.qexp
        if m.pexp:
            if self.p == 0:
                raise DomainError("p power of zero nome")
            out = out * self.p ** m.pexp
        self._num[m] = out
        return out

    def tracked(self, m):
        """A monomial or number as a TrackedValue."""
        return TrackedValue.of(self.num(m))

    def theta(self, m):
        if not isinstance(m, Mono):
            return theta(m, self.p, self.backend)
        try:
            return self._theta[m]
        except KeyError:
            pass
        a = self.num(m)
        if m.structural and m.qexp == 0:
            # a = p^n: exactly one factor of the product vanishes
            n = m.pexp
            skip = ("lo", -n) if n <= 0 else ("hi", n - 1)
            mant, _ = _theta_product(a, self.p, self.backend, skip)
            out = TrackedValue(mant, 1)
        else:
            if a == 0:
                raise DomainError(f"theta argument {m!r} evaluates to 0")
            out = self._screened(a, m)
        self._theta[m] = out
        return out

    def _screened(self, a, label):
        out, size = _theta_reduced(a, self.p, self.backend)
        if size < self.smallest:
            self.smallest = size
            self.smallest_factor = label
        if size < self.min_abs:
            raise NonGenericError(
                f"|theta({label!r})| = {float(size):.3g} below {self.min_abs:g}",
                factor=repr(label))
        return out

    def _run(self, m, k):
        """Prefix products of ``theta(m q^j)``, j in 0..k-1 (k >= 0)."""
        run = self._runs.get(m)
        if run is not None and len(run) > k:
            return run
        if m.structural:
            run = [ONE]
            for j in range(k):
                run.append(run[-1] * self.theta(m * Q ** j))
        else:
            # a generic monomial never hits a structural zero along q-shifts
            run = run or [ONE]
            a = self.num(m)
            x = a * self.q ** (len(run) - 1)
            for _ in range(len(run) - 1, k):
                run.append(run[-1] * self._screened(x, m))
                x = x * self.q
        self._runs[m] = run
        return run

    def fac(self, m, k):
        """``(m; q, p)_k`` for a monomial ``m`` and any integer ``k``."""
        if not isinstance(m, Mono):
            return qp_factorial(m, k, self.bn)
        if k >= 0:
            return self._run(m, k)[k]
        key = (m, k)
        try:
            return self._fac[key]
        except KeyError:
            pass
        base = m * Q ** k
        out = self._run(base, -k)[-k].reciprocal()
        self._fac[key] = out
        return out

    def facs(self, ms, k):
        out = ONE
        for m in ms:
            out = out * self.fac(m, k)
        return out

    def thetas(self, ms):
        out = ONE
        for m in ms:
            out = out * self.theta(m)
        return out

    def qpow(self, n):
        """``q**n`` as a TrackedValue."""
        return TrackedValue(self.q) ** n


def reflect_identities_check(a, n, bn, tolerance=1e-10):
    """Check ``(a)_n = (pa)_n (-a)^n q^C(n,2)`` and ``(a)_n = (q^(1-n)/a)_n (-a)^n q^C(n,2)``."""
    from .report import IdentityId, IdentityReport, SubCheck

    ev = Evaluator(bn, {"a": a})
    x = sym("a")
    lhs = ev.fac(x, n)
    common = TrackedValue.of((-ev.num(x)) ** n * ev.q ** (n * (n - 1) // 2))
    reflected = ev.fac(Q ** (1 - n) / x, n) * common
    checks = [SubCheck("reflection", lhs, reflected, tolerance)]
    if bn.p != 0:
        shifted = ev.fac(P * x, n) * common
        checks.append(SubCheck("p_shift", lhs, shifted, tolerance))
    echo = {"a": [complex(a).real, complex(a).imag], "n": n,
            "q": [complex(bn.q).real, complex(bn.q).imag],
            "p": [complex(bn.p).real, complex(bn.p).imag]}
    return IdentityReport.build(IdentityId.REFLECT, checks, echo)
