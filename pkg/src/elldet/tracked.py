"""Complex values carrying an explicit order of vanishing."""

import math
from dataclasses import dataclass


class PoleError(ArithmeticError):
    """A value with negative zero order was used where a number is needed."""


_LO, _HI = 2.0 ** -256, 2.0 ** 256


def _normalise(m, e):
    """Move powers of two from a Python complex mantissa into ``e``.

    Mantissas are left alone while ``max(|re|, |im|)`` stays inside
    ``[2**-256, 2**256]``; outside it they are rescaled into [0.5, 1).
    """
    if type(m) is not complex:
        if type(m) is float or type(m) is int:
            m = complex(m)
        else:
            ctx = getattr(m, "context", None)
            if ctx is None:
                return m, e
            k = int(ctx.mag(m))
            if abs(k) > 256:
                m = m * ctx.ldexp(1, -k)
                e += k
            return m, e
    a = max(abs(m.real), abs(m.imag))
    if _LO <= a <= _HI:
        return m, e
    if a == 0:
        raise ValueError("mantissa must be nonzero; use TrackedValue.zero()")
    if not math.isfinite(a):
        raise OverflowError(f"non-finite mantissa {m!r}")
    _, k = math.frexp(a)
    if k:
        m = complex(math.ldexp(m.real, -k), math.ldexp(m.imag, -k))
        e += k
    return m, e


@dataclass(frozen=True, init=False)
class TrackedValue:
    """``mantissa * 2**exp2`` times an infinitesimal to the power ``zero_order``.

    The split between mantissa and exponent is not canonical; compare
    values through :attr:`value` or :meth:`scaled`, not field by field.

    ``zero_order > 0`` represents an exact zero, ``zero_order < 0`` a pole.
    Exact zero factors are never folded into the mantissa, so products and
    quotients of theta values that vanish identically stay well defined.
    The binary exponent keeps long theta products inside the double range.
    """

    mantissa: complex
    zero_order: int
    exp2: int

    def __init__(self, mantissa, zero_order=0, exp2=0):
        if mantissa == 0:
            raise ValueError("mantissa must be nonzero; use TrackedValue.zero()")
        m, e = _normalise(mantissa, exp2)
        object.__setattr__(self, "mantissa", m)
        object.__setattr__(self, "zero_order", zero_order)
        object.__setattr__(self, "exp2", e)

    @classmethod
    def of(cls, x):
        """Wrap a plain number; an exact 0 becomes a first order zero."""
        if isinstance(x, TrackedValue):
            return x
        if x == 0:
            return cls(1.0, 1)
        return cls(x, 0)

    @classmethod
    def zero(cls, order=1):
        return cls(1.0, order)

    @property
    def is_zero(self):
        return self.zero_order > 0

    @property
    def is_pole(self):
        return self.zero_order < 0

    def scaled(self, e):
        """The finite number as a plain value times ``2**-e``."""
        if self.zero_order > 0:
            return 0 * self.mantissa
        if self.zero_order < 0:
            raise PoleError(f"pole of order {-self.zero_order}")
        return _ldexp(self.mantissa, self.exp2 - e)

    @property
    def value(self):
        """The represented number: 0, the finite value, or PoleError."""
        return self.scaled(0)

    def log_abs(self):
        """Natural log of the modulus of a finite nonzero value."""
        return math.log(abs(complex(self.mantissa))) + self.exp2 * math.log(2)

    def __complex__(self):
        return complex(self.value)

    def __mul__(self, other):
        if not isinstance(other, TrackedValue):
            other = TrackedValue.of(other)
        return TrackedValue(self.mantissa * other.mantissa,
                            self.zero_order + other.zero_order,
                            self.exp2 + other.exp2)

    __rmul__ = __mul__

    def reciprocal(self):
        return TrackedValue(1 / self.mantissa, -self.zero_order, -self.exp2)

    def __truediv__(self, other):
        if not isinstance(other, TrackedValue):
            other = TrackedValue.of(other)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return TrackedValue.of(other) * self.reciprocal()

    def __pow__(self, n):
        if not isinstance(n, int):
            raise TypeError("TrackedValue powers must be integers")
        if n < 0:
            return (self ** -n).reciprocal()
        out = ONE
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def __neg__(self):
        return TrackedValue(-self.mantissa, self.zero_order, self.exp2)

    def __repr__(self):
        e = f", exp2={self.exp2}" if self.exp2 else ""
        return f"TrackedValue({self.mantissa!r}, zero_order={self.zero_order}{e})"


def _ldexp(m, k):
    if type(m) is complex:
        return complex(math.ldexp(m.real, k), math.ldexp(m.imag, k))
    if hasattr(m, "context"):
        return m * m.context.ldexp(1, k)
    return m * 2.0 ** k


ONE = TrackedValue(1.0, 0)


def tracked_prod(values):
    out = ONE
    for v in values:
        out = out * v
    return out


def tracked_sum(values):
    """Sum of tracked values sharing one infinitesimal.

    Terms of lowest order dominate; higher order terms are dropped. This is
    only meaningful when every zero and pole among the terms comes from the
    same vanishing factor, as in terminating multiple sums whose prefactor
    and summands contain the same structural theta zero. With no zeros or
    poles it is the ordinary sum, accumulated in the given order.
    """
    values = list(values)
    if not values:
        return TrackedValue.zero()
    low = min(v.zero_order for v in values)
    live = [v for v in values if v.zero_order == low]
    e = max(v.exp2 for v in live)
    total = 0
    for v in live:
        total = total + _ldexp(v.mantissa, v.exp2 - e)
    if total == 0:
        return TrackedValue.zero(low + 1)
    return TrackedValue(total, low, e)
