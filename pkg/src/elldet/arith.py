"""Arithmetic backends.

Everything numeric in the package goes through one of these objects, so a
higher precision backend can replace 53-bit complex floats without touching
the formulas.
"""

import cmath
import math

import mpmath


class FloatBackend:
    """IEEE double precision complex arithmetic."""

    name = "float64"
    eps = 2.0 ** -52
    tail_eps = 1e-18
    max_terms = 400

    def num(self, x):
        return complex(x)

    def exp(self, z):
        return cmath.exp(z)

    def log(self, z):
        return cmath.log(z)

    def to_complex(self, x):
        return complex(x)


class MpBackend:
    """mpmath complex arithmetic at ``dps`` decimal digits."""

    max_terms = 4000
    series = True

    def __init__(self, dps=30):
        self.dps = dps
        self.ctx = mpmath.MPContext()
        self.ctx.dps = dps
        self.name = f"mpmath-{dps}"
        self.eps = float(self.ctx.eps)
        self._euler = {}
        self.tail_eps = 10.0 ** -(dps + 2)

    def num(self, x):
        if isinstance(x, complex):
            return self.ctx.mpc(x.real, x.imag)
        return self.ctx.mpc(x)

    def exp(self, z):
        return self.ctx.exp(z)

    def log(self, z):
        return self.ctx.log(z)

    def to_complex(self, x):
        return complex(x)

    def euler(self, p):
        """``(p; p)_inf``, cached per nome."""
        out = self._euler.get(p)
        if out is None:
            out = self._euler[p] = self.ctx.qp(p)
        return out


FLOAT = FloatBackend()


def log_abs(x):
    """Natural log of ``|x|`` that works for floats and mpmath numbers."""
    a = abs(x)
    if a == 0:
        return -math.inf
    try:
        return math.log(a)
    except (OverflowError, ValueError):
        return float(mpmath.log(a))
