import cmath
import math

import numpy as np
import pytest

from elldet import BaseNome


def cz(rng, lo=0.2, hi=2.0):
    """Log-uniform modulus in [lo, hi], uniform phase."""
    r = math.exp(rng.uniform(math.log(lo), math.log(hi)))
    return r * cmath.exp(1j * rng.uniform(0, 2 * math.pi))


def pz(rng, pmax=0.5):
    return rng.uniform(0, pmax) * cmath.exp(1j * rng.uniform(0, 2 * math.pi))


def relerr(a, b):
    a, b = complex(a), complex(b)
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def bn(rng):
    return BaseNome(cz(rng), pz(rng, 0.3))


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
