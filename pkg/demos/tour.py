"""A short tour: theta values, structured matrices, determinants, identity checks."""

import numpy as np

from elldet import (
    BaseNome, EllipticFParams, MpBackend, SylvesterBinomialParams, TrackedValue, build_B,
    build_F, det_lu, theta)
from elldet import identities as idn

# theta(a; p) at a generic point, and at p = 0 where it is just 1 - a
print(theta(0.3 + 0.2j, 0.1 + 0.05j).value)
print(theta(0.3 + 0.2j, 0).value, 1 - (0.3 + 0.2j))

# theta(1; p) is an exact zero, not a tiny float
t = theta(1.0, 0.4)
print(t.zero_order, t.value)

# values carry a binary exponent, so products far outside double range survive
huge = TrackedValue(1e300) ** 4
print(huge.log_abs() / np.log(10))    # about 1200

# the binomial Sylvester-type matrix, singular when s1 = s2
m = build_B(SylvesterBinomialParams(1.0, 1.0, 2, 3))
print(np.array([[v.value.real for v in row] for row in m.entries]))
print(det_lu(m).rank_deficient)

# away from s1 = s2 the determinant is (s1 - s2)^6
s1, s2 = 0.7 + 0.2j, -0.4 + 1.1j
print(det_lu(build_B(SylvesterBinomialParams(s1, s2, 2, 3))).value.value, (s1 - s2) ** 6)

# an elliptic determinant against its closed product forms
bn = BaseNome(0.8 + 0.3j, 0.2 - 0.1j)
p = EllipticFParams(bn, 0.9 + 0.4j, 1.3 - 0.2j, 0.5 + 0.6j, -1.1 + 0.3j, 3, 2)
d = det_lu(build_F(p))
print(d.value.value, idn.rhs_thm21(p).value, idn.rhs_thm21(p, "alt").value)
print("condition", d.condition, "growth", d.growth_factor)

# the full check, which escalates precision on its own when the estimate asks for it
rep = idn.thm21_check(p)
print(rep.passed, rep.rel_residual, rep.diagnostics.get("precision", "float64"))

# the same matrix in 50 digits
hi = EllipticFParams(BaseNome(bn.q, bn.p, MpBackend(50)), p.s1, p.s2, p.t1, p.t2, 3, 2)
print(det_lu(build_F(hi)).value.value)
