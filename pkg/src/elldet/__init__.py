"""Numerical verification of elliptic determinant evaluations.

Theta functions with exact-zero bookkeeping, the Sylvester-type matrix
families, LU and block Laplace determinants, closed-form right-hand sides
and a randomised harness that checks every identity on sampled parameters.
"""

from .arith import FLOAT, FloatBackend, MpBackend
from .core import (
    P, Q, BaseNome, DomainError, Evaluator, Mono, NonGenericError, qp_factorial,
    qp_factorial_multi, sym, theta)
from .linalg import DetResult, SubsetIndex, det_cofactor, det_lu, laplace_block_expand, subsets
from .matrices import (
    EllipticFParams, EllipticGParams, HypergeomParams, Matrix, QHypergeomParams,
    SylvesterBinomialParams, band_zero, build_B, build_F, build_Fprime, build_G,
    build_Gprime, build_H, build_Hprime, build_M, build_U, build_V)
from .report import ANCHORS, IdentityId, IdentityReport, rel_residual
from .tracked import PoleError, TrackedValue

__version__ = "0.1.0"
