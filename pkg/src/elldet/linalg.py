"""Determinants, minors and block Laplace expansion over row subsets."""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .tracked import ONE, PoleError, TrackedValue, tracked_sum

PIVOT_THRESHOLD = 1e-13
_EPS64 = 2.0 ** -52


@dataclass(frozen=True)
class SubsetIndex:
    """Columns ``ks`` of the top block, their complement and the Laplace sign."""

    ks: tuple
    n: int
    complement: tuple
    sign: int

    @classmethod
    def make(cls, ks, n):
        ks = tuple(ks)
        r = len(ks)
        rest = tuple(j for j in range(n) if j not in set(ks))
        sign = -1 if (r * (r - 1) // 2 + sum(ks)) % 2 else 1
        return cls(ks, n, rest, sign)


def subsets(n, r):
    """All ``C(n, r)`` subsets of ``range(n)`` of size ``r``, lexicographic."""
    if not 0 <= r <= n:
        raise ValueError(f"need 0 <= r <= n, got r={r}, n={n}")
    for ks in itertools.combinations(range(n), r):
        yield SubsetIndex.make(ks, n)


@dataclass(frozen=True)
class DetResult:
    """Determinant with elimination diagnostics.

    ``condition`` bounds the relative error of the computed determinant in
    units of roundoff: ``sum (|L||U|)_ij |(PA)^-1|_ji`` for the computed
    factors (inf when the matrix is rank deficient). Without pivot growth
    this is the sensitivity ``sum |a_ij (A^-1)_ji|`` to entry perturbations.
    """

    value: TrackedValue
    growth_factor: float
    rank_deficient: bool
    condition: float = 1.0


def det_condition(a, lu=None):
    """``sum w_ij |(A^-1)_ji|`` with weights ``w = |a|`` or ``w = lu``.

    ``lu`` is ``|L||U|`` from an elimination of ``a``; the sum then bounds
    the effect of the elimination's backward error on the determinant.
    Computed in the precision of the entries, since a float64 inverse
    saturates near ``1/eps`` and would hide worse conditioning.
    """
    n = len(a)
    if n == 0:
        return 1.0
    if hasattr(a[0][0], "context"):
        inv = _gauss_jordan_inverse(a)
        if inv is None:
            return math.inf
        w = lu if lu is not None else [[abs(x) for x in row] for row in a]
        k = float(sum(w[i][j] * abs(inv[j][i]) for i in range(n) for j in range(n)))
        return k if math.isfinite(k) else math.inf
    arr = np.array([[complex(x) for x in row] for row in a], dtype=complex)
    w = np.abs(arr) if lu is None else np.array(lu, dtype=float)
    try:
        inv = np.linalg.inv(arr)
    except np.linalg.LinAlgError:
        return math.inf
    with np.errstate(all="ignore"):
        k = float(np.sum(w * np.abs(inv.T)))
    return k if math.isfinite(k) else math.inf


def _abs_product(low, up):
    """``|L| |U|`` for unit lower ``low`` (multipliers below the diagonal)."""
    n = len(up)
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            t = abs(up[i][j]) if j >= i else 0
            for k in range(min(i, j + 1)):
                t = t + abs(low[i][k]) * abs(up[k][j])
            out[i][j] = t
    return out


def _gauss_jordan_inverse(a):
    """Inverse with partial pivoting in the entries' own arithmetic.

    No singularity tolerance is applied (mpmath's ``inverse`` rejects the
    tiny but legitimate pivots of badly scaled theta matrices); returns
    None only on an exactly zero pivot.
    """
    n = len(a)
    w = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(a)]
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(w[i][k]))
        if w[piv][k] == 0:
            return None
        w[k], w[piv] = w[piv], w[k]
        inv_p = 1 / w[k][k]
        w[k] = [x * inv_p for x in w[k]]
        for i in range(n):
            f = w[i][k]
            if i != k and f != 0:
                w[i] = [x - f * y for x, y in zip(w[i], w[k])]
    return [row[n:] for row in w]


def _eps_of(x):
    ctx = getattr(x, "context", None)
    return float(ctx.eps) if ctx is not None else _EPS64


def _plain(entries):
    """Plain rows with binary row and column exponents split off.

    ``entry[i][j] = rows[i][j] * 2**(re[i] + ce[j])``; the exponents are
    chosen so every row and column has an entry of modulus near one, which
    keeps matrices whose entries span more than the double range usable.
    """
    vals = [[v if isinstance(v, TrackedValue) else TrackedValue.of(v) for v in row]
            for row in entries]
    if any(v.is_pole for row in vals for v in row):
        raise PoleError("matrix has a pole entry")
    re = []
    for row in vals:
        live = [v.exp2 for v in row if not v.is_zero]
        re.append(max(live) if live else 0)
    ncol = len(vals[0]) if vals else 0
    ce = []
    for j in range(ncol):
        live = [vals[i][j].exp2 - re[i] for i in range(len(vals)) if not vals[i][j].is_zero]
        ce.append(max(live) if live else 0)
    rows = [[v.scaled(re[i] + ce[j]) for j, v in enumerate(row)]
            for i, row in enumerate(vals)]
    return rows, re, ce


def _rows_of(m):
    if hasattr(m, "entries") and not hasattr(m, "shape"):
        return m.entries
    if hasattr(m, "tolist"):
        return m.tolist()
    return m


def det_lu(m, threshold=PIVOT_THRESHOLD):
    """Determinant by Gaussian elimination with partial pivoting.

    Rows and then columns are scaled to unit max-modulus before elimination
    (the scale factors are restored in the result). Every entry carries a
    budget: the largest modulus among its initial value and the updates
    subtracted from it. A pivot below ``threshold`` times its budget has
    been produced by cancellation and is treated as zero, which reports a
    rank deficient matrix with an exact-zero value. Structurally tiny
    pivots that arise without cancellation are kept.
    """
    a, re, ce = _plain(_rows_of(m))
    n = len(a)
    if n == 0:
        return DetResult(ONE, 1.0, False, 1.0)
    if any(len(row) != n for row in a):
        raise ValueError("matrix must be square")
    scale = TrackedValue(1.0, 0, sum(re) + sum(ce))
    threshold = threshold * _eps_of(a[0][0]) / _EPS64
    for i in range(n):
        s = max(abs(x) for x in a[i])
        if s == 0:
            return DetResult(TrackedValue.zero(), 1.0, True, math.inf)
        a[i] = [x / s for x in a[i]]
        scale = scale * s
    for j in range(n):
        s = max(abs(a[i][j]) for i in range(n))
        if s == 0:
            return DetResult(TrackedValue.zero(), 1.0, True, math.inf)
        for i in range(n):
            a[i][j] = a[i][j] / s
        scale = scale * s
    orig = [list(row) for row in a]
    perm = list(range(n))
    low = [[0] * n for _ in range(n)]
    budget = [[abs(x) for x in row] for row in a]
    start = max(max(row) for row in budget)
    biggest = start
    det = ONE
    for k in range(n):
        piv = max(range(k, n), key=lambda i: abs(a[i][k]))
        if abs(a[piv][k]) <= threshold * max(budget[i][k] for i in range(k, n)):
            return DetResult(TrackedValue.zero(), float(biggest / start), True, math.inf)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            budget[k], budget[piv] = budget[piv], budget[k]
            low[k], low[piv] = low[piv], low[k]
            perm[k], perm[piv] = perm[piv], perm[k]
            det = -det
        pk = a[k][k]
        det = det * TrackedValue(pk)
        rowk = a[k]
        for i in range(k + 1, n):
            factor = a[i][k] / pk
            low[i][k] = factor
            if factor == 0:
                continue
            rowi, bi = a[i], budget[i]
            for j in range(k + 1, n):
                upd = factor * rowk[j]
                rowi[j] = rowi[j] - upd
                bi[j] = max(bi[j], abs(upd))
            biggest = max(biggest, max(abs(x) for x in rowi[k + 1:]) if k + 1 < n else 0)
    cond = det_condition([orig[i] for i in perm], _abs_product(low, a))
    return DetResult(det * scale, float(biggest / start), False, cond)


def minor(m, rows, cols):
    """Fresh copy of the submatrix at ``rows`` x ``cols``."""
    a = _rows_of(m)
    return [[a[i][j] for j in cols] for i in rows]


def det_cofactor(m):
    """Naive cofactor expansion along the first row (reference oracle)."""
    a, re, ce = _plain(_rows_of(m))
    a = [[v * 2.0 ** (re[i] + ce[j]) for j, v in enumerate(row)] for i, row in enumerate(a)]
    n = len(a)
    if n == 0:
        return 1
    if n == 1:
        return a[0][0]
    total = 0
    for j in range(n):
        sub = [row[:j] + row[j + 1:] for row in a[1:]]
        total = total + (-1) ** j * a[0][j] * det_cofactor(sub)
    return total


def laplace_block_expand(m, block_rows, per_term=None, det=det_lu):
    """Signed expansion of ``det m`` along its first ``block_rows`` rows.

    ``per_term(subset, d1, d2)`` is called for every column subset with the
    two complementary minor determinants (as DetResults). Terms are summed
    in lexicographic subset order.
    """
    a = _rows_of(m)
    n = len(a)
    top = range(block_rows)
    bottom = range(block_rows, n)
    terms = []
    for s in subsets(n, block_rows):
        d1 = det(minor(a, top, s.ks))
        d2 = det(minor(a, bottom, s.complement))
        if per_term is not None:
            per_term(s, d1, d2)
        term = d1.value * d2.value
        if not term.is_zero:
            terms.append(term if s.sign > 0 else -term)
    return tracked_sum(terms)
