import numpy as np
import pytest

from elldet import (
    BaseNome, EllipticFParams, EllipticGParams, HypergeomParams, Matrix, QHypergeomParams,
    SylvesterBinomialParams, band_zero, build_B, build_F, build_Fprime, build_G, build_Gprime,
    build_H, build_Hprime, build_M, build_U, build_V, det_lu)
from elldet.identities import rhs_cor22, rhs_fkx
from elldet.matrices import rising

from conftest import cz, pz, relerr


def f_params(rng, r1, r2, pmax=0.5):
    return EllipticFParams(BaseNome(cz(rng), pz(rng, pmax)), *[cz(rng) for _ in range(4)], r1, r2)


def g_params(rng, r1, r2, pmax=0.5):
    return EllipticGParams(BaseNome(cz(rng), pz(rng, pmax)), *[cz(rng) for _ in range(6)], r1, r2)


def values(m):
    return np.array([[complex(v.value) for v in row] for row in m.entries])


def test_sylvester_example_matrix():
    m = build_B(SylvesterBinomialParams(1.0, 1.0, 2, 3))
    expected = [[1, 2, 1, 0, 0],
                [0, 1, 2, 1, 0],
                [0, 0, 1, 2, 1],
                [1, 3, 3, 1, 0],
                [0, 1, 3, 3, 1]]
    assert np.array_equal(values(m), expected)
    assert det_lu(m).rank_deficient


def test_sylvester_r1_zero_is_identity():
    m = build_B(SylvesterBinomialParams(0.7, -1.2j, 0, 4))
    assert np.array_equal(values(m), np.eye(4))


def test_sylvester_det(rng):
    for _ in range(10):
        s1, s2 = cz(rng), cz(rng)
        d = det_lu(build_B(SylvesterBinomialParams(s1, s2, 2, 3))).value
        assert relerr(d, (s1 - s2) ** 6) < 1e-10


def test_hypergeometric_matrix_band_and_diagonal():
    m = build_M(HypergeomParams(0.3, 0.9, 2, 3))
    for i in range(3):
        assert m[i, i].value == 1
        for j in range(5):
            if j < i or j > 2 + i:
                assert m[i, j].is_zero


def test_hypergeometric_small_cases():
    # r1 = r2 = 1 gives -1/(s1+s2+1)
    s1, s2 = 0.4 + 0.1j, 1.3
    d = det_lu(build_M(HypergeomParams(s1, s2, 1, 1))).value
    assert relerr(d, -1 / (s1 + s2 + 1)) < 1e-14
    # r1 = 2, r2 = 3: the sign is (-1)^(r1 r2) = +1
    s1, s2 = 1.0, 2.0
    expected = 1 / (rising(s1 + s2 + 4, 3) * rising(s1 + s2 + 5, 3))
    d = det_lu(build_M(HypergeomParams(s1, s2, 2, 3))).value
    assert relerr(d, expected) < 1e-12
    assert relerr(rhs_fkx(HypergeomParams(s1, s2, 2, 3)), expected) < 1e-15


@pytest.mark.parametrize("r1,r2", [(2, 2), (3, 1), (1, 4), (0, 3), (3, 0)])
def test_band_structure_and_diagonal(rng, r1, r2):
    fp, gp = f_params(rng, r1, r2), g_params(rng, r1, r2)
    up = QHypergeomParams(BaseNome(cz(rng)), cz(rng), cz(rng), r1, r2)
    for m in (build_F(fp), build_G(gp), build_U(up), build_V(up)):
        for i in range(r1 + r2):
            for j in range(r1 + r2):
                assert m[i, j].is_zero == band_zero(i, j, r1, r2), (m.family, i, j)
        for i in range(r2):
            assert abs(m[i, i].value - 1) < 1e-12


def test_f_lower_block_is_swapped_upper_block(rng):
    p = f_params(rng, 3, 2)
    swapped = EllipticFParams(p.bn, p.s2, p.s1, p.s1 * p.s2 / p.t1, p.s1 * p.s2 / p.t2, 2, 3)
    a, b = build_F(p), build_F(swapped)
    for i in range(3):
        for j in range(5):
            x, y = a[2 + i, j], b[i, j]
            assert x.zero_order == y.zero_order
            if not x.is_zero:
                assert relerr(x.value, y.value) < 1e-12


def test_u_two_by_two(rng):
    b = BaseNome(cz(rng))
    s1, s2 = cz(rng), cz(rng)
    p = QHypergeomParams(b, s1, s2, 1, 1)
    expected = -(1 / s2) / (1 - s1 * s2 * b.q)
    assert relerr(det_lu(build_U(p)).value, expected) < 1e-13
    assert relerr(rhs_cor22(p).value, expected) < 1e-13


def test_u_requires_zero_nome():
    with pytest.raises(ValueError):
        QHypergeomParams(BaseNome(0.5, 0.1), 1.0, 2.0, 1, 1)


def test_h_zero_block_at_special_d(rng):
    gp = g_params(rng, 2, 3).specialised()
    h = build_H(gp)
    for i in range(3):
        for j in range(3, 5):
            assert h[i, j].is_zero


def test_hprime_block_triangular(rng):
    for r1, r2 in [(2, 2), (3, 2), (1, 3)]:
        h = build_Hprime(g_params(rng, r1, r2))
        n = r1 + r2
        for i in range(r2):
            assert abs(h[i, i].value - 1) < 1e-12
            for j in range(i):
                assert h[i, j].is_zero
            for j in range(r2, n):
                assert h[i, j].is_zero
        for i in range(r2, n):
            for j in range(i + 1, n):
                assert h[i, j].is_zero


def test_primed_family_shapes(rng):
    gp = g_params(rng, 2, 2)
    assert build_Fprime(gp).n == build_Gprime(gp).n == 4


def test_json_round_trip(rng):
    m = build_F(f_params(rng, 2, 3))
    back = Matrix.from_json(m.to_json())
    assert back.family == m.family and (back.r1, back.r2) == (2, 3)
    for row_a, row_b in zip(m.entries, back.entries):
        for x, y in zip(row_a, row_b):
            assert x.zero_order == y.zero_order
            if not x.is_zero:
                assert x.value == y.value


def test_json_accepts_three_field_entries():
    text = '{"family": "B", "r1": 1, "r2": 0, "params": {}, "entries": [[[2.0, 0.0, 0]]]}'
    assert Matrix.from_json(text)[0, 0].value == 2


def test_params_round_trip(rng):
    for p in (f_params(rng, 2, 1), g_params(rng, 1, 2), g_params(rng, 1, 2).specialised()):
        assert type(p).from_dict(p.to_dict()) == p
