import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elldet import PoleError, TrackedValue
from elldet.tracked import tracked_prod, tracked_sum

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False).filter(lambda x: abs(x) > 1e-3)
nonzero = st.builds(complex, finite, finite)
orders = st.integers(min_value=0, max_value=3)


@given(nonzero, orders, nonzero, orders)
def test_product_represents_product(a, za, b, zb):
    u, v = TrackedValue(a, za), TrackedValue(b, zb)
    w = u * v
    assert w.zero_order == za + zb
    if za == zb == 0:
        assert abs(w.value - a * b) <= 1e-14 * abs(a * b)
    else:
        assert w.value == 0


@given(nonzero, st.integers(min_value=-3, max_value=3))
def test_reciprocal_involution(a, z):
    u = TrackedValue(a, z)
    r = u.reciprocal().reciprocal()
    assert r.zero_order == z
    assert abs(r.mantissa - u.mantissa) <= 1e-15 * abs(u.mantissa)


def test_zero_and_pole():
    z = TrackedValue.of(0)
    assert z.is_zero and z.value == 0
    pole = z.reciprocal()
    assert pole.is_pole
    with pytest.raises(PoleError):
        pole.value
    # an exact zero cancels against a pole of the same order
    assert (z * pole).value == 1


def test_mantissa_zero_rejected():
    with pytest.raises(ValueError):
        TrackedValue(0.0, 0)


def test_exponent_keeps_range():
    tiny = TrackedValue(1e-200) ** 5
    assert tiny.log_abs() == pytest.approx(-1000 * math.log(10), rel=1e-12)
    back = tiny * TrackedValue(1e200) ** 5
    assert abs(back.value - 1) < 1e-12


@settings(max_examples=50)
@given(st.lists(nonzero, min_size=1, max_size=8))
def test_sum_matches_plain_sum(xs):
    total = sum(xs)
    s = tracked_sum(TrackedValue.of(x) for x in xs)
    if total == 0:
        assert s.is_zero
    else:
        scale = sum(abs(x) for x in xs)
        assert abs(s.value - total) <= 1e-13 * scale


def test_sum_keeps_lowest_order():
    s = tracked_sum([TrackedValue(2.0, 1), TrackedValue(3.0, 1), TrackedValue(7.0, 2)])
    assert s.zero_order == 1 and s.mantissa == 5


def test_prod_empty_is_one():
    assert tracked_prod([]).value == 1
