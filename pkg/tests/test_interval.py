from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from hzmarket.numerics.interval import Interval, hull

fr = st.builds(F, st.integers(-40, 40), st.integers(1, 9))


@st.composite
def boxed(draw):
    x = draw(fr)
    lo = x - draw(st.builds(F, st.integers(0, 5), st.integers(1, 7)))
    hi = x + draw(st.builds(F, st.integers(0, 5), st.integers(1, 7)))
    return x, Interval(lo, hi)


@given(boxed(), boxed())
def test_arith_contains_point(a, b):
    (x, X), (y, Y) = a, b
    assert (X + Y).contains(x + y)
    assert (X - Y).contains(x - y)
    assert (X * Y).contains(x * y)
    if not Y.contains(0):
        assert (X / Y).contains(x / y)


@given(boxed(), st.integers(0, 4))
def test_pow_contains(a, k):
    x, X = a
    assert (X ** k).contains(x ** k)


@given(boxed(), boxed(), boxed())
def test_nested_expression(a, b, c):
    (x, X), (y, Y), (z, Z) = a, b, c
    assert (X * X - Y * Z + 3).contains(x * x - y * z + 3)


def test_even_power_of_straddling_interval():
    assert Interval(-1, 2) ** 2 == Interval(0, 4)


def test_sign_and_queries():
    I = Interval(F(1, 3), F(1, 2))
    assert I.sign() == 1
    assert I.width == F(1, 6)
    assert I.mid == F(5, 12)
    assert Interval(0).sign() == 0
    assert Interval(-2, -1).sign() == -1


def test_empty_rejected():
    with pytest.raises(ValueError):
        Interval(1, 0)


def test_hull():
    assert hull(Interval(0, 1), F(3), Interval(-1, 0)) == Interval(-1, 3)
