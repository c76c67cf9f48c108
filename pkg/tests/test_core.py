from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from hzmarket.core import (
    allocation_value,
    check_allocation,
    format_rational,
    parse_rational,
    sign,
    validate_market,
)
from hzmarket.errors import (
    CapacityMismatch,
    DimensionMismatch,
    EmptyMarket,
    IndeterminateSign,
    InvalidMarket,
    NegativeValue,
)
from hzmarket.numerics.interval import Interval

from _util import mk, small_fracs


def test_parse_forms():
    assert parse_rational("3/7") == F(3, 7)
    assert parse_rational(" 0.25 ") == F(1, 4)
    assert parse_rational(5) == 5


@pytest.mark.parametrize("bad", [0.5, True, "x/2", "1/0", None])
def test_parse_rejects(bad):
    with pytest.raises(InvalidMarket):
        parse_rational(bad)


def test_format_roundtrip():
    assert format_rational(F(4)) == "4"
    assert format_rational(F(-2, 6)) == "-1/3"


def test_validate_basic():
    M = mk([[2, 1], [0, 1]])
    assert (M.n, M.m) == (2, 2)
    assert M.values[0] == (F(2), F(1))
    assert M.unique_top == (True, True)
    assert M.top_item(1) == 1


def test_validate_ties_flagged():
    M = mk([[1, 1], [0, 1]])
    assert M.unique_top == (False, True)
    assert not M.all_unique_tops


def test_validate_errors():
    with pytest.raises(CapacityMismatch):
        mk([[1, 0]], [1, 1])
    with pytest.raises(NegativeValue):
        mk([["-1", 0], [0, 1]])
    with pytest.raises(EmptyMarket):
        validate_market({"values": [], "capacities": []})
    with pytest.raises(DimensionMismatch):
        validate_market({"values": [[1, 0], [0]], "capacities": [1, 1]})
    with pytest.raises(DimensionMismatch):
        validate_market({"n": 3, "values": [[1, 0], [0, 1]], "capacities": [1, 1]})
    with pytest.raises(InvalidMarket):
        validate_market({"values": [[1]]})


def test_fractional_capacities_ok():
    M = mk([[1, 2, 0]], ["1/2", "1/4", "1/4"])
    assert sum(M.capacities) == 1


def test_allocation_value():
    M = mk([[2, 1], [0, 1]])
    x = [[F(1, 2), F(1, 2)], [F(1, 3), F(2, 3)]]
    assert allocation_value(M, x, 0) == F(3, 2)
    assert allocation_value(M, x, 1) == F(2, 3)
    with pytest.raises(DimensionMismatch):
        allocation_value(M, x, 2)


def test_check_allocation():
    M = mk([[2, 1], [0, 1]])
    assert check_allocation(M, [[1, 0], [0, 1]]) == []
    probs = check_allocation(M, [[1, 0], [1, 0]])
    assert probs == ["item 0 over capacity"]
    assert check_allocation(M, [[1, 0]]) == ["dimension mismatch"]
    assert any("sums to" in p for p in check_allocation(M, [[F(1, 2), 0], [0, 1]]))


def test_sign_interval():
    assert sign(Interval(F(1, 4), F(1, 2))) == 1
    assert sign(F(-1, 3)) == -1
    with pytest.raises(IndeterminateSign):
        sign(Interval(-1, 1))


@given(st.lists(st.lists(small_fracs, min_size=2, max_size=2), min_size=2, max_size=2))
def test_validate_idempotent(rows):
    M = mk(rows)
    assert validate_market(M) == M
    assert validate_market(M.to_json()) == M
