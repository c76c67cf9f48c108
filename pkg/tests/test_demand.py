from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from hzmarket.demand import (
    MATCHING,
    RELAXED,
    closed_form_utility,
    demand_lp,
    gross_substitute_violation_demo,
    plc_encode,
    two_item_demand,
)
from hzmarket.errors import DegeneratePrices, InfeasibleDemand

from _util import mk, pos_fracs, small_fracs

H = F(1, 2)
P = (H, F(3, 2))


def one(v):
    """Single agent facing ``v``; capacities put all mass on item 0."""
    return mk([v], [1] + [0] * (len(v) - 1))


def test_relaxed_example():
    d = demand_lp(one([0, 1]), 0, P, RELAXED)
    assert d.utility == F(2, 3)
    assert d.vertex_allocation == (0, F(2, 3))


def test_matching_example():
    d = demand_lp(one([0, 1]), 0, P, MATCHING)
    assert d.utility == H
    assert d.vertex_allocation == (H, H)


def test_matching_uniform_prices():
    d = demand_lp(one([3, 7, 7, 1]), 0, (1, 1, 1, 1), MATCHING)
    assert d.utility == 7
    assert d.vertex_allocation == (0, 1, 0, 0)
    assert d.demand_set[0] == 1


def test_matching_unaffordable():
    with pytest.raises(InfeasibleDemand):
        demand_lp(one([1, 2]), 0, (2, 3), MATCHING)


def test_closed_form_examples():
    d = closed_form_utility(one([2, 1]), 0, P)
    assert (d.utility, d.alpha) == (2, 0)
    d = closed_form_utility(one([0, 1]), 0, P)
    assert (d.utility, d.alpha) == (F(2, 3), F(2, 3))
    d = closed_form_utility(one([5]), 0, (1,))
    assert (d.utility, d.alpha) == (5, 0)


def test_two_item_demand():
    assert two_item_demand(F(3, 2), H) == (H, H)
    assert two_item_demand(1, F(1, 4)) == (1, 0)
    assert two_item_demand(2, 0) == (H, H)
    with pytest.raises(DegeneratePrices):
        two_item_demand(1, 1)


def test_gs_demo():
    rep = gross_substitute_violation_demo(F(3, 2), H, F(1, 10))
    # (1 - 3/5) / (3/2 - 3/5)
    assert (rep.share_high_before, rep.share_high_after) == (H, F(4, 9))
    assert rep.violates and rep.derivative < 0
    rep = gross_substitute_violation_demo(2, 0, H)
    assert (rep.share_high_before, rep.share_high_after) == (H, F(1, 3))
    rep = gross_substitute_violation_demo(2, 0, 0)
    assert rep.degenerate and not rep.violates
    assert rep.share_high_after == rep.share_high_before


def test_plc_examples():
    M = one([2, 1])
    assert plc_encode(M, 0, (F(1, 4), F(3, 4))) == F(5, 4)
    assert plc_encode(M, 0, (1, 1)) == 0
    assert plc_encode(M, 0, (0, 0)) == 0


rows = st.lists(small_fracs, min_size=1, max_size=4)


@st.composite
def agent_prices(draw):
    v = draw(rows)
    p = draw(st.lists(pos_fracs, min_size=len(v), max_size=len(v)))
    return v, p


@given(agent_prices())
def test_closed_form_equals_lp(case):
    v, p = case
    M = one(v)
    assert closed_form_utility(M, 0, p).utility == demand_lp(M, 0, p, RELAXED).utility


@given(agent_prices())
def test_matching_below_relaxed(case):
    v, p = case
    if min(p) > 1:
        return
    M = one(v)
    dm = demand_lp(M, 0, p, MATCHING)
    dr = demand_lp(M, 0, p, RELAXED)
    assert dm.utility <= dr.utility
    if sum(dr.vertex_allocation) == 1:
        assert dm.utility == dr.utility
    # vertex sits on the demand set and spends the budget when alpha > 0
    assert all(x == 0 or j in dm.demand_set for j, x in enumerate(dm.vertex_allocation))
    if dm.alpha > 0:
        assert sum(a * b for a, b in zip(p, dm.vertex_allocation)) == 1


@given(pos_fracs, pos_fracs)
def test_two_item_identities(a, b):
    hi, lo = max(a, b) + 1, min(a, b) / (max(a, b) + 1)
    sh, sl = two_item_demand(hi, lo)
    assert sh * hi + sl * lo == 1
    assert sh + sl == 1


@given(st.lists(small_fracs, min_size=2, max_size=3),
       st.lists(st.lists(st.builds(F, st.integers(0, 6), st.integers(1, 3)), min_size=3, max_size=3),
                min_size=2, max_size=2),
       st.builds(F, st.integers(0, 8), st.integers(1, 8)))
def test_plc_midpoint_concave(v, xs, t):
    t = min(t, F(1))
    M = one(v)
    a = xs[0][: len(v)]
    b = xs[1][: len(v)]
    mid = [t * x + (1 - t) * y for x, y in zip(a, b)]
    assert plc_encode(M, 0, mid) >= t * plc_encode(M, 0, a) + (1 - t) * plc_encode(M, 0, b)


@given(st.lists(small_fracs, min_size=1, max_size=3), st.builds(F, st.integers(1, 9), st.integers(1, 9)))
def test_plc_drops_past_one_unit(v, extra):
    M = one(v)
    base = [F(0)] * len(v)
    base[0] = F(1)
    more = list(base)
    more[0] += extra
    assert plc_encode(M, 0, more) < plc_encode(M, 0, base)
