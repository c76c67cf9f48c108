from fractions import Fraction as F

import pytest

from hzmarket.baselines.mechanisms import OrdinalProfile, mechanism_report, ps_interim, rsd_interim
from hzmarket.errors import NonUnitCapacities, TooManyAgents

from _util import mk

T = F(1, 3)
E = F(1, 4)
EPS3 = mk([[1, E, 0], [1, 1 - E, 0], [1, 1 - E, 0]])


def test_rsd_four_agents():
    prof = OrdinalProfile.from_partial([[0, 1], [1, 0], [0, 1], [1, 0]], 4)
    M = mk(prof.to_values())
    x = rsd_interim(M, prof)
    assert x[0][1] > 0 and x[1][0] > 0
    assert x[0][1] == x[1][0] == F(1, 12)
    for row in x:
        assert sum(row) == 1


def test_rsd_epsilon_example():
    assert rsd_interim(EPS3) == ((T, T, T),) * 3


def test_rsd_single():
    # unit capacities with one agent leave a single item
    assert rsd_interim(mk([[5]])) == ((1,),)


def test_rsd_refusals():
    with pytest.raises(NonUnitCapacities):
        rsd_interim(mk([[1, 0], [0, 1]], [F(3, 2), F(1, 2)]))
    with pytest.raises(TooManyAgents):
        rsd_interim(mk([[1] * 9] * 9))


def test_ps_identical():
    M = mk([[3, 2, 1]] * 3)
    assert ps_interim(M) == ((T, T, T),) * 3


def test_ps_disjoint_tops():
    M = mk([[1, 0], [0, 1]])
    assert ps_interim(M) == ((1, 0), (0, 1))


def test_ps_shared_top():
    M = mk([[2, 1], [2, 1]])
    h = F(1, 2)
    assert ps_interim(M) == ((h, h), (h, h))


def test_ps_breakpoints():
    # agents 0 and 1 race for item 0, agent 2 eats item 1 alone and then joins item 2
    M = mk([[3, 2, 1], [3, 1, 2], [1, 3, 2]])
    x = ps_interim(M)
    assert x[0][0] == x[1][0] == F(1, 2)
    assert x[2][1] + x[0][1] == 1
    assert all(sum(r) == 1 for r in x)


def test_profile_from_market_ties_by_index():
    assert OrdinalProfile.from_market(mk([[1, 2, 2]], [0, 1, 0])).orders == ((1, 2, 0),)


def test_report_epsilon_example():
    rep = mechanism_report(EPS3)
    assert not rep.row("rsd").pareto_efficient
    assert rep.row("rsd").pareto_gain > 0
    eq = rep.row("equilibrium")
    assert eq.pareto_efficient and eq.envy_free


def test_report_disjoint_tops():
    M = mk([[2, 1, 0], [0, 2, 1], [1, 0, 2]])
    rep = mechanism_report(M)
    allocs = {r.name: r.allocation for r in rep.rows}
    assert allocs["rsd"] == allocs["ps"] == allocs["equilibrium"]


def test_report_single():
    rep = mechanism_report(mk([[4]]))
    assert [r.allocation for r in rep.rows] == [((1,),)] * 3
    assert rep.to_json()["mechanisms"][0]["utilities"] == ["4"]
