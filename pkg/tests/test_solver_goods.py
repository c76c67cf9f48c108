import itertools
import random
from fractions import Fraction as F

import pytest

from hzmarket.bundling import Bundle, build_bundles
from hzmarket.errors import TooManyItems
from hzmarket.solver_goods import (
    ONE,
    PriceStructure,
    certificate_key,
    classify_prices,
    enumerate_price_structures,
    hall_feasible,
    solve_fixed_goods,
    structure_bundles,
)
from hzmarket.verify import check_structural_conditions

from _util import mk

H = F(1, 2)


def _weak_orders(k):
    """Brute force: every map to ranks 0..k-1 whose image is an initial segment."""
    seen = set()
    for r in itertools.product(range(k), repeat=k):
        if set(r) == set(range(max(r) + 1)):
            seen.add(r)
    return len(seen)


@pytest.mark.parametrize("m,count", [(1, 3), (2, 13), (3, 75)])
def test_structure_counts(m, count):
    got = enumerate_price_structures(m)
    assert len(got) == count == _weak_orders(m + 1)
    assert len({s.classes for s in got}) == count


def test_structure_cap():
    with pytest.raises(TooManyItems):
        enumerate_price_structures(5)


def test_structure_bundles_pair():
    st = PriceStructure(((0,), (ONE,), (1,)))
    (b,) = structure_bundles(st)
    assert (b.j, b.k) == (0, 1)
    assert b.alpha_at((H, F(3, 2))) == H
    assert b.alpha_at((F(1, 4), F(7, 4))) == H
    assert b.den_sign == -1


def test_structure_bundles_singletons_and_none():
    assert [(b.j, b.k) for b in structure_bundles(PriceStructure(((ONE, 0, 1),)))] == [(0, None), (1, None)]
    st = PriceStructure(((0,), (1,), (ONE,)))
    assert structure_bundles(st) == []
    assert st.degenerate


def test_structure_bundles_match_build_bundles():
    rng = random.Random(4)
    for _ in range(50):
        p = [rng.choice([F(1, 3), F(1, 2), F(1), F(3, 2), F(5, 2)]) for _ in range(3)]
        st = classify_prices([float(x) for x in p], 1e-9)
        sym = [(b.j, b.k, b.alpha_at(p)) for b in structure_bundles(st)]
        real = [(b.j, b.k, b.alpha) for b in build_bundles(p)]
        assert sym == real


def test_classify():
    st = classify_prices([0.5, 1.0 + 1e-12, 2.0], 1e-9)
    assert st.label() == "p0<1=p1<p2"
    assert st.side(0) == -1 and st.side(1) == 0 and st.side(2) == 1


def test_hall_examples():
    singles = [Bundle(0), Bundle(1)]
    for meth in ("subsets", "assignment"):
        r = hall_feasible(singles, [(0,), (1,)], (1, 1), method=meth)
        assert r.feasible and r.amounts == (1, 1)
        r = hall_feasible(singles, [(0, 1), (0, 1)], (1, 1), method=meth)
        assert r.feasible
        assert not hall_feasible(singles, [(0,), ()], (1, 1), method=meth).feasible
    r = hall_feasible([Bundle(0), Bundle(1)], [(0,), (0,)], (1, 1))
    assert not r.feasible
    assert r.violating == (0,)


def test_hall_methods_agree_sample():
    rng = random.Random(2)
    prices = [(H, F(3, 2)), (1, 1), (F(1, 4), 1, F(7, 4)), (H, F(1, 4), F(3, 2), F(7, 4))]
    for _ in range(150):
        p = rng.choice(prices)
        bs = build_bundles(p)
        n = rng.randint(1, 3)
        B = [tuple(sorted(rng.sample(range(len(bs)), rng.randint(1, len(bs))))) for _ in range(n)]
        C = [F(rng.randint(0, 4), 4) for _ in p]
        C[-1] += n - sum(C)
        if C[-1] < 0:
            continue
        a = hall_feasible(bs, B, C, method="subsets")
        b = hall_feasible(bs, B, C, method="assignment")
        assert a.feasible == b.feasible


def test_solve_basic_market():
    M = mk([[2, 1], [0, 1]])
    certs = solve_fixed_goods(M)
    assert any(c.prices == (1, 1) and c.utilities == (2, 1) for c in certs)
    for c in certs:
        assert c.equilibrium and c.notes["solver"] == "fixed-goods"


def test_solve_identical_agents_family():
    M = mk([[1, 2], [1, 2]])
    certs = solve_fixed_goods(M)
    assert certs
    for c in certs:
        p1, p2 = c.prices
        assert p1 + p2 == 2 and 0 <= p1 < 1
        assert c.allocation == ((H, H), (H, H))
        assert c.utilities == (F(3, 2), F(3, 2))


def test_solve_single():
    (c,) = solve_fixed_goods(mk([[3]]))
    assert c.prices == (1,) and c.allocation == ((1,),)


def test_solve_three_items_structural():
    M = mk([[3, 1, 0], [0, 2, 1], [1, 0, 2]])
    certs = solve_fixed_goods(M)
    assert certs
    keys = [certificate_key(c) for c in certs]
    assert len(keys) == len(set(keys))
    for c in certs:
        assert all(v.ok for v in check_structural_conditions(M, c.prices, c.allocation).values())
