from fractions import Fraction as F

import numpy as np
import pytest

from hzmarket.baselines.oracle import (
    clearing_residual,
    game_oracle,
    grid_oracle,
    market_maker_value,
    matching_demand,
    matching_optimum,
)
from hzmarket.errors import TooManyItems

from _util import mk

BASIC = mk([[2, 1], [0, 1]])
SAME = mk([[1, 2], [1, 2]])


def test_market_maker_value():
    X = np.array([[1.0, 0.0], [1.0, 0.0]])
    C = np.ones(2)
    assert market_maker_value(X, C, 2) == 2.0  # all weight on the over-demanded item
    assert market_maker_value(np.eye(2), C, 2) == 0.0


def test_clearing_residual_ignores_free_surplus():
    X = np.array([[0.5, 0.0]])
    assert clearing_residual(X, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0
    assert clearing_residual(X, np.array([1.0, 0.0]), np.array([1.0, 1.0])) == 0.5


def test_matching_optimum():
    assert matching_optimum(np.array([0.0, 1.0]), np.array([0.5, 1.5])) == pytest.approx(0.5)
    assert matching_optimum(np.array([2.0, 1.0]), np.array([1.0, 1.0])) == 2.0


def test_matching_demand_rows():
    X = matching_demand(np.array([[0.0, 1.0]]), np.array([0.5, 1.5]), 1e-4)
    assert X.sum() == pytest.approx(1.0)
    assert X @ np.array([0.5, 1.5]) == pytest.approx(1.0)
    assert matching_demand(np.array([[1.0]]), np.array([2.0]), 0.1).sum() == 0.0


def test_game_oracle_basic():
    a = game_oracle(BASIC, eta=0.125, rounds=10_000, restarts=8)
    assert float(a.residual) < 2 ** -10
    assert np.allclose(a.u, [2, 1], atol=1e-3)
    assert all(g >= 0 for g in a.gaps)


def test_game_oracle_single():
    a = game_oracle(mk([[3]]))
    assert a.residual == 0
    assert a.p[0] == pytest.approx(1.0, abs=1e-6)


def test_game_oracle_family():
    a = game_oracle(SAME)
    assert float(a.residual) < 2 ** -10
    assert a.p.sum() == pytest.approx(2.0, abs=1e-3)


def test_grid_basic():
    cl = grid_oracle(BASIC)
    assert min(c.distance((2, 1)) for c in cl) <= 2 ** -6
    # (1/2, 3/2) is not an equilibrium: no accepted point near it
    for c in cl:
        assert np.abs(c.prices - [0.5, 1.5]).max(axis=1).min() > 2 ** -6 or c.distance((F(1, 2), 1)) > 0.25


def test_grid_family_line():
    cl = grid_oracle(SAME)
    assert cl
    pts = np.vstack([c.prices for c in cl])
    near = np.abs(pts.sum(axis=1) - 2) <= 2 ** -5
    assert near.any()
    assert (pts[near, 0] < 1 + 2 ** -5).all()
    # no accepted point with both prices clearly above 1
    assert not ((pts > 1 + 2 ** -3).all(axis=1)).any()


def test_grid_single_item():
    cl = grid_oracle(mk([[3]]))
    assert min(c.distance((3,)) for c in cl) == 0


def test_grid_refuses_three_items():
    with pytest.raises(TooManyItems):
        grid_oracle(mk([[1, 0, 0]] * 3))
