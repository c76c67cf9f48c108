"""Single-agent demand under unit budgets.

Two forms of the agent's program are supported: the matching form
(``sum x = 1``, the one equilibrium is defined with) and the relaxed form
(``sum x <= 1``). They differ away from equilibrium, for instance
``v = (0, 1)``, ``p = (1/2, 3/2)`` gives 1/2 versus 2/3.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from hzmarket.core import Market, row_value, sign
from hzmarket.errors import DegeneratePrices, InfeasibleDemand, PreconditionViolated
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.lp import EQ, GE, LE, LinearProgram, lp_solve

MATCHING = "matching"
RELAXED = "relaxed"


@dataclass(frozen=True)
class DemandResult:
    utility: Fraction
    alpha: Fraction
    beta: Fraction
    demand_set: tuple
    vertex_allocation: tuple


def _vertices(p, form):
    """Candidate optimal vertices as ``(support, x)`` in tie-break order."""
    m = len(p)
    out = []
    for j in range(m):
        if form == MATCHING:
            if p[j] <= 1:
                x = [Fraction(0)] * m
                x[j] = Fraction(1)
                out.append(x)
        else:
            x = [Fraction(0)] * m
            x[j] = Fraction(1) if p[j] <= 1 else 1 / p[j]
            out.append(x)
    for j in range(m):
        for k in range(m):
            if p[j] < 1 < p[k]:
                a = (p[k] - 1) / (p[k] - p[j])
                x = [Fraction(0)] * m
                x[j] = a
                x[k] = 1 - a
                out.append(x)
    if form == RELAXED:
        out.append([Fraction(0)] * m)
    return out


def _first_vertex(values, p, form, u, support):
    for x in _vertices(p, form):
        if any(x[j] and j not in support for j in range(len(p))):
            continue
        if row_value(values, x) == u:
            return tuple(x)
    raise AssertionError("no optimal vertex on the demand set")


def _argmax_set(values, p, alpha):
    scores = [v - alpha * pj for v, pj in zip(values, p)]
    best = max(scores)
    return tuple(j for j, s in enumerate(scores) if s == best), best


def _check_prices(prices):
    p = tuple(Fraction(x) for x in prices)
    if any(x < 0 for x in p):
        raise PreconditionViolated("prices must be non-negative")
    return p


def demand_lp(market: Market, i: int, prices, form: str = MATCHING) -> DemandResult:
    """Solve agent ``i``'s program by exact simplex.

    The reported ``alpha`` is the smallest optimal budget multiplier, found
    by a second LP over the dual face.
    """
    p = _check_prices(prices)
    v = market.values[i]
    m = market.m
    if form not in (MATCHING, RELAXED):
        raise ValueError(f"unknown form {form!r}")
    if form == MATCHING and min(p) > 1:
        raise InfeasibleDemand(f"agent {i}: every item costs more than the budget")
    primal = LinearProgram(m, list(v))
    primal.add(list(p), LE, 1)
    primal.add([1] * m, EQ if form == MATCHING else LE, 1)
    out = lp_solve(primal)
    if not out.optimal:
        raise InfeasibleDemand(f"agent {i}: demand program is {out.status.value}")
    u = out.value

    # dual face: beta + alpha p_j >= v_j, alpha + beta = u; minimise alpha
    dual = LinearProgram(2, [1, 0], sense="min",
                         lower=[Fraction(0), None if form == MATCHING else Fraction(0)])
    for j in range(m):
        dual.add([p[j], 1], GE, v[j])
    dual.add([1, 1], EQ, u)
    d = lp_solve(dual)
    alpha, beta = d.x
    dset, _ = _argmax_set(v, p, alpha)
    x = _first_vertex(v, p, form, u, set(dset) if u > 0 or form == MATCHING else set(range(m)))
    return DemandResult(u, alpha, beta, dset, x)


def _g(values, p, alpha, floor):
    best = max(v - alpha * pj for v, pj in zip(values, p))
    if floor and best < 0:
        best = Fraction(0)
    return alpha + best


def closed_form_utility(market: Market, i: int, prices, form: str = RELAXED) -> DemandResult:
    """Minimise the piecewise-linear convex dual ``g(alpha)`` over its breakpoints."""
    p = _check_prices(prices)
    v = market.values[i]
    m = market.m
    floor = form == RELAXED
    cands = {Fraction(0)}
    for j in range(m):
        for k in range(j + 1, m):
            if p[j] != p[k]:
                a = (v[j] - v[k]) / (p[j] - p[k])
                if a >= 0:
                    cands.add(a)
        if floor and p[j] > 0:
            cands.add(v[j] / p[j])
    if form == MATCHING and min(p) > 1:
        raise InfeasibleDemand(f"agent {i}: every item costs more than the budget")
    best_alpha, best_val = None, None
    for a in sorted(cands):
        g = _g(v, p, a, floor)
        if best_val is None or g < best_val:
            best_alpha, best_val = a, g
    dset, top = _argmax_set(v, p, best_alpha)
    beta = max(top, Fraction(0)) if floor else top
    support = set(dset) if (top > 0 or not floor) else set(range(m))
    x = _first_vertex(v, p, form, best_val, support)
    return DemandResult(best_val, best_alpha, beta, dset, x)


def two_item_demand(p_high, p_low):
    """Budget-exhausting unit mix of a dear and a cheap item."""
    if not isinstance(p_high, Interval):
        p_high = Fraction(p_high)
    if not isinstance(p_low, Interval):
        p_low = Fraction(p_low)
    if p_high == p_low:
        raise DegeneratePrices("the two prices coincide")
    if not (sign(p_low - 1) <= 0 <= sign(p_high - 1)):
        raise PreconditionViolated("need p_low <= 1 <= p_high")
    share_high = (1 - p_low) / (p_high - p_low)
    return share_high, 1 - share_high


@dataclass(frozen=True)
class GrossSubstituteReport:
    p_high: Fraction
    p_low: Fraction
    delta: Fraction
    share_high_before: Fraction
    share_high_after: Fraction
    share_low_before: Fraction
    share_low_after: Fraction
    degenerate: bool
    # d share_high / d p_low; negative whenever p_high > 1
    derivative: Fraction

    @property
    def violates(self) -> bool:
        return self.share_high_after < self.share_high_before and self.share_low_after > self.share_low_before


def gross_substitute_violation_demo(p_high, p_low, delta) -> GrossSubstituteReport:
    """Raise the cheap item's price and watch demand for the dear item fall.

    Under gross substitutes a price increase on one good never lowers demand
    for another; here it does.
    """
    p_high, p_low, delta = Fraction(p_high), Fraction(p_low), Fraction(delta)
    if not (p_low + delta < 1 < p_high) or delta < 0:
        raise PreconditionViolated("need 0 <= delta and p_low + delta < 1 < p_high")
    hb, lb = two_item_demand(p_high, p_low)
    ha, la = two_item_demand(p_high, p_low + delta)
    deriv = (1 - p_high) / (p_high - p_low) ** 2
    rep = GrossSubstituteReport(p_high, p_low, delta, hb, ha, lb, la, delta == 0, deriv)
    if delta == 0:
        assert ha == hb and la == lb
    else:
        assert rep.violates, "share of the dear item did not fall"
        assert deriv < 0
    return rep


def plc_encode(market: Market, i: int, row) -> Fraction:
    """Concave piecewise-linear value that drops once more than one unit is held."""
    v = market.values[i]
    v_star = max(v) + 1
    plain = row_value(v, row)
    total = sum(row, Fraction(0))
    over = plain + v_star * (1 - total)
    return over if sign(over - plain) < 0 else plain


def demand_optimal_value(market: Market, i: int, prices, form: str = MATCHING) -> Optional[Fraction]:
    try:
        return demand_lp(market, i, prices, form).utility
    except InfeasibleDemand:
        return None
