"""Equilibrium checking, efficiency and envy audits, and canonical allocations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from hzmarket.bundling import build_bundles, decompose_allocation, optimum_bundles
from hzmarket.core import DEFAULT_EPS, Market, format_rational, midpoint, row_value, sign
from hzmarket.demand import MATCHING, demand_lp
from hzmarket.errors import (
    DimensionMismatch,
    IndeterminateSign,
    InfeasibleDemand,
    NotAnEquilibrium,
)
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.lp import EQ, LE, LinearProgram, lp_solve

EXACT = "exact"
CERTIFIED = "certified"

VERDICT_ORDER = ("feasible", "fully_allocated", "budget", "optimal", "prices_nonnegative")


def scalar_json(x):
    if isinstance(x, Interval):
        return {"lo": format_rational(x.lo), "hi": format_rational(x.hi)}
    return format_rational(Fraction(x))


@dataclass(frozen=True)
class Verdict:
    name: str
    ok: bool
    witness: Optional[dict] = None

    def to_json(self):
        out = {"ok": self.ok}
        if self.witness is not None:
            out["witness"] = self.witness
        return out


@dataclass(frozen=True)
class EquilibriumCertificate:
    prices: tuple
    allocation: tuple
    utilities: tuple
    mode: str
    eps: Optional[Fraction]
    verdicts: tuple
    notes: dict = field(default_factory=dict)

    @property
    def equilibrium(self) -> bool:
        return all(v.ok for v in self.verdicts)

    def verdict(self, name) -> Verdict:
        return next(v for v in self.verdicts if v.name == name)

    def failures(self):
        return [v for v in self.verdicts if not v.ok]

    def to_json(self) -> dict:
        out = {
            "equilibrium": self.equilibrium,
            "mode": self.mode,
            "prices": [scalar_json(p) for p in self.prices],
            "allocation": [[scalar_json(x) for x in row] for row in self.allocation],
            "utilities": [scalar_json(u) for u in self.utilities],
            "verdicts": {v.name: v.to_json() for v in self.verdicts},
        }
        if self.mode == CERTIFIED:
            out["eps"] = format_rational(self.eps)
        if self.notes:
            out["notes"] = self.notes
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2)


# --- tolerant comparisons ----------------------------------------------------

class _Judge:
    """Exact comparisons, or eps-tolerant ones on intervals."""

    def __init__(self, mode, eps):
        self.mode = mode
        self.eps = eps

    def zero(self, r) -> bool:
        if isinstance(r, Interval):
            if -self.eps < r.lo and r.hi < self.eps:
                return True
            if r.lo >= self.eps or r.hi <= -self.eps:
                return False
            raise IndeterminateSign(f"residual [{float(r.lo)}, {float(r.hi)}] too wide for eps")
        if self.mode == CERTIFIED:
            return abs(r) < self.eps
        return r == 0

    def nonneg(self, r) -> bool:
        if isinstance(r, Interval):
            if r.lo > -self.eps:
                return True
            if r.hi <= -self.eps:
                return False
            raise IndeterminateSign(f"residual [{float(r.lo)}, {float(r.hi)}] too wide for eps")
        if self.mode == CERTIFIED:
            return r > -self.eps
        return r >= 0


def _dims(market, prices, allocation):
    if len(prices) != market.m:
        raise DimensionMismatch(f"{len(prices)} prices for {market.m} items")
    if len(allocation) != market.n or any(len(r) != market.m for r in allocation):
        raise DimensionMismatch("allocation must be n x m")


def _certified_demand_witness(market, i, prices, u, judge):
    """Best matching-form vertex at interval prices, if it beats ``u`` by more than eps."""
    v = market.values[i]
    m = market.m
    # a price within eps of 1 is read as exactly 1
    sides = [0 if judge.zero(p - 1) else sign(p - 1) for p in prices]
    if all(s > 0 for s in sides):
        return ("infeasible", None)
    for j in range(m):
        if sides[j] <= 0 and not judge.nonneg(u - v[j]):
            x = [Fraction(0)] * m
            x[j] = Fraction(1)
            return (v[j], x)
    for j in range(m):
        for k in range(m):
            if sides[j] < 0 < sides[k]:
                a = (prices[k] - 1) / (prices[k] - prices[j])
                val = a * v[j] + (1 - a) * v[k]
                if not judge.nonneg(u - val):
                    x = [Fraction(0)] * m
                    x[j], x[k] = a, 1 - a
                    return (val, x)
    return None, None


def verify_equilibrium(market: Market, prices, allocation, mode: str = EXACT, eps=None) -> EquilibriumCertificate:
    """Check ``(prices, allocation)`` against the equilibrium definition.

    Conditions are checked in order: feasibility, full allocation, budgets,
    per-agent optimality in the matching-form demand program, nonnegative
    prices. In certified mode residuals within ``eps`` of zero count as zero.
    """
    _dims(market, prices, allocation)
    inexact = any(isinstance(x, Interval) for x in prices) or any(
        isinstance(x, Interval) for r in allocation for x in r)
    if inexact:
        mode = CERTIFIED
    if mode not in (EXACT, CERTIFIED):
        raise ValueError(f"unknown mode {mode!r}")
    eps = (DEFAULT_EPS if eps is None else Fraction(eps)) if mode == CERTIFIED else None
    judge = _Judge(mode, eps)
    n, m = market.n, market.m
    prices = tuple(p if isinstance(p, Interval) else Fraction(p) for p in prices)
    allocation = tuple(tuple(x if isinstance(x, Interval) else Fraction(x) for x in r) for r in allocation)
    utilities = tuple(row_value(market.values[i], allocation[i]) for i in range(n))
    verdicts = []

    bad = None
    for i in range(n):
        for j in range(m):
            if not judge.nonneg(allocation[i][j]):
                bad = {"agent": i, "item": j, "residual": scalar_json(allocation[i][j])}
                break
        if bad is None:
            r = sum(allocation[i], Fraction(0)) - 1
            if not judge.zero(r):
                bad = {"agent": i, "residual": scalar_json(r)}
        if bad:
            break
    if bad is None:
        for j in range(m):
            col = sum((allocation[i][j] for i in range(n)), Fraction(0))
            if not judge.nonneg(market.capacities[j] - col):
                bad = {"item": j, "residual": scalar_json(col - market.capacities[j])}
                break
    verdicts.append(Verdict("feasible", bad is None, bad))

    bad = None
    for j in range(m):
        col = sum((allocation[i][j] for i in range(n)), Fraction(0))
        if not judge.zero(col - market.capacities[j]):
            bad = {"item": j, "residual": scalar_json(col - market.capacities[j])}
            break
    verdicts.append(Verdict("fully_allocated", bad is None, bad))

    bad = None
    for i in range(n):
        spend = row_value(prices, allocation[i])
        if not judge.nonneg(1 - spend):
            bad = {"agent": i, "residual": scalar_json(spend - 1)}
            break
    verdicts.append(Verdict("budget", bad is None, bad))

    bad = None
    negative = [j for j, p in enumerate(prices) if not judge.nonneg(p)]
    for i in range(n):
        if negative:
            bad = {"reason": f"undefined: item {negative[0]} has a negative price"}
            break
        if mode == EXACT:
            try:
                d = demand_lp(market, i, prices, MATCHING)
            except InfeasibleDemand:
                bad = {"agent": i, "reason": "no affordable unit"}
                break
            if d.utility != utilities[i]:
                bad = {"agent": i, "improving": [scalar_json(x) for x in d.vertex_allocation],
                       "value": scalar_json(d.utility), "current": scalar_json(utilities[i])}
                break
        else:
            val, x = _certified_demand_witness(market, i, prices, utilities[i], judge)
            if val == "infeasible":
                bad = {"agent": i, "reason": "no affordable unit"}
                break
            if x is not None:
                bad = {"agent": i, "improving": [scalar_json(t) for t in x],
                       "value": scalar_json(val), "current": scalar_json(utilities[i])}
                break
    verdicts.append(Verdict("optimal", bad is None, bad))

    bad = None
    for j, p in enumerate(prices):
        if not judge.nonneg(p):
            bad = {"item": j, "residual": scalar_json(p)}
            break
    verdicts.append(Verdict("prices_nonnegative", bad is None, bad))

    return EquilibriumCertificate(prices, allocation, utilities, mode, eps, tuple(verdicts))


# --- audits -----------------------------------------------------------------

@dataclass(frozen=True)
class ParetoReport:
    efficient: bool
    gain: Fraction
    witness: Optional[tuple] = None


def check_pareto_efficient(market: Market, allocation) -> ParetoReport:
    """LP over feasible ``y``: maximise total weak improvement over ``x``."""
    n, m = market.n, market.m
    nv = n * m + n
    obj = [0] * (n * m) + [1] * n
    lp = LinearProgram(nv, obj)
    for i in range(n):
        row = [0] * nv
        for j in range(m):
            row[i * m + j] = 1
        lp.add(row, EQ, 1)
    for j in range(m):
        row = [0] * nv
        for i in range(n):
            row[i * m + j] = 1
        lp.add(row, LE, market.capacities[j])
    for i in range(n):
        row = [0] * nv
        for j in range(m):
            row[i * m + j] = market.values[i][j]
        row[n * m + i] = -1
        lp.add(row, EQ, row_value(market.values[i], [midpoint(x) for x in allocation[i]]))
    out = lp_solve(lp)
    if out.value == 0:
        return ParetoReport(True, Fraction(0))
    y = tuple(tuple(out.x[i * m:(i + 1) * m]) for i in range(n))
    return ParetoReport(False, out.value, y)


@dataclass(frozen=True)
class EnvyReport:
    envy_free: bool
    witness: Optional[tuple] = None  # (envious agent, envied agent, own value, other value)


def check_envy_free(market: Market, allocation) -> EnvyReport:
    for i in range(market.n):
        own = row_value(market.values[i], allocation[i])
        for k in range(market.n):
            if k == i:
                continue
            other = row_value(market.values[i], allocation[k])
            if sign(other - own) > 0:
                return EnvyReport(False, (i, k, own, other))
    return EnvyReport(True)


# --- structural conditions ---------------------------------------------------

def check_structural_conditions(market: Market, prices, allocation) -> dict:
    """The four bundle-level conditions that characterise budget-exhausting equilibria.

    Returns ``{name: Verdict}`` for ``fully_allocated``, ``unit_rows``,
    ``exact_spend`` and ``optimum_bundles``. The last one is undefined (and
    reported false) for an agent whose spend is not exactly 1.
    """
    n, m = market.n, market.m
    out = {}
    bad = None
    for j in range(m):
        col = sum((allocation[i][j] for i in range(n)), Fraction(0))
        if col != market.capacities[j]:
            bad = {"item": j, "residual": scalar_json(col - market.capacities[j])}
            break
    out["fully_allocated"] = Verdict("fully_allocated", bad is None, bad)
    bad = None
    for i in range(n):
        r = sum(allocation[i], Fraction(0)) - 1
        if r != 0:
            bad = {"agent": i, "residual": scalar_json(r)}
            break
    out["unit_rows"] = Verdict("unit_rows", bad is None, bad)
    spend_bad = {}
    for i in range(n):
        r = row_value(prices, allocation[i]) - 1
        if r != 0:
            spend_bad[i] = r
    first = min(spend_bad) if spend_bad else None
    out["exact_spend"] = Verdict(
        "exact_spend", not spend_bad,
        None if first is None else {"agent": first, "residual": scalar_json(spend_bad[first])})
    bundles = build_bundles(prices)
    bad = None
    for i in range(n):
        if i in spend_bad or sum(allocation[i], Fraction(0)) != 1:
            bad = {"agent": i, "reason": "undefined: row is not a unit that spends exactly 1"}
            break
        opt = {bundles[c] for c in optimum_bundles(market, i, bundles)}
        for b, amount in decompose_allocation(prices, allocation[i]):
            if amount > 0 and b not in opt:
                bad = {"agent": i, "bundle": b.label()}
                break
        if bad:
            break
    out["optimum_bundles"] = Verdict("optimum_bundles", bad is None, bad)
    return out


# --- canonical form ----------------------------------------------------------

def _tight_items(market, prices, allocation):
    """Per agent: items of some optimum bundle (S/T sides) and optimum singletons (H)."""
    bundles = build_bundles(prices)
    tight = []
    for i in range(market.n):
        opt = optimum_bundles(market, i, bundles)
        items = set()
        single = set()
        for c in opt:
            b = bundles[c]
            if b.is_pair:
                items.update(b.items)
            else:
                single.add(b.j)
        tight.append((items, single))
    return tight


def _side_order(prices, items, side):
    sel = [j for j in items if sign(prices[j] - 1) == side]
    return sorted(sel, key=lambda j: (prices[j], j))


def _trade_once(x, prices, i, j, L):
    """One three-item exchange on the ordered list ``L``; returns the potential before or None."""
    pos = {it: k for k, it in enumerate(L)}
    owned_i = [it for it in L if x[i][it] > 0]
    if len(owned_i) < 2:
        return None
    lo, hi = owned_i[0], owned_i[-1]
    inside_j = [it for it in L if pos[lo] < pos[it] < pos[hi] and x[j][it] > 0]
    if not inside_j:
        return None
    phi = pos[hi] - pos[lo] + len(inside_j)
    r = inside_j[0]
    pk, pz, pr = prices[lo], prices[hi], prices[r]
    beta = Fraction(1) if pk == pz else (pz - pr) / (pz - pk)
    limits = [x[j][r]]
    if beta > 0:
        limits.append(x[i][lo] / beta)
    if beta < 1:
        limits.append(x[i][hi] / (1 - beta))
    t = min(limits)
    x[i][lo] -= beta * t
    x[i][hi] -= (1 - beta) * t
    x[i][r] += t
    x[j][lo] += beta * t
    x[j][hi] += (1 - beta) * t
    x[j][r] -= t
    return phi


def _potential(x, i, j, L):
    pos = {it: k for k, it in enumerate(L)}
    owned_i = [it for it in L if x[i][it] > 0]
    if len(owned_i) < 2:
        return 0
    lo, hi = owned_i[0], owned_i[-1]
    return pos[hi] - pos[lo] + sum(1 for it in L if pos[lo] < pos[it] < pos[hi] and x[j][it] > 0)


def _swap_h(x, i, j, common):
    owned_j = [it for it in common if x[j][it] > 0]
    owned_i = [it for it in common if x[i][it] > 0]
    if not owned_j or not owned_i:
        return False
    a, b = min(owned_j), max(owned_i)
    if a >= b:
        return False
    t = min(x[j][a], x[i][b])
    x[j][a] -= t
    x[j][b] += t
    x[i][b] -= t
    x[i][a] += t
    return True


def canonicalize_allocation(market: Market, prices, allocation, max_rounds: int = 10000) -> tuple:
    """Trade between agent pairs until each pair shares few items.

    For agents ``i < j`` on each price side, ``i`` ends up holding only items
    between the (at most two) shared endpoints in price order and ``j`` only
    items outside; among price-1 items at most one is shared and ``i`` holds
    the lower indices. Utilities, spends and item totals are unchanged.
    """
    cert = verify_equilibrium(market, prices, allocation)
    if not cert.equilibrium:
        raise NotAnEquilibrium(f"input fails {[v.name for v in cert.failures()]}")
    prices = cert.prices
    x = [list(r) for r in cert.allocation]
    tight = _tight_items(market, prices, x)
    n = market.n
    rounds = 0
    changed = True
    while changed:
        changed = False
        for i in range(n):
            for j in range(i + 1, n):
                common = tight[i][0] & tight[j][0]
                for side in (-1, 1):
                    L = _side_order(prices, common, side)
                    while True:
                        phi = _trade_once(x, prices, i, j, L)
                        if phi is None:
                            break
                        after = _potential(x, i, j, L)
                        assert after < phi, "potential did not decrease"
                        changed = True
                        rounds += 1
                        if rounds > max_rounds:
                            raise RuntimeError("canonicalisation did not settle")
                hcommon = sorted(tight[i][1] & tight[j][1])
                while _swap_h(x, i, j, hcommon):
                    changed = True
                    rounds += 1
                    if rounds > max_rounds:
                        raise RuntimeError("canonicalisation did not settle")
    out = tuple(tuple(r) for r in x)
    for i in range(n):
        assert row_value(market.values[i], out[i]) == cert.utilities[i]
        assert row_value(prices, out[i]) == row_value(prices, cert.allocation[i])
    return out


def sharing_violations(market: Market, prices, allocation) -> list:
    """Pairs breaking the canonical sharing pattern, as ``(i, j, side, reason)``."""
    tight = _tight_items(market, prices, allocation)
    out = []
    n = market.n
    x = allocation
    for i in range(n):
        for j in range(i + 1, n):
            common = tight[i][0] & tight[j][0]
            for side, name in ((-1, "S"), (1, "T")):
                L = _side_order(prices, common, side)
                shared = [it for it in L if x[i][it] > 0 and x[j][it] > 0]
                if len(shared) > 2:
                    out.append((i, j, name, "more than two shared items"))
                if _potential(x, i, j, L) and any(
                        x[j][it] > 0 for it in L
                        if L.index(it) > min(L.index(a) for a in L if x[i][a] > 0)
                        and L.index(it) < max(L.index(a) for a in L if x[i][a] > 0)):
                    out.append((i, j, name, "higher agent holds an item inside the window"))
            hcommon = sorted(tight[i][1] & tight[j][1])
            shared = [it for it in hcommon if x[i][it] > 0 and x[j][it] > 0]
            if len(shared) > 1:
                out.append((i, j, "H", "more than one shared item"))
            own_i = [it for it in hcommon if x[i][it] > 0]
            own_j = [it for it in hcommon if x[j][it] > 0]
            if own_i and own_j and max(own_i) > min(own_j):
                out.append((i, j, "H", "index order broken"))
    return out
