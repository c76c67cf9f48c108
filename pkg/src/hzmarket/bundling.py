"""Price-1 bundles.

At equilibrium every agent can be thought of as buying one unit of
"bundles", each costing exactly 1: a single item priced at 1, or a mix of a
cheap item ``j`` (``p_j < 1``) and a dear item ``k`` (``p_k > 1``) in the
proportion that makes the mix cost 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from hzmarket.core import Market, midpoint, sign
from hzmarket.errors import (
    DecompositionFailed,
    InfeasibleBundleSystem,
    PreconditionViolated,
    UtilityMismatch,
)
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.lp import EQ, LinearProgram, lp_solve


@dataclass(frozen=True)
class Bundle:
    """Singleton ``(j,)`` or pair ``(j, k)`` with ``p_j < 1 < p_k``.

    ``alpha`` is the share of ``j`` (1 for a singleton).
    """

    j: int
    k: Optional[int] = None
    alpha: object = Fraction(1)

    @property
    def is_pair(self) -> bool:
        return self.k is not None

    @property
    def items(self) -> tuple:
        return (self.j,) if self.k is None else (self.j, self.k)

    def value(self, row):
        if self.k is None:
            return row[self.j]
        return self.alpha * row[self.j] + (1 - self.alpha) * row[self.k]

    def price(self, prices):
        return self.value(prices)

    def shares(self, m: int) -> list:
        out = [Fraction(0)] * m
        out[self.j] = self.alpha
        if self.k is not None:
            out[self.k] = 1 - self.alpha
        return out

    def label(self) -> str:
        return f"({self.j})" if self.k is None else f"({self.j},{self.k})"


@dataclass(frozen=True)
class Bundling:
    bundles: tuple
    optimum: tuple  # per agent, sorted bundle indices


@dataclass(frozen=True)
class CandidateBundle:
    agent: int
    j: int
    k: Optional[int]
    ratio: Fraction

    @property
    def is_pair(self) -> bool:
        return self.k is not None

    def price(self, prices):
        if self.k is None:
            return prices[self.j]
        return self.ratio * prices[self.j] + (1 - self.ratio) * prices[self.k]


def pair_alpha(p_j, p_k):
    return (1 - p_k) / (p_j - p_k)


def build_bundles(prices: Sequence) -> list:
    """Every price-1 bundle, ordered by first item and then second."""
    sides = [sign(p - 1) for p in prices]
    out = []
    for j, sj in enumerate(sides):
        if sj == 0:
            out.append(Bundle(j))
        elif sj < 0:
            for k, sk in enumerate(sides):
                if sk > 0:
                    out.append(Bundle(j, k, pair_alpha(prices[j], prices[k])))
    return out


def decompose_allocation(prices: Sequence, row: Sequence) -> list:
    """Rewrite a budget-exhausting unit row as ``[(Bundle, amount), ...]``.

    Greedy: the lowest-index dear item with residual mass is matched with the
    lowest-index cheap item with residual mass until one of them runs out.
    """
    m = len(prices)
    if sum(row, Fraction(0)) != 1:
        raise PreconditionViolated("row does not sum to 1")
    if sum((p * x for p, x in zip(prices, row)), Fraction(0)) != 1:
        raise PreconditionViolated("row does not spend exactly 1")
    rest = list(row)
    out = []
    for j in range(m):
        if prices[j] == 1 and rest[j] > 0:
            out.append((Bundle(j), rest[j]))
            rest[j] = Fraction(0)
    for _ in range(2 * m + 1):
        high = next((k for k in range(m) if prices[k] > 1 and rest[k] > 0), None)
        if high is None:
            break
        low = next((j for j in range(m) if prices[j] < 1 and rest[j] > 0), None)
        if low is None:
            raise DecompositionFailed("dear mass left with no cheap mass to pair")
        b = Bundle(low, high, pair_alpha(prices[low], prices[high]))
        amount = min(rest[low] / b.alpha, rest[high] / (1 - b.alpha))
        rest[low] -= amount * b.alpha
        rest[high] -= amount * (1 - b.alpha)
        out.append((b, amount))
    if any(r != 0 for r in rest):
        raise DecompositionFailed(f"unpaired residual {rest}")
    return out


def flatten_row(parts, m: int) -> list:
    x = [Fraction(0)] * m
    for b, amt in parts:
        for j, s in enumerate(b.shares(m)):
            if s:
                x[j] = x[j] + amt * s
    return x


def optimum_bundles(market: Market, i: int, bundles: Sequence, utility=None) -> tuple:
    """Indices of agent ``i``'s best bundles, checked for exchange closure."""
    if not bundles:
        return ()
    row = market.values[i]
    vals = [b.value(row) for b in bundles]
    best = max(vals, key=midpoint)
    chosen = tuple(idx for idx, v in enumerate(vals) if sign(v - best) == 0)
    if utility is not None and sign(utility - best) != 0:
        raise UtilityMismatch(f"agent {i}: claimed utility {utility}, best bundle gives {best}")
    pairs = {(bundles[c].j, bundles[c].k) for c in chosen if bundles[c].is_pair}
    for (j, k) in pairs:
        for (j2, k2) in pairs:
            assert (j, k2) in pairs and (j2, k) in pairs, "optimum bundles not exchange closed"
    return chosen


def build_bundling(market: Market, prices: Sequence, utilities=None) -> Bundling:
    bundles = tuple(build_bundles(prices))
    opt = tuple(
        optimum_bundles(market, i, bundles, None if utilities is None else utilities[i])
        for i in range(market.n)
    )
    return Bundling(bundles, opt)


def candidate_bundles(market: Market, i: int, utility) -> list:
    """Singletons worth exactly ``u`` and pairs straddling ``u`` with their ratios."""
    row = market.values[i]
    out = []
    for j, v in enumerate(row):
        if v == utility:
            out.append(CandidateBundle(i, j, None, Fraction(1)))
    for j, vj in enumerate(row):
        if not vj < utility:
            continue
        for k, vk in enumerate(row):
            if utility < vk:
                out.append(CandidateBundle(i, j, k, (utility - vk) / (vj - vk)))
    return out


def cheap_candidate_violations(market: Market, prices: Sequence, utilities: Sequence) -> list:
    """Candidate bundles priced strictly below 1; empty at a budget-exhausting equilibrium."""
    bad = []
    for i in range(market.n):
        for c in candidate_bundles(market, i, utilities[i]):
            if sign(c.price(prices) - 1) < 0:
                bad.append(c)
    return bad


def extract_allocation(bundles: Sequence, optimum: Sequence, capacities: Sequence) -> tuple:
    """Assign each agent one unit over its optimum bundles so items clear exactly.

    With interval alphas the LP runs on midpoints and the flattened shares
    are interval-valued.
    """
    n, m = len(optimum), len(capacities)
    cols = [(i, b) for i in range(n) for b in optimum[i]]
    if not cols:
        raise InfeasibleBundleSystem("no optimum bundles")
    mids = [midpoint(b.alpha) for b in bundles]

    lp = LinearProgram(len(cols))
    for i in range(n):
        lp.add([1 if ci == i else 0 for ci, _ in cols], EQ, 1)
    for j in range(m):
        row = []
        for _, b in cols:
            bb = bundles[b]
            a = mids[b]
            if bb.j == j:
                row.append(a)
            elif bb.k == j:
                row.append(1 - a)
            else:
                row.append(0)
        lp.add(row, EQ, capacities[j])
    out = lp_solve(lp)
    if not out.optimal:
        raise InfeasibleBundleSystem("bundle assignment cannot clear every item")
    alloc = [[Fraction(0)] * m for _ in range(n)]
    for (i, b), amount in zip(cols, out.x):
        if amount:
            for j, s in enumerate(bundles[b].shares(m)):
                if isinstance(s, Interval) or s:
                    alloc[i][j] = alloc[i][j] + amount * s
    return tuple(tuple(r) for r in alloc)
