"""Equilibria for a small number of agents.

Every agent with a two-item optimum bundle is described by its utility
``u_i`` and the price ``q_i`` of one anchor item ``g_i``. Those two numbers
fix the price it would "propose" for each other item, and an item's price
is the highest proposal. A cell fixes the anchors, who proposes the winning
price for each item and who receives each item; the resulting polynomial
system is solved near oracle seeds and every solution is verified exactly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from hzmarket.bundling import build_bundles, optimum_bundles
from hzmarket.core import Market, midpoint, sign
from hzmarket.errors import (
    IncompleteSearch,
    IndeterminateSign,
    NoSolutionFound,
    NonUniqueTopItem,
    NotAnEquilibrium,
    PreconditionViolated,
    ProposalExceedsAnchor,
    StructureInconsistent,
    UnpricedItem,
)
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.poly import Poly, PolySystem
from hzmarket.numerics.solve import solve_poly_system
from hzmarket.verify import CERTIFIED, EXACT, canonicalize_allocation, verify_equilibrium

MAX_AGENTS = 4
SUPPORT_TOL = 2.0 ** -20
FULL_ENUM_MAX_ITEMS = 6
MAX_ANCHOR_COMBOS = 256


# --- structures --------------------------------------------------------------------

@dataclass(frozen=True)
class AgentStructure:
    """Anchor items and, per agent pair, the shared-item tuple ``(fS, rS, fT, rT, h)``."""

    g: tuple
    shared: tuple = ()  # ((i, k), (fS, rS, fT, rT, h)) sorted by pair

    def pair(self, i, k):
        for key, tup in self.shared:
            if key == (i, k):
                return tup
        return (None,) * 5

    def to_json(self) -> dict:
        return {
            "g": list(self.g),
            "shared": {f"{i},{k}": list(t) for (i, k), t in self.shared},
        }


def _pair_items(market, prices):
    """Per agent: items of optimum pair bundles, and optimum singletons."""
    bundles = build_bundles(prices)
    out = []
    for i in range(market.n):
        pairs, singles = set(), set()
        for c in optimum_bundles(market, i, bundles):
            b = bundles[c]
            (pairs.update(b.items) if b.is_pair else singles.add(b.j))
        out.append((pairs, singles))
    return out


def _side_list(prices, items, side):
    return sorted((j for j in items if sign(prices[j] - 1) == side), key=lambda j: (prices[j], j))


def structure_of(market: Market, prices, allocation) -> AgentStructure:
    """Read anchors and shared tuples off a (canonical) exact equilibrium."""
    n = market.n
    tight = _pair_items(market, prices)
    g = []
    for i in range(n):
        cheap = [j for j in _side_list(prices, tight[i][0], -1) if allocation[i][j] > 0]
        g.append(cheap[0] if cheap else None)
    shared = []
    for i in range(n):
        for k in range(i + 1, n):
            common = tight[i][0] & tight[k][0]
            tup = []
            for side in (-1, 1):
                both = [j for j in _side_list(prices, common, side) if allocation[i][j] > 0 and allocation[k][j] > 0]
                tup += [both[0], both[-1]] if both else [None, None]
            hs = sorted(j for j in tight[i][1] & tight[k][1] if allocation[i][j] > 0 and allocation[k][j] > 0)
            tup.append(hs[0] if hs else None)
            if any(t is not None for t in tup):
                shared.append(((i, k), tuple(tup)))
    return AgentStructure(tuple(g), tuple(shared))


@dataclass(frozen=True)
class SharedCounts:
    counts: tuple  # ((i, k), {"S": a, "T": b, "H": c})

    @property
    def violations(self) -> list:
        bad = []
        for key, c in self.counts:
            if c["S"] > 2 or c["T"] > 2 or c["H"] > 1:
                bad.append(key)
        return bad

    @property
    def total(self) -> int:
        return sum(sum(c.values()) for _, c in self.counts)


def count_shared_items(market: Market, prices, allocation) -> SharedCounts:
    """Items held by both agents of each pair, split by price side (S below 1, T above, H at 1)."""
    n = market.n
    out = []
    for i in range(n):
        for k in range(i + 1, n):
            c = {"S": 0, "T": 0, "H": 0}
            for j in range(market.m):
                if allocation[i][j] > 0 and allocation[k][j] > 0:
                    s = sign(prices[j] - 1)
                    c["S" if s < 0 else "T" if s > 0 else "H"] += 1
            out.append(((i, k), c))
    return SharedCounts(tuple(out))


# --- price propagation -----------------------------------------------------------

def propagate_prices(market: Market, utilities, anchors, anchor_prices) -> tuple:
    """Prices implied by utilities and anchors: each item gets its highest proposal.

    An anchored agent proposes ``1 + lam (v_j - u)`` with ``lam`` fixed by
    ``p_g = 1 + lam (v_g - u)``; an agent without an anchor proposes 1 for
    items worth exactly ``u`` and nothing else.
    """
    n, m = market.n, market.m
    props = [[] for _ in range(m)]
    lams = {}
    for i in range(n):
        u = utilities[i]
        g = anchors[i]
        v = market.values[i]
        if g is None:
            for j in range(m):
                if sign(v[j] - u) == 0:
                    props[j].append((i, Fraction(1)))
            continue
        d = v[g] - u
        if sign(d) == 0:
            raise PreconditionViolated(f"agent {i}: anchor item worth exactly u")
        lam = (anchor_prices[i] - 1) / d
        if sign(lam) < 0:
            raise PreconditionViolated(f"agent {i}: anchor price on the wrong side of 1")
        lams[i] = lam
        for j in range(m):
            props[j].append((i, 1 + lam * (v[j] - u)))
    prices = []
    for j in range(m):
        if not props[j]:
            raise UnpricedItem(f"item {j} receives no proposal")
        best = max((p for _, p in props[j]), key=midpoint)
        for _, p in props[j]:
            if sign(p - best) > 0:
                best = p
        prices.append(best if sign(best) >= 0 else Fraction(0))
    for i in range(n):
        g = anchors[i]
        if g is not None and sign(prices[g] - anchor_prices[i]) > 0:
            raise ProposalExceedsAnchor(f"item {g}: another agent bids above agent {i}'s anchor")
    return tuple(prices)


# --- allocation reconstruction -----------------------------------------------------

def _inside(L, j, lo, hi):
    if lo is None or hi is None or lo not in L or hi not in L:
        return False
    a, b = sorted((L.index(lo), L.index(hi)))
    return a <= L.index(j) <= b


def reconstruct_allocation(market: Market, structure: AgentStructure, prices, shares=None) -> tuple:
    """Assign items from optimum-bundle ownership, explicit shares and window rules.

    ``shares`` maps ``(i, k, j)`` to agent ``i``'s amount of item ``j`` for
    ``i < k``; agent ``k`` gets the rest of ``C_j``. Contested items with no
    share go, pair by pair, to the lower agent inside the ``f..r`` window of
    their price side and to the higher agent outside it. At price 1 the lower
    agent takes items up to the shared ``h`` index.
    """
    shares = shares or {}
    n, m = market.n, market.m
    tight = _pair_items(market, prices)
    own = [tight[i][0] | tight[i][1] for i in range(n)]
    x = [[Fraction(0)] * m for _ in range(n)]
    for j in range(m):
        owners = [i for i in range(n) if j in own[i]]
        cap = market.capacities[j]
        if not owners:
            if cap != 0:
                raise StructureInconsistent(f"item {j} is in nobody's optimum bundles")
            continue
        if len(owners) == 1:
            x[owners[0]][j] = cap
            continue
        explicit = [(i, k) for i in owners for k in owners if i < k and (i, k, j) in shares]
        if explicit:
            i, k = explicit[0]
            x[i][j] = shares[(i, k, j)]
            x[k][j] = cap - shares[(i, k, j)]
            continue
        s = sign(prices[j] - 1)
        winner = None
        for a in owners:
            ok = True
            for b in owners:
                if a == b:
                    continue
                lo, hi = (a, b) if a < b else (b, a)
                fS, rS, fT, rT, h = structure.pair(lo, hi)
                if s == 0:
                    common = sorted(tight[lo][1] & tight[hi][1])
                    inside = h is not None and j <= h
                else:
                    common = _side_list(prices, tight[lo][0] & tight[hi][0], s)
                    f, r = (fS, rS) if s < 0 else (fT, rT)
                    inside = j in common and _inside(common, j, f, r)
                want_lower = inside
                if (a == lo) != want_lower:
                    ok = False
                    break
            if ok:
                if winner is not None:
                    raise StructureInconsistent(f"item {j} claimed by agents {winner} and {a}")
                winner = a
        if winner is None:
            raise StructureInconsistent(f"item {j} is inside one window and outside another")
        x[winner][j] = cap
    return tuple(tuple(r) for r in x)


# --- cells --------------------------------------------------------------------------

@dataclass(frozen=True)
class AgentCell:
    """Anchors, per-item price setters ``W`` and per-item recipients ``R`` (``R_j`` within ``W_j``)."""

    g: tuple
    W: tuple
    R: tuple

    def holds(self, i):
        return [j for j, r in enumerate(self.R) if i in r]


@dataclass
class _Built:
    cell: AgentCell
    system: PolySystem
    u: list
    q: dict
    p: list
    x: dict  # (i, j) -> var index or None (derived from capacity)
    xpoly: dict


def _cell_ok(market: Market, cell: AgentCell) -> bool:
    n, m = market.n, market.m
    for j in range(m):
        if market.capacities[j] > 0 and not cell.R[j]:
            return False
        if not set(cell.R[j]) <= set(cell.W[j]):
            return False
    for i in range(n):
        held = cell.holds(i)
        if not held:
            return False
        g = cell.g[i]
        v = market.values[i]
        if g is None:
            wins = [j for j in range(m) if i in cell.W[j]]
            if len({v[j] for j in wins}) != 1:
                return False
        else:
            if g not in held or len(held) < 2:
                return False
            if not any(v[j] > v[g] for j in held):
                return False
    return True


def _build(market: Market, cell: AgentCell) -> _Built:
    n, m = market.n, market.m
    names = []
    nv = 0

    def new(name):
        nonlocal nv
        names.append(name)
        nv += 1
        return nv - 1

    u = [new(f"u{i}") for i in range(n)]
    q = {i: new(f"q{i}") for i in range(n) if cell.g[i] is not None}
    p = [new(f"p{j}") for j in range(m)]
    xv = {}
    for j in range(m):
        rec = sorted(cell.R[j])
        for i in rec[:-1]:
            xv[(i, j)] = new(f"x{i}_{j}")
        if rec:
            xv[(rec[-1], j)] = None
    S = PolySystem(nv, names=names)
    one = S.const(1)
    V = lambda i, j: S.const(market.values[i][j])  # noqa: E731
    X = {}
    for j in range(m):
        rec = sorted(cell.R[j])
        rest = S.const(market.capacities[j])
        for i in rec[:-1]:
            X[(i, j)] = S.var(xv[(i, j)])
            rest = rest - X[(i, j)]
            S.add_ge(X[(i, j)])
        if rec:
            X[(rec[-1], j)] = rest
            S.add_ge(rest)
    P = [S.var(k) for k in p]
    for j in range(m):
        S.add_ge(P[j])
    for i in range(n):
        held = cell.holds(i)
        S.add_eq(sum((X[(i, j)] for j in held), S.const(0)) - one)
        S.add_eq(sum((P[j] * X[(i, j)] for j in held), S.const(0)) - one)
        U = S.var(u[i])
        g = cell.g[i]
        if g is not None:
            Q = S.var(q[i])
            d = V(i, g) - U
            S.add_gt(-d)
            S.add_gt(one - Q)
            S.add_ge(Q)
            S.add_eq(P[g] - Q)
            for j in range(m):
                expr = d + (Q - one) * (V(i, j) - U) - P[j] * d
                if i in cell.W[j]:
                    if j != g:
                        S.add_eq(expr)
                else:
                    S.add_ge(expr)
        else:
            wins = [j for j in range(m) if i in cell.W[j]]
            level = market.values[i][wins[0]]
            S.add_eq(U - S.const(level))
            row = market.values[i]
            for j in wins:
                S.add_eq(P[j] - one)
            for k in range(m):
                if k in wins:
                    continue
                if row[k] > level:
                    S.add_gt(P[k] - one)
                elif row[k] == level:
                    S.add_ge(P[k] - one)
            for j in range(m):
                if row[j] >= level:
                    continue
                for k in range(m):
                    if row[k] > level:
                        S.add_ge((P[k] - one) * S.const(level - row[j]) - (one - P[j]) * S.const(row[k] - level))
    return _Built(cell, S, u, q, p, xv, X)


def _seed_vector(market, built: _Built, p, x, u):
    nv = built.system.nvars
    s = np.zeros(nv)
    for i, k in enumerate(built.u):
        s[k] = u[i]
    for i, k in built.q.items():
        s[k] = p[built.cell.g[i]]
    for j, k in enumerate(built.p):
        s[k] = p[j]
    for (i, j), k in built.x.items():
        if k is not None:
            s[k] = x[i][j]
    return s


def _point_to_solution(market, built: _Built, pt):
    n, m = market.n, market.m
    prices = tuple(pt[k] for k in built.p)
    alloc = [[Fraction(0)] * m for _ in range(n)]
    for (i, j), poly in built.xpoly.items():
        alloc[i][j] = poly(pt)
    return prices, tuple(tuple(r) for r in alloc)


# --- neighbourhoods ---------------------------------------------------------------

def _cell_from_seed(market, p, x, tol=SUPPORT_TOL) -> list:
    """The cell read off an approximate equilibrium plus nearby variants."""
    n, m = market.n, market.m
    R = [tuple(i for i in range(n) if x[i][j] > tol) for j in range(m)]
    base_g = []
    g_opts = []
    for i in range(n):
        held = [j for j in range(m) if i in R[j]]
        cheap = sorted((j for j in held if p[j] < 1 - 1e-9), key=lambda j: (p[j], j))
        near = sorted((j for j in held if abs(p[j] - 1) <= 1e-6), key=lambda j: j)
        opts = cheap + near + [None]
        seen = []
        for o in opts:
            if o not in seen:
                seen.append(o)
        g_opts.append(seen)
        base_g.append(seen[0])
    out = []

    def add(g, Rr):
        c = AgentCell(tuple(g), tuple(Rr), tuple(Rr))
        if c not in out:
            out.append(c)

    add(base_g, R)
    for g in itertools.islice(itertools.product(*g_opts), MAX_ANCHOR_COMBOS):
        add(g, R)
    for i in range(n):
        for j in range(m):
            Rr = [set(r) for r in R]
            Rr[j] ^= {i}
            Rr = [tuple(sorted(r)) for r in Rr]
            for o in g_opts[i]:
                g = list(base_g)
                g[i] = o
                add(g, Rr)
    return out


def _full_cells(market) -> list:
    """Every anchor/recipient cell for two agents, with setters equal to recipients."""
    n, m = market.n, market.m
    roles = []
    for i in range(n):
        v = market.values[i]
        opts = []
        for r in range(1, m + 1):
            for held in itertools.combinations(range(m), r):
                if len({v[j] for j in held}) == 1:
                    opts.append((held, None))
                if r >= 2:
                    for g in held:
                        if any(v[j] > v[g] for j in held):
                            opts.append((held, g))
        roles.append(opts)
    cells = []
    for combo in itertools.product(*roles):
        R = tuple(tuple(i for i in range(n) if j in combo[i][0]) for j in range(m))
        c = AgentCell(tuple(g for _, g in combo), R, R)
        if _cell_ok(market, c):
            cells.append(c)
    return cells


# --- driver ---------------------------------------------------------------------------

@dataclass
class AgentsOptions:
    eps: Fraction = Fraction(1, 2**64)
    full_enum: Optional[bool] = None  # default: n == 2 and m <= 6
    oracle_restarts: int = 4
    oracle_rounds: int = 4000
    seed: int = 0
    random_seeds: int = 2
    canonical: bool = True


def _sample_seeds(market, cell, count, rng):
    """Synthetic approximate points for cells no oracle point lands in."""
    n, m = market.n, market.m
    out = []
    for _ in range(count):
        p = np.where(rng.uniform(size=m) < 0.5, rng.uniform(0, 1, m), 1 + rng.uniform(0, 2, m))
        for i in range(n):
            if cell.g[i] is None:
                for j in range(m):
                    if i in cell.W[j]:
                        p[j] = 1.0
        x = np.zeros((n, m))
        for j in range(m):
            if cell.R[j]:
                for i in cell.R[j]:
                    x[i, j] = float(market.capacities[j]) / len(cell.R[j])
        u = np.array([float(sum(market.values[i][j] * Fraction(x[i, j]) for j in range(m))) for i in range(n)])
        out.append((p, x, u))
    return out


def _emit(market, prices, alloc, cell, opts):
    exact = all(not isinstance(t, Interval) for t in prices) and all(
        not isinstance(t, Interval) for r in alloc for t in r)
    try:
        cert = verify_equilibrium(market, prices, alloc, EXACT if exact else CERTIFIED, None if exact else opts.eps)
    except IndeterminateSign:
        return None
    if not cert.equilibrium:
        return None
    notes = {"solver": "fixed-agents", "cell": {"g": list(cell.g), "R": [list(r) for r in cell.R]}}
    if exact:
        if opts.canonical:
            try:
                canon = canonicalize_allocation(market, cert.prices, cert.allocation)
            except NotAnEquilibrium:
                return None
            cert = verify_equilibrium(market, cert.prices, canon)
        notes["structure"] = structure_of(market, cert.prices, cert.allocation).to_json()
    return replace(cert, notes=notes)


def _solve(market, built, seed, opts):
    try:
        return solve_poly_system(built.system, list(seed), mode="exact")
    except (NoSolutionFound, IndeterminateSign):
        pass
    try:
        return solve_poly_system(built.system, list(seed), mode="certify", eps=opts.eps)
    except (NoSolutionFound, IndeterminateSign):
        return []


def solve_fixed_agents(market: Market, options: Optional[AgentsOptions] = None, oracle_points=None) -> list:
    """Verified equilibrium certificates; IncompleteSearch when none is found.

    ``oracle_points`` is a list of ``(p, x, u)`` float triples; by default the
    game oracle supplies them.
    """
    from hzmarket.solver_goods import certificate_key

    opts = options or AgentsOptions()
    n, m = market.n, market.m
    if not market.all_unique_tops:
        bad = [i for i, ok in enumerate(market.unique_top) if not ok]
        raise NonUniqueTopItem(f"agents {bad} have tied top items")
    if n > MAX_AGENTS:
        raise PreconditionViolated(f"n = {n} > {MAX_AGENTS}")
    if oracle_points is None:
        from hzmarket.baselines.oracle import game_oracle_all
        found = game_oracle_all(market, rounds=opts.oracle_rounds, restarts=opts.oracle_restarts, seed=opts.seed)
        oracle_points = [(a.p, a.x, a.u) for a in found if float(a.residual) < 1e-3]
    rng = np.random.default_rng(opts.seed)

    cells = []
    for p, x, u in oracle_points:
        for c in _cell_from_seed(market, p, x):
            if c not in cells:
                cells.append(c)
    full = opts.full_enum if opts.full_enum is not None else (n == 2 and m <= FULL_ENUM_MAX_ITEMS)
    if full:
        for c in _full_cells(market):
            if c not in cells:
                cells.append(c)

    found = {}
    tried = 0
    for cidx, cell in enumerate(cells):
        if not _cell_ok(market, cell):
            continue
        built = _build(market, cell)
        tried += 1
        seeds = [_seed_vector(market, built, p, x, u) for p, x, u in oracle_points]
        seeds += [_seed_vector(market, built, p, x, u) for p, x, u in _sample_seeds(market, cell, opts.random_seeds, rng)]
        for seed in seeds:
            hit = False
            for pt in _solve(market, built, seed, opts):
                prices, alloc = _point_to_solution(market, built, pt)
                cert = _emit(market, prices, alloc, cell, opts)
                if cert is None:
                    continue
                hit = True
                key = certificate_key(cert)
                if key not in found:
                    found[key] = (cidx, len(found), cert)
            if hit:
                break
    if not found:
        raise IncompleteSearch(f"no verified equilibrium after {tried} cells", tried)
    return [c for _, _, c in sorted(found.values(), key=lambda t: (t[0], t[1]))]
