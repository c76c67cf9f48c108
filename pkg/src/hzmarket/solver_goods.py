"""Equilibria for a small number of items.

Prices are searched structure by structure: an ordered partition of the
items (plus the constant 1) fixes every sign the bundle algebra needs. Inside
a structure each agent's optimum-bundle set is read off at a seed, turned
into polynomial ties and dominance inequalities, and handed to the algebraic
solver. Clearing is checked afterwards with Hall-type LPs at the solved
prices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls

from hzmarket.bundling import build_bundling, extract_allocation
from hzmarket.core import Market, midpoint
from hzmarket.errors import (
    IncompleteSearch,
    IndeterminateSign,
    InfeasibleBundleSystem,
    NoSolutionFound,
    TooManyItems,
    UtilityMismatch,
)
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.lp import EQ, GE, LE, LinearProgram, lp_solve
from hzmarket.numerics.poly import Poly, PolySystem
from hzmarket.numerics.solve import solve_poly_system
from hzmarket.verify import CERTIFIED, EXACT, verify_equilibrium

MAX_ITEMS = 4
MAX_HALL_BUNDLES = 24
ONE = -1  # sentinel for the constant 1 inside a structure
SEED_TOLERANCES = (1e-9, 1e-6, 1e-4, 1e-2)


# --- structures ----------------------------------------------------------------

@dataclass(frozen=True)
class PriceStructure:
    """Price classes in strictly increasing order; ``ONE`` marks the class priced 1."""

    classes: tuple

    def rank(self, j) -> int:
        return next(r for r, c in enumerate(self.classes) if j in c)

    def side(self, j) -> int:
        a, b = self.rank(j), self.rank(ONE)
        return (a > b) - (a < b)

    @property
    def m(self) -> int:
        return sum(len(c) for c in self.classes) - 1

    def cheap(self):
        return [j for j in range(self.m) if self.side(j) < 0]

    def dear(self):
        return [j for j in range(self.m) if self.side(j) > 0]

    def ones(self):
        return [j for j in range(self.m) if self.side(j) == 0]

    @property
    def degenerate(self) -> bool:
        """No item at or below 1, or none at or above 1: nobody can spend exactly 1."""
        return not (self.cheap() or self.ones()) or not (self.dear() or self.ones())

    def label(self) -> str:
        def name(e):
            return "1" if e == ONE else f"p{e}"
        return "<".join("=".join(name(e) for e in c) for c in self.classes)


def _ordered_partitions(elems):
    if not elems:
        yield ()
        return
    first, rest = elems[0], elems[1:]
    for part in _ordered_partitions(rest):
        # join an existing class, or open a new one at any position
        for t in range(len(part)):
            yield part[:t] + (tuple(sorted(part[t] + (first,))),) + part[t + 1:]
        for t in range(len(part) + 1):
            yield part[:t] + ((first,),) + part[t:]


def enumerate_price_structures(m: int) -> list:
    if m > MAX_ITEMS:
        raise TooManyItems(f"m = {m} > {MAX_ITEMS}")
    if m < 1:
        return []
    seen = set()
    out = []
    for part in _ordered_partitions([ONE] + list(range(m))):
        if part not in seen:
            seen.add(part)
            out.append(PriceStructure(part))
    out.sort(key=lambda s: tuple(tuple(c) for c in s.classes))
    return out


def classify_prices(prices: Sequence[float], tol: float) -> PriceStructure:
    """The structure of a float price vector, merging values closer than ``tol``."""
    pts = sorted([(1.0, ONE)] + [(float(p), j) for j, p in enumerate(prices)], key=lambda t: (t[0], t[1]))
    classes = []
    cur = [pts[0]]
    for v, e in pts[1:]:
        if v - cur[-1][0] <= tol:
            cur.append((v, e))
        else:
            classes.append(cur)
            cur = [(v, e)]
    classes.append(cur)
    # a class may only hold ONE if it is near 1; chains are split around it
    return PriceStructure(tuple(tuple(sorted(e for _, e in c)) for c in classes))


# --- symbolic bundles ---------------------------------------------------------------

@dataclass(frozen=True)
class SymbolicBundle:
    """``alpha = num / den`` as polynomials in the prices; ``den`` has a fixed sign."""

    j: int
    k: Optional[int]
    num: Poly
    den: Poly
    den_sign: int

    @property
    def is_pair(self) -> bool:
        return self.k is not None

    def alpha_at(self, prices):
        return self.num(prices) / self.den(prices)

    def value_parts(self, row, nv):
        """Value as ``N / D`` with the same ``D`` as alpha."""
        if self.k is None:
            return Poly.const(row[self.j], nv), Poly.const(1, nv)
        pj, pk = Poly.var(self.j, nv), Poly.var(self.k, nv)
        one = Poly.const(1, nv)
        N = (one - pk) * Poly.const(row[self.j], nv) + (pj - one) * Poly.const(row[self.k], nv)
        return N, self.den

    def label(self) -> str:
        return f"({self.j})" if self.k is None else f"({self.j},{self.k})"


def structure_bundles(structure: PriceStructure, nvars: Optional[int] = None) -> list:
    """Bundles of a structure in the order :func:`build_bundles` uses."""
    m = structure.m
    nv = m if nvars is None else nvars
    out = []
    one = Poly.const(1, nv)
    for j in range(m):
        s = structure.side(j)
        if s == 0:
            out.append(SymbolicBundle(j, None, one, one, 1))
        elif s < 0:
            for k in range(m):
                if structure.side(k) > 0:
                    pj, pk = Poly.var(j, nv), Poly.var(k, nv)
                    out.append(SymbolicBundle(j, k, one - pk, pj - pk, -1))
    return out


# --- Hall feasibility --------------------------------------------------------------

@dataclass(frozen=True)
class HallResult:
    feasible: bool
    amounts: Optional[tuple] = None  # per bundle in the list
    violating: Optional[tuple] = None  # bundle subset T with too little mass for A(T)
    method: str = ""


def _shares(bundles, prices, m):
    """Per bundle, item shares at concrete prices (``Bundle`` or ``SymbolicBundle``)."""
    out = []
    for b in bundles:
        row = [Fraction(0)] * m
        if b.k is None:
            row[b.j] = Fraction(1)
        else:
            a = b.alpha if hasattr(b, "alpha") else b.alpha_at(prices)
            a = midpoint(a)
            row[b.j] = a
            row[b.k] = 1 - a
        out.append(row)
    return out


def _balance_rows(lp, shares, nb, capacities, offset=0, width=None):
    width = nb if width is None else width
    for j, c in enumerate(capacities):
        row = [0] * width
        for b in range(nb):
            row[offset + b] = shares[b][j]
        lp.add(row, EQ, c)


def _hall_subsets(bundles, B, capacities, prices) -> HallResult:
    nb, m = len(bundles), len(capacities)
    if nb > MAX_HALL_BUNDLES:
        raise ValueError(f"{nb} bundles exceed the subset-loop cap {MAX_HALL_BUNDLES}")
    shares = _shares(bundles, prices, m)
    used = sorted(set().union(*[set(s) for s in B])) if B else []
    lp = LinearProgram(nb)
    _balance_rows(lp, shares, nb, capacities)
    subsets = []
    for r in range(1, len(used) + 1):
        for T in itertools.combinations(used, r):
            need = sum(1 for s in B if set(s) <= set(T))
            if need:
                subsets.append((T, need))
                lp.add([1 if b in T else 0 for b in range(nb)], GE, need)
    # bundles nobody wants stay unused
    for b in range(nb):
        if b not in used:
            lp.add([1 if c == b else 0 for c in range(nb)], EQ, 0)
    out = lp_solve(lp)
    if out.optimal:
        return HallResult(True, tuple(out.x), None, "subsets")
    # witness: a bundle set whose mass cannot reach the number of agents confined
    # to it even when items are only capped, not forced to clear
    for T, need in subsets:
        probe = LinearProgram(nb, [1 if b in T else 0 for b in range(nb)])
        for j, c in enumerate(capacities):
            probe.add([shares[b][j] for b in range(nb)], LE, c)
        res = lp_solve(probe)
        if res.optimal and res.value < need:
            return HallResult(False, None, T, "subsets")
    return HallResult(False, None, None, "subsets")


def _hall_assignment(bundles, B, capacities, prices) -> HallResult:
    nb, m = len(bundles), len(capacities)
    shares = _shares(bundles, prices, m)
    cols = [(i, b) for i, s in enumerate(B) for b in s]
    lp = LinearProgram(len(cols))
    for i in range(len(B)):
        lp.add([1 if ci == i else 0 for ci, _ in cols], EQ, 1)
    for j, c in enumerate(capacities):
        lp.add([shares[b][j] for _, b in cols], EQ, c)
    out = lp_solve(lp)
    if not out.optimal:
        return HallResult(False, None, None, "assignment")
    amounts = [Fraction(0)] * nb
    for (i, b), y in zip(cols, out.x):
        amounts[b] += y
    return HallResult(True, tuple(amounts), None, "assignment")


def hall_feasible(bundles, B, capacities, prices=None, method: str = "subsets") -> HallResult:
    """Can every agent get one unit of its optimum bundles with every item clearing?

    ``method`` is ``"subsets"`` (bundle-subset conditions plus item balance)
    or ``"assignment"`` (agent-by-bundle LP). Both decide the same question.
    """
    if any(len(s) == 0 for s in B):
        return HallResult(False, None, (), method)
    if method == "subsets":
        return _hall_subsets(bundles, B, capacities, prices)
    if method == "assignment":
        return _hall_assignment(bundles, B, capacities, prices)
    raise ValueError(f"unknown method {method!r}")


# --- the per-cell system -------------------------------------------------------------

@dataclass
class _Cell:
    structure: PriceStructure
    bundles: list
    B: tuple  # per agent, indices into bundles
    system: PolySystem
    amount_vars: list  # per bundle: (var for j, var for k or None)


def _build_cell(market: Market, structure: PriceStructure, B) -> Optional[_Cell]:
    m = market.m
    probe = structure_bundles(structure)
    nb = len(probe)
    amount_vars = []
    nv = m
    for b in probe:
        if b.is_pair:
            amount_vars.append((nv, nv + 1))
            nv += 2
        else:
            amount_vars.append((nv, None))
            nv += 1
    bundles = structure_bundles(structure, nv)
    S = PolySystem(nv, names=[f"p{j}" for j in range(m)] + [f"a{t}" for t in range(nv - m)])
    one = S.const(1)
    p = [S.var(j) for j in range(m)]

    # structure: equal inside a class, strictly increasing across, 1 on the sentinel class
    prev = None
    for cls in structure.classes:
        rep = one if ONE in cls else p[cls[0]]
        for e in cls:
            if e != ONE:
                S.add_eq(p[e] - rep)
        if prev is None:
            if ONE not in cls:
                S.add_ge(rep)
        else:
            S.add_gt(rep - prev)
        prev = rep

    used = set().union(*[set(s) for s in B])
    # item balance and budget-1 mixing on the bundles in use
    bal = [S.const(0) for _ in range(m)]
    for t, b in enumerate(bundles):
        aj, ak = amount_vars[t]
        if t not in used:
            S.add_eq(S.var(aj))
            if ak is not None:
                S.add_eq(S.var(ak))
            continue
        S.add_ge(S.var(aj))
        bal[b.j] = bal[b.j] + S.var(aj)
        if ak is not None:
            S.add_ge(S.var(ak))
            bal[b.k] = bal[b.k] + S.var(ak)
            S.add_eq(S.var(aj) * (one - p[b.j]) - S.var(ak) * (p[b.k] - one))
    for j in range(m):
        S.add_eq(bal[j] - S.const(market.capacities[j]))

    # ties inside each optimum set, strict dominance outside it
    for i, Bi in enumerate(B):
        row = market.values[i]
        parts = [b.value_parts(row, nv) for b in bundles]
        b0 = Bi[0]
        N0, D0 = parts[b0]
        s0 = bundles[b0].den_sign
        for b in Bi[1:]:
            N, D = parts[b]
            S.add_eq(N0 * D - N * D0)
        for b in range(nb):
            if b in Bi:
                continue
            N, D = parts[b]
            expr = N0 * D - N * D0
            S.add_gt(expr if s0 * bundles[b].den_sign > 0 else -expr)
        # no cheap item alone beats the bundle value
        for j in structure.cheap():
            expr = N0 - S.const(row[j]) * D0
            S.add_ge(expr if s0 > 0 else -expr)
    return _Cell(structure, bundles, tuple(tuple(s) for s in B), S, amount_vars)


def _amount_seed(market, cell, p):
    """Non-negative least squares for the bundle amounts at float prices ``p``."""
    m = market.m
    nv = cell.system.nvars
    rows, rhs = [], []
    for j in range(m):
        r = np.zeros(nv - m)
        for t, b in enumerate(cell.bundles):
            aj, ak = cell.amount_vars[t]
            if b.j == j:
                r[aj - m] = 1
            if ak is not None and b.k == j:
                r[ak - m] = 1
        rows.append(r)
        rhs.append(float(market.capacities[j]))
    for t, b in enumerate(cell.bundles):
        aj, ak = cell.amount_vars[t]
        if ak is not None:
            r = np.zeros(nv - m)
            r[aj - m] = 1 - p[b.j]
            r[ak - m] = -(p[b.k] - 1)
            rows.append(r)
            rhs.append(0.0)
    if not rows:
        return np.zeros(nv - m)
    sol, _ = nnls(np.array(rows), np.array(rhs))
    return sol


def _project(structure: PriceStructure, p):
    """Move a float price vector into the closure of ``structure``."""
    vals = []
    for cls in structure.classes:
        if ONE in cls:
            vals.append(1.0)
        else:
            vals.append(float(np.mean([p[j] for j in cls])))
    r1 = structure.rank(ONE)
    for r in range(len(vals)):
        if r < r1:
            vals[r] = min(max(vals[r], 0.0), 1.0)
        elif r > r1:
            vals[r] = max(vals[r], 1.0)
    out = np.zeros(structure.m)
    for r, cls in enumerate(structure.classes):
        for e in cls:
            if e != ONE:
                out[e] = vals[r]
    return out


def _interior_samples(structure: PriceStructure, count: int, rng) -> list:
    r1 = structure.rank(ONE)
    below, above = r1, len(structure.classes) - r1 - 1
    out = []
    for t in range(count):
        lo = np.sort(rng.uniform(0, 1, size=below)) if t else (np.arange(1, below + 1) / (below + 1))
        hi = np.sort(1 + rng.uniform(0, 2, size=above)) if t else (1 + np.arange(1, above + 1) / 2.0)
        vals = list(lo) + [1.0] + list(hi)
        p = np.zeros(structure.m)
        for r, cls in enumerate(structure.classes):
            for e in cls:
                if e != ONE:
                    p[e] = vals[r]
        out.append(p)
    return out


def _optimum_sets(market, structure, p, tol):
    """Bundles within ``tol`` of each agent's best value at float prices."""
    probe = structure_bundles(structure)
    out = []
    for i in range(market.n):
        row = [float(v) for v in market.values[i]]
        vals = []
        for b in probe:
            if b.k is None:
                vals.append(row[b.j])
            else:
                a = (1 - p[b.k]) / (p[b.j] - p[b.k]) if p[b.j] != p[b.k] else 0.5
                vals.append(a * row[b.j] + (1 - a) * row[b.k])
        if not vals:
            return None
        best = max(vals)
        scale = max(1.0, abs(best))
        out.append(tuple(t for t, v in enumerate(vals) if best - v <= tol * scale))
    return tuple(out)


def _all_patterns(n, nb):
    subsets = [tuple(s) for r in range(1, nb + 1) for s in itertools.combinations(range(nb), r)]
    return itertools.product(subsets, repeat=n)


# --- driver ----------------------------------------------------------------------------

@dataclass
class GoodsOptions:
    seeds: int = 3
    eps: Fraction = Fraction(1, 2**64)
    mode: str = "exact-or-certify"
    exhaustive: Optional[bool] = None  # default: m <= 2
    structure_cap: Optional[int] = None
    oracle_restarts: int = 4
    oracle_rounds: int = 4000
    seed: int = 0


def _certificate(market, structure, prices, opts):
    exact = all(not isinstance(x, Interval) for x in prices)
    try:
        bundling = build_bundling(market, prices)
    except (IndeterminateSign, UtilityMismatch):
        return None
    B = bundling.optimum
    if any(len(s) == 0 for s in B):
        return None
    try:
        alloc = extract_allocation(bundling.bundles, B, market.capacities)
    except InfeasibleBundleSystem:
        return None
    try:
        cert = verify_equilibrium(market, prices, alloc, EXACT if exact else CERTIFIED, None if exact else opts.eps)
    except IndeterminateSign:
        return None
    if not cert.equilibrium:
        return None
    notes = {
        "solver": "fixed-goods",
        "structure": structure.label(),
        "optimum_bundles": [[bundling.bundles[b].label() for b in s] for s in B],
    }
    return replace(cert, notes=notes)


def certificate_key(cert, digits=40):
    """Utility vector plus support pattern; intervals are rounded at ``2^-digits``."""
    def q(x):
        return midpoint(x) if not isinstance(x, Interval) else Fraction(round(midpoint(x) * 2**digits), 2**digits)
    us = tuple(q(u) for u in cert.utilities)
    support = tuple(tuple(j for j, x in enumerate(r) if (x.hi > 0 if isinstance(x, Interval) else x > 0))
                    for r in cert.allocation)
    return us, support


def _solve_cell(market, cell, seed_p, opts):
    m = market.m
    amounts = _amount_seed(market, cell, seed_p)
    seed = list(seed_p) + list(amounts)
    pts = None
    try:
        pts = solve_poly_system(cell.system, seed, mode="exact")
    except (NoSolutionFound, IndeterminateSign):
        pts = None
    if pts is None:
        try:
            pts = solve_poly_system(cell.system, seed, mode="certify", eps=opts.eps)
        except (NoSolutionFound, IndeterminateSign):
            return []
    return [tuple(pt[:m]) for pt in pts]


def _oracle_seeds(market, opts):
    from hzmarket.baselines.oracle import game_oracle_all
    found = game_oracle_all(market, rounds=opts.oracle_rounds, restarts=opts.oracle_restarts, seed=opts.seed)
    return [a.p for a in found if float(a.residual) < 1e-3]


def solve_fixed_goods(market: Market, options: Optional[GoodsOptions] = None, oracle_seeds=None) -> list:
    """Equilibrium certificates found by structure enumeration.

    Raises IncompleteSearch when nothing verifies.
    """
    opts = options or GoodsOptions()
    m, n = market.m, market.n
    if m > MAX_ITEMS:
        raise TooManyItems(f"m = {m} > {MAX_ITEMS}")
    structures = enumerate_price_structures(m)
    if opts.structure_cap is not None:
        structures = structures[: opts.structure_cap]
    exhaustive = opts.exhaustive if opts.exhaustive is not None else m <= 2
    seeds = list(oracle_seeds) if oracle_seeds is not None else _oracle_seeds(market, opts)
    rng = np.random.default_rng(opts.seed)

    tried = 0
    found = {}
    done_cells = set()
    for sidx, st in enumerate(structures):
        if st.degenerate or not structure_bundles(st):
            continue
        nb = len(structure_bundles(st))
        pts = [_project(st, s) for s in seeds] + _interior_samples(st, opts.seeds, rng)
        jobs = []
        if exhaustive:
            for B in _all_patterns(n, nb):
                jobs.append((B, pts))
        else:
            own = [s for s in seeds if classify_prices(s, 1e-6) == st]
            for p0 in own + _interior_samples(st, opts.seeds, rng):
                for tol in SEED_TOLERANCES:
                    B = _optimum_sets(market, st, p0, tol)
                    if B is not None:
                        jobs.append((B, [p0] + [q for q in pts if q is not p0]))
        for B, cand in jobs:
            if (sidx, B) in done_cells:
                continue
            done_cells.add((sidx, B))
            cell = _build_cell(market, st, B)
            tried += 1
            for p0 in cand:
                sols = _solve_cell(market, cell, p0, opts)
                hit = False
                for prices in sols:
                    cert = _certificate(market, st, prices, opts)
                    if cert is None:
                        continue
                    key = certificate_key(cert)
                    if key not in found:
                        found[key] = (sidx, len(found), cert)
                    hit = True
                if hit:
                    break
    if not found:
        raise IncompleteSearch(f"no verified equilibrium after {tried} cells", tried)
    return [c for _, _, c in sorted(found.values(), key=lambda t: (t[0], t[1]))]
