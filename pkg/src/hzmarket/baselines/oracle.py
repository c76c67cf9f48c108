"""Approximate equilibria used to seed the exact solvers and to cross-check them.

Nothing here is trusted: every output carries its clearing residual and
per-agent optimality gaps, and the solvers re-derive everything exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import least_squares
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from hzmarket.baselines import _kernels
from hzmarket.core import Market
from hzmarket.errors import TooManyItems


@dataclass(frozen=True)
class ApproxEquilibrium:
    prices: tuple
    allocation: tuple
    utilities: tuple
    residual: Fraction
    gaps: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def p(self) -> np.ndarray:
        return np.array([float(x) for x in self.prices])

    @property
    def x(self) -> np.ndarray:
        return np.array([[float(v) for v in r] for r in self.allocation])

    @property
    def u(self) -> np.ndarray:
        return np.array([float(v) for v in self.utilities])


def _fvalues(market: Market):
    V = np.array([[float(v) for v in row] for row in market.values])
    C = np.array([float(c) for c in market.capacities])
    return V, C


def market_maker_value(X, C, n) -> float:
    """Optimum of the price player's LP ``max sum_j z_j p_j`` s.t. ``C.p <= n``, ``p >= 0``.

    One constraint, so the optimum sits on a vertex ``p = (n / C_j) e_j``.
    """
    z = X.sum(axis=0) - C
    best = 0.0
    for j in range(len(C)):
        if C[j] > 0:
            best = max(best, z[j] * n / C[j])
        elif z[j] > 0:
            return float("inf")
    return best


def clearing_residual(X, C, p) -> float:
    """Over-demand anywhere, under-demand only where the price is positive."""
    z = X.sum(axis=0) - C
    r = np.where(p > 0, np.abs(z), np.maximum(z, 0.0))
    return float(r.max()) if r.size else 0.0


def matching_optimum(v, p):
    """Best value of a unit, budget-1 bundle at float prices (vertex enumeration)."""
    m = len(v)
    best = -np.inf
    for j in range(m):
        if p[j] <= 1.0:
            best = max(best, v[j])
    for j in range(m):
        for k in range(m):
            if p[j] < 1.0 < p[k]:
                a = (p[k] - 1.0) / (p[k] - p[j])
                best = max(best, a * v[j] + (1 - a) * v[k])
    return best


def _fill_rows(X, C, p):
    """Top rows up to one unit using spare capacity of zero-priced items."""
    X = X.copy()
    spare = np.maximum(C - X.sum(axis=0), 0.0)
    for i in range(X.shape[0]):
        need = 1.0 - X[i].sum()
        for j in np.argsort(p, kind="stable"):
            if need <= 1e-15:
                break
            if p[j] == 0.0 and spare[j] > 0:
                t = min(need, spare[j])
                X[i, j] += t
                spare[j] -= t
                need -= t
        if need > 1e-15:
            X[i] /= X[i].sum() if X[i].sum() > 0 else 1.0
    return X


def matching_demand(V, p, tau):
    """Softmax over one-unit bundles: affordable singletons and price-1 pairs.

    Unlike the relaxed demand there is no outside option, so an agent cannot
    throw part of its unit away. Rows are zero when nothing is affordable.
    """
    n, m = V.shape
    shares, cols = [], []
    for j in range(m):
        if p[j] <= 1.0:
            e = np.zeros(m)
            e[j] = 1.0
            shares.append(e)
    for j in range(m):
        for k in range(m):
            if p[j] < 1.0 < p[k]:
                a = (p[k] - 1.0) / (p[k] - p[j])
                e = np.zeros(m)
                e[j], e[k] = a, 1.0 - a
                shares.append(e)
    if not shares:
        return np.zeros((n, m))
    S = np.array(shares)
    vals = V @ S.T / tau
    vals -= vals.max(axis=1, keepdims=True)
    w = np.exp(vals)
    w /= w.sum(axis=1, keepdims=True)
    return w @ S


def _fb_residual(p, V, C, tau, demand):
    """Fischer-Burmeister form of ``p >= 0, z <= 0, p.z = 0``."""
    q = np.maximum(p, 0.0)
    X = demand(V, q, tau)
    b = C - X.sum(axis=0)
    return p + b - np.sqrt(p * p + b * b)


def polish(V, C, p0, taus, demand=None):
    """Continuation in the smoothing temperature, least squares at each level."""
    demand = demand or _kernels.smoothed_demand
    p = np.maximum(np.asarray(p0, dtype=float), 0.0)
    for tau in taus:
        sol = least_squares(_fb_residual, p, args=(V, C, tau, demand), bounds=(0.0, np.inf),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=200)
        p = sol.x
    return p


def _package(market, V, C, p, tau_final, meta, demand=None) -> ApproxEquilibrium:
    p = np.where(p < 1e-9, 0.0, p)
    X = (demand or _kernels.smoothed_demand)(V, p, tau_final)
    X = _fill_rows(X, C, p)
    res = clearing_residual(X, C, p)
    gaps = []
    for i in range(V.shape[0]):
        gaps.append(max(0.0, matching_optimum(V[i], p) - float(V[i] @ X[i])) if p.min() <= 1 else np.inf)
    u = np.einsum("ij,ij->i", V, X)
    return ApproxEquilibrium(
        tuple(Fraction(float(v)) for v in p),
        tuple(tuple(Fraction(float(v)) for v in row) for row in X),
        tuple(Fraction(float(v)) for v in u),
        Fraction(res),
        tuple(Fraction(g) if np.isfinite(g) else Fraction(10**9) for g in gaps),
        meta,
    )


def _starts(market, restarts, seed):
    n, m = market.n, market.m
    total = float(sum(market.capacities))
    eps = 1.0 / (n * total)
    rng = np.random.default_rng(seed)
    starts = [np.full(m, eps)]
    for _ in range(max(restarts - 1, 0)):
        starts.append(rng.uniform(0.0, 2.0, size=m))
    return starts


def _score(a):
    return float(a.residual) + float(max(a.gaps))


def _slack(a):
    return float(np.maximum(1.0 - a.x @ a.p, 0.0).sum())


def game_oracle_all(market: Market, eta=0.125, rounds=10_000, restarts=8, seed=0, polish_taus=None,
                    dedupe=1e-6, matching=True) -> list:
    """Distinct approximate equilibria from every start, best residual first.

    With ``matching`` every start is also polished against matching-form
    demand (no disposal), which reaches equilibria the relaxed market does
    not have.
    """
    V, C = _fvalues(market)
    scale = max(float(V.max()), 1.0)
    if polish_taus is None:
        polish_taus = [scale * t for t in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)]
    tau_final = polish_taus[-1] if polish_taus else scale * 1e-5
    found = []
    for k, p0 in enumerate(_starts(market, restarts, seed)):
        p, _ = _kernels.tatonnement(V, C, p0, eta=eta, rounds=rounds, tau0=0.25 * scale, tau1=1e-3 * scale)
        a = _package(market, V, C, p, tau_final, {"start": k, "demand": "relaxed"})
        if polish_taus and _score(a) > 1e-12:
            # an already exact point stays put; smoothing would drift it along the scale continuum
            p = polish(V, C, p, polish_taus)
            a = _package(market, V, C, p, tau_final, {"start": k, "demand": "relaxed"})
        found.append(a)
        if polish_taus and matching:
            # the coarsest temperatures flatten matching demand into a bad basin
            fine = polish_taus[2:] or polish_taus
            q = polish(V, C, p0, fine, demand=matching_demand)
            found.append(_package(market, V, C, q, tau_final, {"start": k, "demand": "matching"}, matching_demand))
    # exact-looking points tie; among them prefer the one leaving least budget unspent
    found.sort(key=lambda a: (_score(a) if _score(a) > 1e-10 else 0.0, _slack(a), a.meta["start"]))
    distinct = []
    for a in found:
        if all(np.abs(a.u - b.u).max() > dedupe or np.abs(a.p - b.p).max() > dedupe for b in distinct):
            distinct.append(a)
    return distinct


def game_oracle(market: Market, eta=0.125, rounds=10_000, restarts=8, seed=0, polish_taus=None) -> ApproxEquilibrium:
    """Damped tatonnement on smoothed relaxed demand, multi-start, best point returned."""
    return game_oracle_all(market, eta, rounds, restarts, seed, polish_taus)[0]


# --- grid scan -----------------------------------------------------------------------

@dataclass(frozen=True)
class GridCluster:
    """Accepted grid points whose utility vectors chain together within ``link``."""

    representative: ApproxEquilibrium
    utilities: np.ndarray  # one row per accepted point (deduplicated)
    prices: np.ndarray
    count: int

    def distance(self, u) -> float:
        u = np.asarray([float(t) for t in u])
        return float(np.abs(self.utilities - u[None, :]).max(axis=1).min())


def _clusters(points, link):
    """Single-linkage groups under the max-norm, ordered by first member."""
    pts = np.asarray(points)
    n = len(pts)
    pairs = cKDTree(pts).query_pairs(link, p=np.inf, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    groups = {}
    for a in range(n):
        groups.setdefault(labels[a], []).append(a)
    return sorted(groups.values(), key=lambda g: g[0])


def grid_oracle(market: Market, resolution: int = 7, delta=None, link=2.0**-6, backend=None) -> list:
    """Exhaustive scan of two-item price grids at step ``2^-resolution``.

    A grid point is kept when unit, budget-1 rows that are each within
    ``delta`` of optimal can clear item 0 up to ``2^-resolution``.
    """
    if market.m > 2:
        raise TooManyItems("grid oracle handles at most two items")
    V, C = _fvalues(market)
    n = market.n
    if market.m == 1:
        V = np.hstack([V, np.zeros((n, 1))])
        C = np.array([C[0], 0.0])
    h = 2.0 ** -resolution
    top = n / max(min(C[C > 0]), 1e-12)
    steps = int(round(top / h)) + 1
    if delta is None:
        delta = 4 * h * max(float(np.abs(V).max()), 1.0)
    accept, U = _kernels.grid_scan(V, C[0], h, steps, delta, h, backend=backend)
    idx = np.argwhere(accept)
    if idx.size == 0:
        return []
    us = U[idx[:, 0], idx[:, 1]]
    key = np.round(us / (h / 4)).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    uniq_u = us[first]
    uniq_p = idx[first] * h
    out = []
    for members in _clusters(list(uniq_u), link):
        mu = uniq_u[members]
        mp = uniq_p[members]
        mid = int(np.argmin(np.abs(mu - np.median(mu, axis=0)).sum(axis=1)))
        p = mp[mid]
        rep = ApproxEquilibrium(
            tuple(Fraction(float(t)) for t in p[: market.m]),
            (),
            tuple(Fraction(float(t)) for t in mu[mid]),
            Fraction(h),
            (),
            {"resolution": resolution},
        )
        out.append(GridCluster(rep, mu, mp[:, : market.m], len(members)))
    return out
