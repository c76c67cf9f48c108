"""Moneyless assignment baselines: random serial dictatorship and probabilistic serial."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from hzmarket.core import Market, format_rational, row_value
from hzmarket.errors import NonUnitCapacities, TooManyAgents
from hzmarket.verify import check_envy_free, check_pareto_efficient

RSD_MAX_AGENTS = 8


@dataclass(frozen=True)
class OrdinalProfile:
    """Per agent, items from most to least preferred."""

    orders: tuple

    @classmethod
    def from_market(cls, market: Market) -> "OrdinalProfile":
        # ties broken by item index
        return cls(tuple(
            tuple(sorted(range(market.m), key=lambda j, r=row: (-r[j], j))) for row in market.values
        ))

    @classmethod
    def from_partial(cls, partial: Sequence[Sequence[int]], m: int) -> "OrdinalProfile":
        """Listed items first, the rest appended by index."""
        out = []
        for listed in partial:
            listed = list(listed)
            out.append(tuple(listed + [j for j in range(m) if j not in listed]))
        return cls(tuple(out))

    def to_values(self) -> tuple:
        """A cardinal market realising this profile: rank r is worth ``m - r``."""
        m = len(self.orders[0])
        rows = []
        for order in self.orders:
            row = [0] * m
            for r, j in enumerate(order):
                row[j] = Fraction(m - r)
            rows.append(tuple(row))
        return tuple(rows)


def _unit_caps(market: Market):
    if any(c != 1 for c in market.capacities):
        raise NonUnitCapacities("RSD and PS need every capacity equal to 1")


def rsd_interim(market: Market, profile: Optional[OrdinalProfile] = None) -> tuple:
    """Exact expected allocation of random serial dictatorship over all n! orders."""
    _unit_caps(market)
    n, m = market.n, market.m
    if n > RSD_MAX_AGENTS:
        raise TooManyAgents(f"n = {n} > {RSD_MAX_AGENTS}: n! enumeration refused")
    prof = profile or OrdinalProfile.from_market(market)
    counts = [[0] * m for _ in range(n)]
    total = 0
    for order in itertools.permutations(range(n)):
        taken = set()
        for i in order:
            j = next(j for j in prof.orders[i] if j not in taken)
            taken.add(j)
            counts[i][j] += 1
        total += 1
    return tuple(tuple(Fraction(c, total) for c in row) for row in counts)


def ps_interim(market: Market, profile: Optional[OrdinalProfile] = None) -> tuple:
    """Simultaneous eating at unit speed, with exact breakpoints."""
    _unit_caps(market)
    n, m = market.n, market.m
    prof = profile or OrdinalProfile.from_market(market)
    left = [Fraction(c) for c in market.capacities]
    x = [[Fraction(0)] * m for _ in range(n)]
    t = Fraction(0)
    while t < 1:
        target = []
        for i in range(n):
            target.append(next((j for j in prof.orders[i] if left[j] > 0), None))
        eaters = {}
        for i, j in enumerate(target):
            if j is not None:
                eaters[j] = eaters.get(j, 0) + 1
        if not eaters:
            break
        dt = min([left[j] / k for j, k in eaters.items()] + [1 - t])
        for i, j in enumerate(target):
            if j is not None:
                x[i][j] += dt
        for j, k in eaters.items():
            left[j] -= dt * k
        t += dt
    return tuple(tuple(r) for r in x)


@dataclass(frozen=True)
class MechanismRow:
    name: str
    allocation: tuple
    utilities: tuple
    pareto_efficient: bool
    pareto_gain: Fraction
    envy_free: bool


@dataclass(frozen=True)
class MechanismReport:
    rows: tuple
    notes: tuple = ()

    def row(self, name) -> MechanismRow:
        return next(r for r in self.rows if r.name == name)

    def to_json(self) -> dict:
        return {
            "mechanisms": [
                {
                    "name": r.name,
                    "allocation": [[format_rational(v) for v in row] for row in r.allocation],
                    "utilities": [format_rational(u) for u in r.utilities],
                    "pareto_efficient": r.pareto_efficient,
                    "pareto_gain": format_rational(r.pareto_gain),
                    "envy_free": r.envy_free,
                }
                for r in self.rows
            ],
            "notes": list(self.notes),
        }


def _row(market, name, x) -> MechanismRow:
    par = check_pareto_efficient(market, x)
    env = check_envy_free(market, x)
    us = tuple(row_value(market.values[i], x[i]) for i in range(market.n))
    return MechanismRow(name, tuple(tuple(r) for r in x), us, par.efficient, par.gain, env.envy_free)


def mechanism_report(market: Market, equilibrium_allocation=None, profile=None, solver=None) -> MechanismReport:
    """RSD, PS and a market equilibrium side by side with efficiency and envy verdicts.

    ``solver`` maps a market to a list of certificates; by default the CLI's
    automatic dispatch is used.
    """
    rows = [_row(market, "rsd", rsd_interim(market, profile)), _row(market, "ps", ps_interim(market, profile))]
    notes = []
    x = equilibrium_allocation
    if x is None:
        if solver is None:
            from hzmarket.cli import solve_auto
            solver = solve_auto
        certs = solver(market)
        exact = [c for c in certs if c.mode == "exact"]
        if exact:
            x = exact[0].allocation
        else:
            notes.append("no exact equilibrium certificate available")
    if x is not None:
        rows.append(_row(market, "equilibrium", x))
    return MechanismReport(tuple(rows), tuple(notes))
