"""Domain types, instance validation and the exact/certified scalar layer.

Every number on the trusted path is either a ``Fraction`` (exact) or an
:class:`~hzmarket.numerics.interval.Interval` (certified). Floats are only
ever produced for seeding and reporting.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

from hzmarket.errors import (
    CapacityMismatch,
    DimensionMismatch,
    EmptyMarket,
    IndeterminateSign,
    InvalidMarket,
    NegativeValue,
)
from hzmarket.numerics.interval import Interval

Scalar = Union[Fraction, Interval]

DEFAULT_EPS = Fraction(1, 2**64)


def parse_rational(raw) -> Fraction:
    """Parse ``"p/q"``, a decimal string, or an int into an exact Fraction.

    Floats are rejected: a binary float in an instance file would already
    have lost the value the author meant.
    """
    if isinstance(raw, bool):
        raise InvalidMarket(f"not a rational: {raw!r}")
    if isinstance(raw, Fraction):
        return raw
    if isinstance(raw, int):
        return Fraction(raw)
    if isinstance(raw, str):
        try:
            return Fraction(raw.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidMarket(f"not a rational: {raw!r}") from exc
    raise InvalidMarket(f"rationals must be strings or ints, got {type(raw).__name__}: {raw!r}")


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def is_exact(x) -> bool:
    return isinstance(x, (Fraction, int))


def sign(x) -> int:
    """Sign of an exact or certified scalar.

    Raises ``IndeterminateSign`` for an interval that contains zero in its
    interior instead of guessing.
    """
    if isinstance(x, Interval):
        return x.sign()
    return (x > 0) - (x < 0)


def to_interval(x, eps=None) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval(x, x, eps)


def midpoint(x) -> Fraction:
    return x.mid if isinstance(x, Interval) else Fraction(x)


@dataclass(frozen=True)
class Market:
    """A matching market: ``n`` unit-demand agents, ``m`` divisible items.

    Budgets are all 1 and ``sum(capacities) == n`` is enforced by
    :func:`validate_market`.
    """

    values: tuple[tuple[Fraction, ...], ...]
    capacities: tuple[Fraction, ...]
    unique_top: tuple[bool, ...] = field(default=())

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.capacities)

    def top_item(self, i: int) -> int:
        row = self.values[i]
        best = max(row)
        return row.index(best)

    @property
    def all_unique_tops(self) -> bool:
        return all(self.unique_top)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "values": [[format_rational(v) for v in row] for row in self.values],
            "capacities": [format_rational(c) for c in self.capacities],
        }


def validate_market(raw) -> Market:
    """Build a validated :class:`Market` from a dict (JSON schema) or a Market.

    Accepts ``{"n", "m", "values", "capacities"}``; ``n``/``m`` are optional
    but must agree with the matrix shape when present.
    """
    if isinstance(raw, Market):
        raw = {"values": raw.values, "capacities": raw.capacities}
    if not isinstance(raw, dict):
        raise InvalidMarket("instance must be a mapping")
    try:
        values_raw = raw["values"]
        caps_raw = raw["capacities"]
    except KeyError as exc:
        raise InvalidMarket(f"missing field {exc}") from exc
    values = tuple(tuple(parse_rational(v) for v in row) for row in values_raw)
    caps = tuple(parse_rational(c) for c in caps_raw)
    n, m = len(values), len(caps)
    if n == 0 or m == 0:
        raise EmptyMarket("need at least one agent and one item")
    if "n" in raw and raw["n"] != n:
        raise DimensionMismatch(f"n={raw['n']} but {n} value rows")
    if "m" in raw and raw["m"] != m:
        raise DimensionMismatch(f"m={raw['m']} but {m} capacities")
    for i, row in enumerate(values):
        if len(row) != m:
            raise DimensionMismatch(f"value row {i} has {len(row)} entries, expected {m}")
        for j, v in enumerate(row):
            if v < 0:
                raise NegativeValue(f"v[{i}][{j}] = {v} < 0")
    for j, c in enumerate(caps):
        if c < 0:
            raise NegativeValue(f"C[{j}] = {c} < 0")
    if sum(caps) != n:
        raise CapacityMismatch(f"sum of capacities is {sum(caps)}, expected n = {n}")
    unique = tuple(sum(1 for v in row if v == max(row)) == 1 for row in values)
    return Market(values, caps, unique)


def load_market(path) -> Market:
    with open(path) as fh:
        return validate_market(json.load(fh))


def allocation_value(market: Market, allocation: Sequence[Sequence], i: int):
    """Value ``sum_j v_ij x_ij`` of agent ``i``'s row."""
    if not 0 <= i < market.n:
        raise DimensionMismatch(f"agent {i} out of range")
    if len(allocation) != market.n:
        raise DimensionMismatch("allocation must have one row per agent")
    row = allocation[i]
    if len(row) != market.m:
        raise DimensionMismatch("allocation row length must equal m")
    total = Fraction(0)
    for v, x in zip(market.values[i], row):
        total = x * v + total
    return total


def row_value(values_row, x_row):
    total = Fraction(0)
    for v, x in zip(values_row, x_row):
        total = x * v + total
    return total


def check_allocation(market: Market, allocation) -> list[str]:
    """List of violated Allocation invariants (empty when exact-feasible)."""
    problems = []
    if len(allocation) != market.n or any(len(r) != market.m for r in allocation):
        return ["dimension mismatch"]
    for i, row in enumerate(allocation):
        for j, x in enumerate(row):
            if sign(x) < 0:
                problems.append(f"x[{i}][{j}] < 0")
        if sum(row, Fraction(0)) != 1:
            problems.append(f"row {i} sums to {sum(row, Fraction(0))}")
    for j in range(market.m):
        col = sum((allocation[i][j] for i in range(market.n)), Fraction(0))
        if col > market.capacities[j]:
            problems.append(f"item {j} over capacity")
    return problems


def frac_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(parse_rational(x) if not isinstance(x, Interval) else x for x in r) for r in rows)


__all__ = [
    "DEFAULT_EPS",
    "IndeterminateSign",
    "Market",
    "Scalar",
    "allocation_value",
    "check_allocation",
    "format_rational",
    "is_exact",
    "load_market",
    "midpoint",
    "parse_rational",
    "row_value",
    "sign",
    "to_interval",
    "validate_market",
]
