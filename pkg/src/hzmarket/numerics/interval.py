"""Closed intervals with rational endpoints.

Endpoints are ``Fraction`` objects, so arithmetic is exact; ``widen`` rounds
endpoints outward onto a dyadic grid to keep their size bounded.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

from hzmarket.errors import IndeterminateSign


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def _floor_dyadic(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(math.floor(x * scale), scale)


def _ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(math.ceil(x * scale), scale)


class Interval:
    """Closed interval ``[lo, hi]``.

    ``eps`` records the width the producer was asked to reach; it does not
    take part in arithmetic.
    """

    __slots__ = ("lo", "hi", "eps")

    def __init__(self, lo, hi=None, eps=None):
        lo = _frac(lo)
        hi = lo if hi is None else _frac(hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi
        self.eps = None if eps is None else _frac(eps)

    @classmethod
    def around(cls, center, radius, eps=None) -> "Interval":
        c = _frac(center)
        r = abs(_frac(radius))
        return cls(c - r, c + r, eps)

    # --- queries -------------------------------------------------------
    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        x = x if isinstance(x, Interval) else Interval(x)
        return self.lo <= x.lo and x.hi <= self.hi

    def sign(self) -> int:
        """Sign of every point in the interval; raises if 0 is inside."""
        if self.lo > 0:
            return 1
        if self.hi < 0:
            return -1
        if self.lo == 0 and self.hi == 0:
            return 0
        raise IndeterminateSign(f"interval [{float(self.lo)}, {float(self.hi)}] contains 0")

    def widen(self, bits: int = 64) -> "Interval":
        return Interval(_floor_dyadic(self.lo, bits), _ceil_dyadic(self.hi, bits), self.eps)

    # --- arithmetic ----------------------------------------------------
    @staticmethod
    def _coerce(other) -> "Interval":
        if isinstance(other, Interval):
            return other
        return Interval(other)

    def __add__(self, other):
        o = self._coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi, self.eps)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo, self.eps)

    def __sub__(self, other):
        o = self._coerce(other)
        return Interval(self.lo - o.hi, self.hi - o.lo, self.eps)

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(ps), max(ps), self.eps)

    __rmul__ = __mul__

    def reciprocal(self) -> "Interval":
        if self.lo <= 0 <= self.hi:
            raise IndeterminateSign("division by an interval containing 0")
        return Interval(1 / self.hi, 1 / self.lo, self.eps)

    def __truediv__(self, other):
        return self * self._coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.reciprocal()

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        if k == 0:
            return Interval(1, 1, self.eps)
        if k % 2 == 1 or self.lo >= 0:
            lo, hi = self.lo ** k, self.hi ** k
            return Interval(min(lo, hi), max(lo, hi), self.eps)
        if self.hi <= 0:
            return Interval(self.hi ** k, self.lo ** k, self.eps)
        return Interval(0, max(self.lo ** k, self.hi ** k), self.eps)

    def __eq__(self, other):
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self):
        return hash((self.lo, self.hi))

    def __float__(self):
        return float(self.mid)

    def __repr__(self):
        return f"Interval({self.lo}, {self.hi})"


def hull(*items) -> Interval:
    ivs = [x if isinstance(x, Interval) else Interval(x) for x in items]
    return Interval(min(i.lo for i in ivs), max(i.hi for i in ivs))
