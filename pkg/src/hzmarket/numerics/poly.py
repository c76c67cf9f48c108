"""Sparse multivariate polynomials with rational coefficients."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


class Poly:
    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for exps, c in terms.items():
                c = Fraction(c)
                if c:
                    self.terms[tuple(exps)] = c

    # --- constructors --------------------------------------------------
    @classmethod
    def const(cls, c, nvars: int) -> "Poly":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, k: int, nvars: int) -> "Poly":
        e = [0] * nvars
        e[k] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def linear(cls, coeffs, const, nvars: int) -> "Poly":
        terms = {(0,) * nvars: Fraction(const)}
        for k, a in enumerate(coeffs):
            if a:
                e = [0] * nvars
                e[k] = 1
                terms[tuple(e)] = Fraction(a)
        return cls(nvars, terms)

    # --- arithmetic ----------------------------------------------------
    def _lift(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("polynomials over different variable counts")
            return other
        return Poly.const(other, self.nvars)

    def __add__(self, other):
        o = self._lift(other)
        out = dict(self.terms)
        for e, c in o.terms.items():
            s = out.get(e, 0) + c
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Poly(self.nvars, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(1, self.nvars)
        for _ in range(k):
            out = out * self
        return out

    # --- structure -----------------------------------------------------
    @property
    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def variables(self) -> set:
        return {k for e in self.terms for k, a in enumerate(e) if a}

    def linear_coeffs(self):
        """``(coeffs, const)`` of a degree-<=1 polynomial."""
        if self.degree > 1:
            raise ValueError("not linear")
        coeffs = [Fraction(0)] * self.nvars
        const = Fraction(0)
        for e, c in self.terms.items():
            if sum(e) == 0:
                const = c
            else:
                coeffs[e.index(1)] = c
        return coeffs, const

    def diff(self, k: int) -> "Poly":
        out = {}
        for e, c in self.terms.items():
            if e[k]:
                ne = list(e)
                ne[k] -= 1
                out[tuple(ne)] = c * e[k]
        return Poly(self.nvars, out)

    def substitute(self, mapping: dict) -> "Poly":
        """Replace variables by polynomials over the same variable set."""
        out = Poly(self.nvars)
        cache = {}
        for e, c in self.terms.items():
            term = Poly.const(c, self.nvars)
            rest = list(e)
            for k, a in enumerate(e):
                if a and k in mapping:
                    key = (k, a)
                    if key not in cache:
                        cache[key] = mapping[k] ** a
                    term = term * cache[key]
                    rest[k] = 0
            if any(rest):
                term = term * Poly(self.nvars, {tuple(rest): 1})
            out = out + term
        return out

    # --- evaluation ----------------------------------------------------
    def __call__(self, point):
        total = None
        for e, c in self.terms.items():
            t = c
            for k, a in enumerate(e):
                if a:
                    t = t * (point[k] ** a if a > 1 else point[k])
            total = t if total is None else total + t
        if total is None:
            return Fraction(0)
        return total

    def compile(self):
        """Float evaluator: returns ``(coeff array, exponent matrix)``."""
        if not self.terms:
            return np.zeros(0), np.zeros((0, self.nvars), dtype=np.int64)
        exps = np.array(list(self.terms.keys()), dtype=np.int64).reshape(len(self.terms), self.nvars)
        coefs = np.array([float(c) for c in self.terms.values()])
        return coefs, exps

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mon = "*".join(f"z{k}" + (f"^{a}" if a > 1 else "") for k, a in enumerate(e) if a)
            parts.append(f"{c}" + (f"*{mon}" if mon else ""))
        return " + ".join(parts)


@dataclass
class PolySystem:
    """Equalities ``eq == 0`` and inequalities ``ineq > 0`` (strict) / ``>= 0``."""

    nvars: int
    eqs: list = field(default_factory=list)
    ineqs: list = field(default_factory=list)  # (Poly, strict: bool)
    names: list = field(default_factory=list)

    def var(self, k: int) -> Poly:
        return Poly.var(k, self.nvars)

    def const(self, c) -> Poly:
        return Poly.const(c, self.nvars)

    def add_eq(self, p: Poly):
        if not p.is_zero():
            self.eqs.append(p)

    def add_gt(self, p: Poly):
        self.ineqs.append((p, True))

    def add_ge(self, p: Poly):
        self.ineqs.append((p, False))

    @property
    def max_degree(self) -> int:
        return max([p.degree for p in self.eqs] + [p.degree for p, _ in self.ineqs] + [0])


class FloatSystem:
    """Vectorised float evaluation of a PolySystem's equalities and Jacobian."""

    def __init__(self, polys, nvars):
        self.nvars = nvars
        self.f = [p.compile() for p in polys]
        self.jac = [[p.diff(k).compile() for k in range(nvars)] for p in polys]

    @staticmethod
    def _ev(compiled, x):
        coefs, exps = compiled
        if coefs.size == 0:
            return 0.0
        return float(np.dot(coefs, np.prod(np.power(x, exps), axis=1)))

    def F(self, x):
        return np.array([self._ev(c, x) for c in self.f])

    def J(self, x):
        return np.array([[self._ev(c, x) for c in row] for row in self.jac]).reshape(len(self.f), self.nvars)
