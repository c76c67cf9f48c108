"""Seeded solving of small polynomial systems with exact or certified output.

The solver is local: it starts from a numeric seed, so failure to converge
(``NoSolutionFound``) says nothing about whether a solution exists.

Pipeline:

1. linear equalities are eliminated exactly by Gauss-Jordan over Fractions;
2. free directions (rank deficiency at a float Newton solution) are pinned to
   small-denominator rationals near the seed;
3. newly linear equalities are eliminated again; a single remaining variable
   with a quadratic is solved in closed form;
4. anything else goes through high-precision Newton, rational reconstruction,
   and finally a certified interval box.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional

import mpmath
import numpy as np
from scipy.linalg import qr

from hzmarket.errors import IndeterminateSign, NoSolutionFound
from hzmarket.numerics.interval import Interval
from hzmarket.numerics.poly import FloatSystem, Poly, PolySystem

DEFAULT_EPS = Fraction(1, 2**64)
RECONSTRUCT_BOUND = 2**40
_PIN_BOUNDS = (2**20, 2**12, 2**8, 2**5, 2**3, 2, 1)
_HP_BITS = 256


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, mpmath.mpf):
        man, exp = x.man_exp
        return Fraction(int(man)) * (Fraction(2) ** int(exp))
    if isinstance(x, Interval):
        return x.mid
    if isinstance(x, str):
        return Fraction(x)
    return Fraction(float(x))


def rational_reconstruct(x, bound: int) -> Optional[Fraction]:
    """The unique rational with denominator <= ``bound`` within ``1/(2 bound^2)`` of ``x``.

    Any such rational is a continued-fraction convergent of ``x``, so only
    convergents are inspected.
    """
    if bound < 1:
        raise ValueError("denominator bound must be >= 1")
    target = to_fraction(x)
    tol = Fraction(1, 2 * bound * bound)
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    rest = target
    best = None
    while True:
        a = math.floor(rest)
        h0, h1 = h1, a * h1 + h0
        k0, k1 = k1, a * k1 + k0
        if k1 > bound:
            break
        best = Fraction(h1, k1)
        frac = rest - a
        if frac == 0:
            break
        rest = 1 / frac
    if best is not None and abs(target - best) < tol:
        return best
    return None


# --- exact linear elimination ---------------------------------------------

def _eliminate(linear: list, nvars: int, blocked=frozenset()):
    """Gauss-Jordan on linear polynomials.

    Returns ``{var: affine Poly in the non-pivot variables}`` or None when the
    equations are inconsistent. Variables in ``blocked`` are never pivots.
    """
    rows = []
    for p in linear:
        coeffs, const = p.linear_coeffs()
        rows.append(list(coeffs) + [-const])
    pivots = []
    r = 0
    for col in range(nvars):
        if col in blocked:
            continue
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        inv = 1 / rows[r][col]
        rows[r] = [a * inv for a in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    for i in range(r, len(rows)):
        if all(a == 0 for a in rows[i][:-1]):
            if rows[i][-1] != 0:
                return None
        else:
            # only blocked columns remain; cannot be eliminated here
            return None
    out = {}
    for i, col in enumerate(pivots):
        coeffs = [-a if k != col else 0 for k, a in enumerate(rows[i][:-1])]
        out[col] = Poly.linear(coeffs, rows[i][-1], nvars)
    return out


class _Reduction:
    """Running substitution ``var -> Poly in the still-open variables``."""

    def __init__(self, nvars: int):
        self.nvars = nvars
        self.assign: dict = {}

    def apply(self, p: Poly) -> Poly:
        return p.substitute(self.assign) if self.assign else p

    def bind(self, new: dict):
        for k in list(self.assign):
            self.assign[k] = self.assign[k].substitute(new)
        self.assign.update(new)

    def open_vars(self):
        return [k for k in range(self.nvars) if k not in self.assign]

    def reduce(self, eqs: list):
        """Eliminate linear equalities to a fixed point; return the nonlinear rest."""
        current = [self.apply(p) for p in eqs]
        while True:
            current = [p for p in current if not p.is_zero()]
            for p in current:
                if p.degree == 0:
                    return None
            lin = [p for p in current if p.degree == 1]
            if not lin:
                return current
            sol = _eliminate(lin, self.nvars, blocked=frozenset(self.assign))
            if sol is None:
                return None
            self.bind(sol)
            current = [p.substitute(sol) for p in current if p.degree > 1]

    def point(self, values: dict):
        pt = []
        for k in range(self.nvars):
            if k in self.assign:
                pt.append(self.assign[k](_Lookup(values)))
            else:
                pt.append(values[k])
        return pt


class _Lookup:
    def __init__(self, values):
        self.values = values

    def __getitem__(self, k):
        return self.values[k]


# --- inequality and residual checks ---------------------------------------

def _ineqs_hold(system: PolySystem, pt) -> bool:
    """Exact or certified check; raises IndeterminateSign when unsure."""
    for p, strict in system.ineqs:
        val = p(pt)
        if isinstance(val, Interval):
            if strict:
                if val.lo > 0:
                    continue
                if val.hi <= 0:
                    return False
                raise IndeterminateSign(f"cannot certify {p} > 0")
            if val.lo >= 0:
                continue
            if val.hi < 0:
                return False
            raise IndeterminateSign(f"cannot certify {p} >= 0")
        if val < 0 or (strict and val == 0):
            return False
    return True


def _residuals_ok(system: PolySystem, pt, eps) -> bool:
    for p in system.eqs:
        val = p(pt)
        if isinstance(val, Interval):
            if not (val.lo <= 0 <= val.hi and val.width < eps):
                return False
        elif val != 0:
            return False
    return True


def _ineqs_near(system: PolySystem, x, tol=1e-7) -> bool:
    for p, _ in system.ineqs:
        if _float_eval(p, x) < -tol:
            return False
    return True


def _float_eval(p: Poly, x) -> float:
    coefs, exps = p.compile()
    if coefs.size == 0:
        return 0.0
    return float(np.dot(coefs, np.prod(np.power(x, exps), axis=1)))


# --- numeric phases --------------------------------------------------------

def _float_newton(polys, nvars, x0, iters=200, tol=1e-12):
    if not polys:
        return np.asarray(x0, dtype=float)
    fs = FloatSystem(polys, nvars)
    x = np.asarray(x0, dtype=float).copy()
    f = fs.F(x)
    norm = np.linalg.norm(f)
    for _ in range(iters):
        if norm < tol:
            break
        J = fs.J(x)
        dx = np.linalg.lstsq(J, -f, rcond=None)[0]
        step = 1.0
        while step > 1e-6:
            xn = x + step * dx
            fn = fs.F(xn)
            nn = np.linalg.norm(fn)
            if nn < norm:
                break
            step /= 2
        else:
            break
        x, f, norm = xn, fn, nn
    return x if norm < 1e-8 else None


def _mp_compile(p: Poly):
    return [(mpmath.mpf(c.numerator) / c.denominator, e) for e, c in p.terms.items()]


def _mp_eval(compiled, x):
    total = mpmath.mpf(0)
    for c, e in compiled:
        t = c
        for k, a in enumerate(e):
            if a:
                t *= x[k] ** a
        total += t
    return total


def _hp_newton(polys, var_order, nvars, x0):
    """Newton in ``_HP_BITS`` precision on the variables ``var_order``."""
    with mpmath.workprec(_HP_BITS):
        fs = [_mp_compile(p) for p in polys]
        js = [[_mp_compile(p.diff(k)) for k in var_order] for p in polys]
        x = [mpmath.mpf(float(v)) for v in x0]
        for _ in range(60):
            F = mpmath.matrix([_mp_eval(f, x) for f in fs])
            if mpmath.norm(F) < mpmath.mpf(2) ** (-_HP_BITS + 16):
                break
            J = mpmath.matrix([[_mp_eval(d, x) for d in row] for row in js])
            try:
                if J.rows == J.cols:
                    dx = mpmath.lu_solve(J, -F)
                elif J.rows > J.cols:
                    dx = mpmath.qr_solve(J, -F)[0]
                else:
                    # minimum-norm step on an underdetermined system
                    Jt = J.T
                    dx = Jt * mpmath.lu_solve(J * Jt, -F)
            except (ZeroDivisionError, ValueError):
                return None
            for idx, k in enumerate(var_order):
                x[k] += dx[idx]
        F = [_mp_eval(f, x) for f in fs]
        if max((abs(v) for v in F), default=0) > mpmath.mpf(2) ** (-_HP_BITS // 2):
            return None
        return list(x)


def _sqrt_interval(d: Fraction, bits: int) -> Interval:
    scale = 1 << (2 * bits)
    num = d * scale
    lo = math.isqrt(math.floor(num))
    hi = lo if lo * lo == num else lo + 1
    return Interval(Fraction(lo, 1 << bits), Fraction(hi, 1 << bits))


def _exact_sqrt(d: Fraction) -> Optional[Fraction]:
    if d < 0:
        return None
    a, b = math.isqrt(d.numerator), math.isqrt(d.denominator)
    if a * a == d.numerator and b * b == d.denominator:
        return Fraction(a, b)
    return None


def _univariate_coeffs(p: Poly, k: int):
    out = [Fraction(0)] * (p.degree + 1)
    for e, c in p.terms.items():
        out[e[k]] += c
    return out


def _quadratic_roots(coeffs, bits):
    """Real roots of ``c0 + c1 z + c2 z^2`` (c2 != 0), exact when rational."""
    c0, c1, c2 = coeffs[0], coeffs[1], coeffs[2]
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    s = _exact_sqrt(disc)
    if s is not None:
        roots = {(-c1 - s) / (2 * c2), (-c1 + s) / (2 * c2)}
        return sorted(roots)
    sq = _sqrt_interval(disc, bits)
    return [(-c1 - sq) / (2 * c2), (-c1 + sq) / (2 * c2)]


def _float_of(v) -> float:
    return float(v.mid) if isinstance(v, Interval) else float(v)


# --- main entry -------------------------------------------------------------

def _pin_candidates(x: float):
    seen = []
    for bound in _PIN_BOUNDS:
        r = rational_reconstruct(x, bound)
        if r is not None and r not in seen:
            seen.append(r)
    tail = Fraction(x).limit_denominator(2**30)
    if tail not in seen:
        seen.append(tail)
    return seen


def _free_directions(polys, open_vars, nvars, x):
    """Open variables not determined by the Jacobian at ``x`` (QR pivoting)."""
    if not polys:
        return list(open_vars)
    fs = FloatSystem(polys, nvars)
    J = fs.J(x)[:, open_vars]
    if J.size == 0:
        return list(open_vars)
    _, R, piv = qr(J, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    scale = max(diag.max(), 1.0) if diag.size else 1.0
    rank = int(np.sum(diag > 1e-9 * scale))
    determined = {open_vars[c] for c in piv[:rank]}
    return [k for k in open_vars if k not in determined]


def _solve_remaining(system, red, rest, values, open_vars, x_float, mode, eps):
    """Solve ``rest`` (nonlinear, over ``open_vars``) given pinned ``values``."""
    nv = system.nvars
    if not rest:
        pt = red.point(values)
        return [pt]
    if len(open_vars) == 1 and all(p.degree <= 2 for p in rest):
        k = open_vars[0]
        p0 = min(rest, key=lambda p: (p.degree, len(p.terms)))
        coeffs = _univariate_coeffs(p0, k)
        out = []
        bits = 80
        for _ in range(6):
            roots = _quadratic_roots(coeffs, bits)
            out = []
            for z in roots:
                vals = dict(values)
                vals[k] = Interval(z.lo, z.hi, eps) if isinstance(z, Interval) else z
                pt = red.point(vals)
                if _residuals_ok(system, pt, eps):
                    out.append(pt)
            if out and all(not isinstance(c, Interval) or c.width < eps for pt in out for c in pt):
                break
            bits *= 2
        if any(isinstance(c, Interval) for pt in out for c in pt) and mode == "exact":
            raise NoSolutionFound("solution is irrational; exact mode cannot represent it")
        out.sort(key=lambda pt: abs(_float_of(pt[k]) - x_float[k]))
        return out
    # general: high precision Newton on the open variables
    hp = _hp_newton(rest, open_vars, nv, x_float)
    if hp is None:
        raise NoSolutionFound("high-precision Newton did not converge")
    exact = {}
    for k in open_vars:
        r = rational_reconstruct(hp[k], RECONSTRUCT_BOUND)
        if r is None:
            break
        exact[k] = r
    if len(exact) == len(open_vars):
        vals = dict(values)
        vals.update(exact)
        pt = red.point(vals)
        if _residuals_ok(system, pt, eps):
            return [pt]
    if mode == "exact":
        raise NoSolutionFound("no rational solution near the seed")
    radius = eps / 64
    for _ in range(8):
        vals = dict(values)
        for k in open_vars:
            vals[k] = Interval.around(to_fraction(hp[k]), radius, eps)
        pt = red.point(vals)
        if _residuals_ok(system, pt, eps):
            return [pt]
        radius /= 2
    raise NoSolutionFound("could not certify a residual box")


def solve_poly_system(system: PolySystem, seed, mode: str = "exact", eps=None) -> list:
    """Solve ``system`` near ``seed``.

    ``mode`` is ``"exact"`` (rational output or NoSolutionFound) or
    ``"certify"`` (rational where possible, otherwise Interval coordinates of
    width below ``eps``). Returns a list of points, nearest to the seed first.
    """
    if mode not in ("exact", "certify"):
        raise ValueError(f"unknown mode {mode!r}")
    eps = DEFAULT_EPS if eps is None else Fraction(eps)
    nv = system.nvars
    if len(seed) != nv:
        raise ValueError(f"seed has {len(seed)} coordinates, system has {nv}")
    if not system.eqs:
        pt = [to_fraction(s) for s in seed]
        if not _ineqs_hold(system, pt):
            raise NoSolutionFound("seed violates the inequalities")
        return [pt]

    red = _Reduction(nv)
    rest = red.reduce(system.eqs)
    if rest is None:
        raise NoSolutionFound("linear part is inconsistent")
    open_vars = red.open_vars()
    x0 = np.array([float(s) for s in seed])
    # project the seed onto the linear part, then polish on the nonlinear rest
    xf = _float_newton(rest, nv, x0) if rest else x0
    if xf is None:
        raise NoSolutionFound("float Newton did not converge from the seed")
    free = _free_directions(rest, open_vars, nv, xf)
    cands = [_pin_candidates(xf[k]) for k in free]
    depth = max((len(c) for c in cands), default=1)
    last_error: Exception = NoSolutionFound("no pinning satisfied the inequalities")
    for level in range(depth):
        trial = _Reduction(nv)
        trial.assign = dict(red.assign)
        pins = {k: Poly.const(c[min(level, len(c) - 1)], nv) for k, c in zip(free, cands)}
        trial.bind(pins)
        rest2 = trial.reduce(rest)
        if rest2 is None:
            continue
        ov = trial.open_vars()
        if not rest2 and ov:
            extra = {}
            for k in ov:
                c = _pin_candidates(xf[k])
                extra[k] = Poly.const(c[min(level, len(c) - 1)], nv)
            trial.bind(extra)
            pins.update(extra)
            ov = []
        if rest2 and len(ov) > 0:
            xs = _float_newton(rest2, nv, _with_pins(xf, pins))
            if xs is None:
                continue
        else:
            xs = _with_pins(xf, pins)
        try:
            pts = _solve_remaining(system, trial, rest2, {}, ov, xs, mode, eps)
        except NoSolutionFound as exc:
            last_error = exc
            continue
        good = [pt for pt in pts if _residuals_ok(system, pt, eps) and _ineqs_hold(system, pt)]
        if good:
            return good
    raise last_error


def _with_pins(x, pins):
    y = np.array(x, dtype=float)
    for k, p in pins.items():
        y[k] = float(p.linear_coeffs()[1])
    return y


def residuals(system: PolySystem, pt) -> list:
    return [p(pt) for p in system.eqs]
