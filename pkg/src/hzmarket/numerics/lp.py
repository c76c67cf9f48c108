"""Exact rational linear programming.

Dense two-phase simplex over ``Fraction`` with Bland's anti-cycling rule.
Instances in this package are tiny (tens of variables), so the tableau is a
plain list of lists.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence

LE, EQ, GE = "<=", "=", ">="
_ZERO = Fraction(0)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class Constraint:
    row: tuple
    rel: str
    rhs: Fraction


@dataclass
class LinearProgram:
    """``max objective.x`` (or pure feasibility when objective is None).

    ``lower[k] is None`` marks variable ``k`` as free; ``upper[k] is None``
    means no upper bound.
    """

    n_vars: int
    objective: Optional[Sequence] = None
    constraints: list = field(default_factory=list)
    lower: Optional[list] = None
    upper: Optional[list] = None
    sense: str = "max"

    def __post_init__(self):
        if self.lower is None:
            self.lower = [_ZERO] * self.n_vars
        if self.upper is None:
            self.upper = [None] * self.n_vars
        if len(self.lower) != self.n_vars or len(self.upper) != self.n_vars:
            raise ValueError("bound vectors must have n_vars entries")
        if self.objective is not None and len(self.objective) != self.n_vars:
            raise ValueError("objective length must equal n_vars")
        if self.sense not in ("max", "min"):
            raise ValueError("sense must be 'max' or 'min'")

    def add(self, row, rel, rhs) -> int:
        if len(row) != self.n_vars:
            raise ValueError(f"row has {len(row)} entries, expected {self.n_vars}")
        if rel not in (LE, EQ, GE):
            raise ValueError(f"unknown relation {rel!r}")
        self.constraints.append(Constraint(tuple(Fraction(a) for a in row), rel, Fraction(rhs)))
        return len(self.constraints) - 1


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    value: Optional[Fraction] = None
    x: Optional[tuple] = None
    duals: Optional[tuple] = None
    dual_value: Optional[Fraction] = None

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _pivot(tab, basis, r, c):
    prow = tab[r]
    piv = prow[c]
    if piv != 1:
        inv = 1 / piv
        prow = [a * inv if a else a for a in prow]
        tab[r] = prow
    nz = [k for k, a in enumerate(prow) if a]
    for i, row in enumerate(tab):
        if i == r:
            continue
        f = row[c]
        if f:
            for k in nz:
                row[k] -= f * prow[k]
    basis[r] = c


def _simplex(tab, basis, cost, allowed):
    """Maximize ``cost.x`` over the tableau in place. Returns False if unbounded."""
    n_cols = len(tab[0]) - 1
    while True:
        # reduced costs r_j = c_j - sum_i c_{B_i} T_ij, smallest improving index enters
        cb = [cost[b] for b in basis]
        enter = -1
        for j in range(n_cols):
            if not allowed[j] or j in basis:
                continue
            rj = cost[j]
            for i, row in enumerate(tab):
                if row[j] and cb[i]:
                    rj -= cb[i] * row[j]
            if rj > 0:
                enter = j
                break
        if enter < 0:
            return True
        leave = -1
        best = None
        for i, row in enumerate(tab):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return False
        _pivot(tab, basis, leave, enter)


def _solve_consistent(rows, rhs, width):
    """One exact solution of the consistent system ``rows . y = rhs``.

    ``rows`` has full row rank; unknowns without a pivot are set to 0.
    """
    k = len(rows)
    mat = [list(rows[r]) + [rhs[r]] for r in range(k)]
    pivots = []
    col = 0
    for r in range(k):
        while col < width:
            piv = next((t for t in range(r, k) if mat[t][col] != 0), None)
            if piv is not None:
                break
            col += 1
        if col == width:
            raise ArithmeticError("basis matrix lost rank")
        mat[r], mat[piv] = mat[piv], mat[r]
        inv = 1 / mat[r][col]
        mat[r] = [a * inv for a in mat[r]]
        for t in range(k):
            if t != r and mat[t][col]:
                f = mat[t][col]
                mat[t] = [a - f * b for a, b in zip(mat[t], mat[r])]
        pivots.append(col)
        col += 1
    y = [_ZERO] * width
    for r, c in enumerate(pivots):
        y[c] = mat[r][-1]
    return y


def lp_solve(lp: LinearProgram) -> LpOutcome:
    """Solve ``lp`` exactly.

    Returns Optimal with a vertex solution, duals for the user constraints and
    the dual objective (equal to the primal value by strong duality), or a
    certified Infeasible/Unbounded status.
    """
    n = lp.n_vars
    sgn = 1 if lp.sense == "max" else -1
    obj = [Fraction(c) * sgn for c in lp.objective] if lp.objective is not None else [_ZERO] * n

    # column map: x_k = lower_k + sum(coef * col)
    col_of = []
    n_struct = 0
    for k in range(n):
        if lp.lower[k] is None:
            col_of.append(((n_struct, 1), (n_struct + 1, -1)))
            n_struct += 2
        else:
            col_of.append(((n_struct, 1),))
            n_struct += 1
    shift = [Fraction(lp.lower[k]) if lp.lower[k] is not None else _ZERO for k in range(n)]

    def expand(row):
        out = [_ZERO] * n_struct
        for k, a in enumerate(row):
            if a:
                for c, s in col_of[k]:
                    out[c] += a * s
        return out

    rows = []  # (dense struct row, rel, rhs)
    for con in lp.constraints:
        rhs = con.rhs - sum((a * s for a, s in zip(con.row, shift)), _ZERO)
        rows.append((expand(con.row), con.rel, rhs))
    n_user = len(rows)
    for k in range(n):
        if lp.upper[k] is not None:
            if lp.lower[k] is not None and Fraction(lp.upper[k]) < Fraction(lp.lower[k]):
                return LpOutcome(LpStatus.INFEASIBLE)
            unit = [_ZERO] * n
            unit[k] = Fraction(1)
            rows.append((expand(unit), LE, Fraction(lp.upper[k]) - shift[k]))

    n_rows = len(rows)
    n_slack = sum(1 for _, rel, _ in rows if rel != EQ)
    slack_start = n_struct
    art_start = slack_start + n_slack
    n_total = art_start + n_rows
    tab = []
    basis = []
    s = slack_start
    for r, (dense, rel, rhs) in enumerate(rows):
        line = dense + [_ZERO] * (n_total - n_struct) + [rhs]
        if rel == LE:
            line[s] = Fraction(1)
            s += 1
        elif rel == GE:
            line[s] = Fraction(-1)
            s += 1
        if rhs < 0:
            line = [-a for a in line]
        line[art_start + r] = Fraction(1)
        tab.append(line)
        basis.append(art_start + r)
    # rows whose slack already forms a unit column start with the slack basic
    s = slack_start
    for r, (_, rel, _) in enumerate(rows):
        if rel != EQ:
            if tab[r][s] == 1:
                basis[r] = s
            s += 1

    allowed_all = [True] * n_total
    phase1_cost = [_ZERO] * n_total
    for r in range(n_rows):
        phase1_cost[art_start + r] = Fraction(-1)
    if any(b >= art_start for b in basis):
        _simplex(tab, basis, phase1_cost, allowed_all)
        infeas = sum((tab[r][-1] for r in range(n_rows) if basis[r] >= art_start), _ZERO)
        if infeas > 0:
            return LpOutcome(LpStatus.INFEASIBLE)
    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for r in range(n_rows):
        if basis[r] >= art_start:
            col = next((j for j in range(art_start) if tab[r][j] != 0), None)
            if col is None:
                continue
            _pivot(tab, basis, r, col)
        keep.append(r)
    tab = [tab[r] for r in keep]
    basis = [basis[r] for r in keep]

    cost = [_ZERO] * n_total
    for k in range(n):
        for c, sg in col_of[k]:
            cost[c] += obj[k] * sg
    allowed = [j < art_start for j in range(n_total)]
    if not _simplex(tab, basis, cost, allowed):
        return LpOutcome(LpStatus.UNBOUNDED)

    xs = [_ZERO] * n_total
    for r, b in enumerate(basis):
        xs[b] = tab[r][-1]
    x = []
    for k in range(n):
        x.append(shift[k] + sum((xs[c] * sg for c, sg in col_of[k]), _ZERO))
    value = sum((Fraction(c) * xv for c, xv in zip(lp.objective, x)), _ZERO) if lp.objective is not None else _ZERO

    # duals: B^T y = c_B over every original row; a dropped redundant row is a
    # combination of the others, so its multiplier can be taken as 0
    slack_col = {}
    s = slack_start
    for r, (_, rel, _) in enumerate(rows):
        if rel != EQ:
            slack_col[r] = (s, 1 if rel == LE else -1)
            s += 1

    def column(j, r):
        dense, rel, rhs = rows[r]
        if j < n_struct:
            return dense[j]
        if r in slack_col and slack_col[r][0] == j:
            return Fraction(slack_col[r][1])
        return _ZERO

    bt = [[column(b, r) for r in range(n_rows)] for b in basis]
    cb = [cost[b] for b in basis]
    y = _solve_consistent(bt, cb, n_rows) if bt else [_ZERO] * n_rows
    y = [yv * sgn for yv in y]
    const = sum((Fraction(c) * sh for c, sh in zip(lp.objective, shift)), _ZERO) if lp.objective is not None else _ZERO
    dual_value = const + sum((y[r] * rows[r][2] for r in range(n_rows)), _ZERO)
    return LpOutcome(LpStatus.OPTIMAL, value, tuple(x), tuple(y[:n_user]), dual_value)


def feasible_point(lp: LinearProgram) -> Optional[tuple]:
    """A feasible vertex of ``lp``'s constraint set, or None."""
    probe = LinearProgram(lp.n_vars, None, list(lp.constraints), list(lp.lower), list(lp.upper))
    out = lp_solve(probe)
    return out.x if out.optimal else None
