import itertools
from fractions import Fraction as F

from hypothesis import given, settings, strategies as st

from hzmarket.numerics.lp import EQ, GE, LE, LinearProgram, LpStatus, feasible_point, lp_solve


def test_single_bound():
    lp = LinearProgram(1, [1])
    lp.add([1], LE, F(3, 7))
    out = lp_solve(lp)
    assert out.status is LpStatus.OPTIMAL
    assert out.value == F(3, 7) == out.dual_value


def test_infeasible():
    lp = LinearProgram(1)
    lp.add([1], GE, 1)
    lp.add([1], LE, 0)
    assert lp_solve(lp).status is LpStatus.INFEASIBLE
    assert feasible_point(lp) is None


def test_unbounded():
    lp = LinearProgram(2, [1, 1])
    lp.add([1, -1], LE, 1)
    assert lp_solve(lp).status is LpStatus.UNBOUNDED


def test_relaxed_demand_program():
    # v = (0, 1), p = (1/2, 3/2), spend <= 1, mass <= 1
    lp = LinearProgram(2, [0, 1])
    lp.add([F(1, 2), F(3, 2)], LE, 1)
    lp.add([1, 1], LE, 1)
    out = lp_solve(lp)
    assert out.value == F(2, 3)
    assert out.x == (0, F(2, 3))


def test_free_variable_and_min():
    lp = LinearProgram(2, [1, 1], lower=[None, 0], sense="min")
    lp.add([1, 0], GE, -3)
    lp.add([0, 1], GE, 2)
    out = lp_solve(lp)
    assert out.value == -1
    assert out.x == (-3, 2)


def test_equalities_and_upper_bounds():
    lp = LinearProgram(3, [1, 2, 3], upper=[None, 1, F(1, 2)])
    lp.add([1, 1, 1], EQ, 2)
    out = lp_solve(lp)
    assert out.value == F(1, 2) + 2 + F(3, 2)
    assert out.x == (F(1, 2), 1, F(1, 2))


# --- second solver: brute-force vertex enumeration -------------------------------

def _solve_square(A, b):
    n = len(A)
    M = [list(map(F, r)) + [F(v)] for r, v in zip(A, b)]
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return None
        M[c], M[piv] = M[piv], M[c]
        for r in range(n):
            if r != c and M[r][c]:
                f = M[r][c] / M[c][c]
                M[r] = [a - f * bb for a, bb in zip(M[r], M[c])]
    return [M[r][n] / M[r][r] for r in range(n)]


def _brute(nv, obj, cons):
    """cons: (row, rel, rhs); x >= 0 implied. Returns best value or None."""
    planes = [(row, rhs) for row, _, rhs in cons]
    planes += [([1 if k == j else 0 for k in range(nv)], 0) for j in range(nv)]
    best = None
    for combo in itertools.combinations(planes, nv):
        x = _solve_square([r for r, _ in combo], [b for _, b in combo])
        if x is None or any(v < 0 for v in x):
            continue
        ok = True
        for row, rel, rhs in cons:
            lhs = sum(a * v for a, v in zip(row, x))
            ok &= {LE: lhs <= rhs, GE: lhs >= rhs, EQ: lhs == rhs}[rel]
        if ok:
            val = sum(c * v for c, v in zip(obj, x))
            best = val if best is None else max(best, val)
    return best


coef = st.integers(-3, 3)


@st.composite
def small_lp(draw):
    nv = draw(st.integers(1, 3))
    obj = draw(st.lists(coef, min_size=nv, max_size=nv))
    cons = []
    for _ in range(draw(st.integers(0, 3))):
        row = draw(st.lists(coef, min_size=nv, max_size=nv))
        cons.append((row, draw(st.sampled_from([LE, GE, EQ])), F(draw(st.integers(-4, 6)), draw(st.integers(1, 3)))))
    # box keeps the feasible set bounded so the enumeration is complete
    for k in range(nv):
        cons.append(([1 if j == k else 0 for j in range(nv)], LE, F(draw(st.integers(1, 5)))))
    return nv, obj, cons


@settings(max_examples=300)
@given(small_lp())
def test_against_vertex_enumeration(case):
    nv, obj, cons = case
    lp = LinearProgram(nv, obj)
    for row, rel, rhs in cons:
        lp.add(row, rel, rhs)
    out = lp_solve(lp)
    best = _brute(nv, obj, cons)
    if best is None:
        assert out.status is LpStatus.INFEASIBLE
        return
    assert out.status is LpStatus.OPTIMAL
    assert out.value == best
    # primal feasibility and tight rows, exactly
    for (row, rel, rhs), y in zip(cons, out.duals):
        lhs = sum(F(a) * v for a, v in zip(row, out.x))
        assert {LE: lhs <= rhs, GE: lhs >= rhs, EQ: lhs == rhs}[rel]
        if y != 0:
            assert lhs == rhs
        # dual sign for a max problem
        if rel == LE:
            assert y >= 0
        elif rel == GE:
            assert y <= 0
    # reduced costs: A^T y >= c on x >= 0
    for k in range(nv):
        assert sum(F(row[k]) * y for (row, _, _), y in zip(cons, out.duals)) >= obj[k]
    assert out.dual_value == out.value


@given(small_lp())
def test_deterministic(case):
    nv, obj, cons = case

    def run():
        lp = LinearProgram(nv, obj)
        for row, rel, rhs in cons:
            lp.add(row, rel, rhs)
        return lp_solve(lp)

    assert run() == run()


def test_redundant_equalities_keep_duals():
    # third row = first + second; the dual recovery must not trip over it
    lp = LinearProgram(3, [1, 1, 2])
    lp.add([1, 1, 0], EQ, 1)
    lp.add([0, 1, 1], EQ, 1)
    lp.add([1, 2, 1], EQ, 2)
    lp.add([1, 0, 0], LE, 1)
    out = lp_solve(lp)
    assert out.value == 3  # x = (1, 0, 1)
    assert out.dual_value == out.value
    for k in range(3):
        col = [c.row[k] for c in lp.constraints]
        assert sum(a * y for a, y in zip(col, out.duals)) >= lp.objective[k]
