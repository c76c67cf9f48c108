from hzmarket.numerics.interval import Interval, hull
from hzmarket.numerics.lp import EQ, GE, LE, LinearProgram, LpOutcome, LpStatus, feasible_point, lp_solve
from hzmarket.numerics.poly import Poly, PolySystem
from hzmarket.numerics.solve import rational_reconstruct, solve_poly_system

__all__ = [
    "EQ",
    "GE",
    "LE",
    "Interval",
    "LinearProgram",
    "LpOutcome",
    "LpStatus",
    "Poly",
    "PolySystem",
    "feasible_point",
    "hull",
    "lp_solve",
    "rational_reconstruct",
    "solve_poly_system",
]
