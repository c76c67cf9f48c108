"""Command-line front end.

Exit codes: 0 ok, 1 not an equilibrium, 2 unreadable input, 3 search came
up empty, 4 precondition not met, 5 a sign could not be certified.
Machine output is JSON (stdout or ``--output``); chatter goes to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from hzmarket.core import (
    Market,
    check_allocation,
    format_rational,
    frac_matrix,
    load_market,
    parse_rational,
    validate_market,
)
from hzmarket.errors import (
    DimensionMismatch,
    IncompleteSearch,
    IndeterminateSign,
    InvalidMarket,
    NonUniqueTopItem,
    NonUnitCapacities,
    PreconditionViolated,
    TooManyAgents,
    TooManyItems,
)
from hzmarket.verify import CERTIFIED, EXACT, verify_equilibrium

EXIT_OK = 0
EXIT_NOT_EQUILIBRIUM = 1
EXIT_PARSE = 2
EXIT_INCOMPLETE = 3
EXIT_PRECONDITION = 4
EXIT_INDETERMINATE = 5

PRECONDITION_ERRORS = (NonUniqueTopItem, TooManyItems, TooManyAgents, PreconditionViolated, NonUnitCapacities)
DEMOS = ("gs-violation", "free-disposal", "rsd-inefficiency")


class ParseError(Exception):
    pass


def _say(msg):
    print(msg, file=sys.stderr)


def _emit(obj, path):
    text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(path) -> Market:
    try:
        return load_market(path)
    except (OSError, json.JSONDecodeError, InvalidMarket, DimensionMismatch) as exc:
        raise ParseError(str(exc)) from exc


def _eps(bits):
    return Fraction(1, 2**bits)


# --- solvers ---------------------------------------------------------------------

def pick_algorithm(market: Market) -> str:
    if market.m <= min(market.n, 4):
        return "fixed-goods"
    if market.n <= 4:
        return "fixed-agents"
    raise PreconditionViolated(
        f"n = {market.n}, m = {market.m}: both solvers need a small side (m <= 4 or n <= 4)")


def run_solver(market: Market, algo="auto", eps_bits=64, seed=0, full_enum=None) -> tuple:
    from hzmarket.solver_agents import AgentsOptions, solve_fixed_agents
    from hzmarket.solver_goods import GoodsOptions, solve_fixed_goods

    if algo == "auto":
        algo = pick_algorithm(market)
    if algo == "fixed-goods":
        certs = solve_fixed_goods(market, GoodsOptions(eps=_eps(eps_bits), seed=seed,
                                                       exhaustive=full_enum))
    elif algo == "fixed-agents":
        certs = solve_fixed_agents(market, AgentsOptions(eps=_eps(eps_bits), seed=seed, full_enum=full_enum))
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    return algo, certs


def solve_auto(market: Market) -> list:
    return run_solver(market)[1]


def cmd_solve(args) -> int:
    market = _load(args.input)
    algo, certs = run_solver(market, args.algo, args.eps_bits, args.seed, True if args.full_enum else None)
    _emit({"algorithm": algo, "instance": market.to_json(), "certificates": [c.to_json() for c in certs]},
          args.output)
    _say(f"{algo}: {len(certs)} verified certificate(s)")
    return EXIT_OK


# --- verify ------------------------------------------------------------------------

def _load_candidate(path, market):
    try:
        with open(path) as fh:
            raw = json.load(fh)
        prices = tuple(parse_rational(p) for p in raw["prices"])
        alloc = frac_matrix(raw["allocation"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError, InvalidMarket) as exc:
        raise ParseError(f"candidate: {exc}") from exc
    if len(prices) != market.m:
        raise ParseError(f"candidate has {len(prices)} prices for {market.m} items")
    problems = check_allocation(market, alloc)
    if any(p == "dimension mismatch" or "sums to" in p for p in problems):
        raise ParseError("candidate allocation malformed: " + "; ".join(problems))
    return prices, alloc


def cmd_verify(args) -> int:
    market = _load(args.input)
    prices, alloc = _load_candidate(args.candidate, market)
    mode = CERTIFIED if args.mode == "certified" else EXACT
    cert = verify_equilibrium(market, prices, alloc, mode, _eps(args.eps_bits) if mode == CERTIFIED else None)
    _emit(cert.to_json(), args.output)
    for v in cert.failures():
        _say(f"fails {v.name}: {v.witness}")
    return EXIT_OK if cert.equilibrium else EXIT_NOT_EQUILIBRIUM


# --- demos ------------------------------------------------------------------------

def _fr(x):
    return format_rational(Fraction(x))


def demo_gs_violation() -> dict:
    from hzmarket.demand import gross_substitute_violation_demo

    rep = gross_substitute_violation_demo(Fraction(3, 2), Fraction(1, 2), Fraction(1, 10))
    return {
        "demo": "gs-violation",
        "p_high": _fr(rep.p_high), "p_low": _fr(rep.p_low), "delta": _fr(rep.delta),
        "share_high": {"before": _fr(rep.share_high_before), "after": _fr(rep.share_high_after)},
        "share_low": {"before": _fr(rep.share_low_before), "after": _fr(rep.share_low_after)},
        "derivative_share_high_wrt_p_low": _fr(rep.derivative),
        "violates_gross_substitutes": rep.violates,
    }


def _best_unit_value(row, x):
    """Value of the best single unit inside ``x`` (extra units are thrown away)."""
    left, total = Fraction(1), Fraction(0)
    for j in sorted(range(len(row)), key=lambda j: -row[j]):
        t = min(left, x[j])
        total += t * row[j]
        left -= t
    return total


def demo_free_disposal() -> dict:
    from hzmarket.demand import MATCHING, RELAXED, demand_lp

    market = validate_market({"values": [[2, 1], [0, 1]], "capacities": [1, 1]})
    prices = (Fraction(1, 2), Fraction(3, 2))
    fd_alloc = ((Fraction(1), Fraction(1, 3)), (Fraction(0), Fraction(2, 3)))
    fd = {"allocation": [[_fr(x) for x in r] for r in fd_alloc], "agents": []}
    fd_ok = True
    for i in range(market.n):
        spend = sum(p * x for p, x in zip(prices, fd_alloc[i]))
        val = _best_unit_value(market.values[i], fd_alloc[i])
        best = demand_lp(market, i, prices, RELAXED).utility
        ok = spend <= 1 and val == best
        fd_ok &= ok
        fd["agents"].append({"agent": i, "spend": _fr(spend), "value": _fr(val), "best": _fr(best), "optimal": ok})
    clears = all(sum(fd_alloc[i][j] for i in range(market.n)) == market.capacities[j] for j in range(market.m))
    fd["clears"] = clears
    fd["equilibrium"] = fd_ok and clears

    matching = {"agents": []}
    demand = [Fraction(0)] * market.m
    for i in range(market.n):
        d = demand_lp(market, i, prices, MATCHING)
        matching["agents"].append({"agent": i, "utility": _fr(d.utility),
                                   "bundle": [_fr(x) for x in d.vertex_allocation]})
        for j, x in enumerate(d.vertex_allocation):
            demand[j] += x
    matching["demand"] = [_fr(x) for x in demand]
    matching["clears"] = demand == list(market.capacities)
    candidate = ((Fraction(1), Fraction(0)), (Fraction(0), Fraction(1)))
    cert = verify_equilibrium(market, prices, candidate)
    matching["candidate"] = [[_fr(x) for x in r] for r in candidate]
    matching["equilibrium"] = cert.equilibrium
    matching["failures"] = {v.name: v.witness for v in cert.failures()}
    return {"demo": "free-disposal", "instance": market.to_json(), "prices": [_fr(p) for p in prices],
            "free_disposal": fd, "matching": matching}


def demo_rsd_inefficiency() -> dict:
    from hzmarket.baselines.mechanisms import OrdinalProfile, rsd_interim
    from hzmarket.verify import check_pareto_efficient

    prof = OrdinalProfile.from_partial([[0, 1], [1, 0], [0, 1], [1, 0]], 4)
    four = validate_market({"values": prof.to_values(), "capacities": [1] * 4})
    x4 = rsd_interim(four, prof)
    eps = Fraction(1, 4)
    three = validate_market({"values": [[1, eps, 0], [1, 1 - eps, 0], [1, 1 - eps, 0]], "capacities": [1, 1, 1]})
    x3 = rsd_interim(three)
    par = check_pareto_efficient(three, x3)
    par4 = check_pareto_efficient(four, x4)
    return {
        "demo": "rsd-inefficiency",
        "ordinal": {
            "orders": [list(o) for o in prof.orders],
            "rsd": [[_fr(x) for x in r] for r in x4],
            "x_12": _fr(x4[0][1]), "x_21": _fr(x4[1][0]),
            "pareto_efficient": par4.efficient,
            "improvement": None if par4.witness is None else [[_fr(x) for x in r] for r in par4.witness],
        },
        "cardinal": {
            "epsilon": _fr(eps),
            "rsd": [[_fr(x) for x in r] for r in x3],
            "pareto_efficient": par.efficient,
            "gain": _fr(par.gain),
            "improvement": None if par.witness is None else [[_fr(x) for x in r] for r in par.witness],
        },
    }


def cmd_demo(args) -> int:
    fn = {"gs-violation": demo_gs_violation, "free-disposal": demo_free_disposal,
          "rsd-inefficiency": demo_rsd_inefficiency}[args.name]
    _emit(fn(), args.output)
    return EXIT_OK


def cmd_mechanisms(args) -> int:
    from hzmarket.baselines.mechanisms import mechanism_report

    market = _load(args.input)
    rep = mechanism_report(market, solver=lambda mk: run_solver(mk, args.algo, args.eps_bits, args.seed)[1])
    _emit(rep.to_json(), args.output)
    return EXIT_OK


# --- entry point -----------------------------------------------------------------

def _eps_bits(text):
    k = int(text)
    if not 8 <= k <= 128:
        raise argparse.ArgumentTypeError("--eps-bits must lie in [8, 128]")
    return k


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hzmarket", description="Matching-market equilibria: solve, verify, compare.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_input=True):
        if need_input:
            p.add_argument("--input", required=True, help="instance JSON")
        p.add_argument("--output", help="write JSON here instead of stdout")
        p.add_argument("--eps-bits", type=_eps_bits, default=64, help="certified width 2^-K (8..128)")
        p.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("solve", help="compute equilibrium certificates")
    common(s)
    s.add_argument("--algo", choices=("fixed-agents", "fixed-goods", "auto"), default="auto")
    s.add_argument("--full-enum", action="store_true", help="force exhaustive structure enumeration")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a candidate (prices, allocation)")
    common(v)
    v.add_argument("--candidate", required=True, help='JSON {"prices": [...], "allocation": [[...]]}')
    v.add_argument("--mode", choices=("exact", "certified"), default="exact")
    v.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", help="worked examples")
    d.add_argument("name", choices=DEMOS)
    d.add_argument("--output")
    d.set_defaults(func=cmd_demo)

    mch = sub.add_parser("mechanisms", help="RSD vs PS vs equilibrium")
    common(mch)
    mch.add_argument("--algo", choices=("fixed-agents", "fixed-goods", "auto"), default="auto")
    mch.set_defaults(func=cmd_mechanisms)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ParseError as exc:
        _say(f"parse error: {exc}")
        return EXIT_PARSE
    except IncompleteSearch as exc:
        _say(f"incomplete search: {exc} ({exc.tried} cells tried)")
        return EXIT_INCOMPLETE
    except PRECONDITION_ERRORS as exc:
        _say(f"precondition: {type(exc).__name__}: {exc}")
        return EXIT_PRECONDITION
    except IndeterminateSign as exc:
        _say(f"indeterminate sign: {exc}")
        return EXIT_INDETERMINATE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
