"""Time the oracle kernels under numba and under plain numpy.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--rounds 2000]

The first numba call includes compilation (or a cache load); it is reported
separately and excluded from the steady-state numbers.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from hzmarket.baselines import _kernels


def _markets(rng):
    yield "2x2", np.array([[2.0, 1.0], [0.0, 1.0]])
    yield "3x3", np.array([[3.0, 1.0, 0.5], [1.0, 2.0, 0.0], [2.0, 2.5, 1.0]])
    yield "4x4 random", rng.integers(0, 11, size=(4, 4)) / rng.integers(1, 5, size=(4, 4))


def _best(fn, repeat):
    out = None
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--rounds", type=int, default=2000)
    ap.add_argument("--grid-bits", type=int, default=7)
    args = ap.parse_args(argv)
    if not _kernels.NUMBA_AVAILABLE:
        print("numba not importable; only the numpy path can be timed")
    rng = np.random.default_rng(0)

    rows = []
    for name, V in _markets(rng):
        n, m = V.shape
        C = np.ones(m)
        p0 = np.full(m, 1.0 / (n * m))

        def tat(backend):
            return _kernels.tatonnement(V, C, p0, rounds=args.rounds, backend=backend)

        if _kernels.NUMBA_AVAILABLE:
            t = time.perf_counter()
            tat("numba")
            first = time.perf_counter() - t
            t_nb, (p_nb, _) = _best(lambda: tat("numba"), args.repeat)
        else:
            first = t_nb = float("nan")
            p_nb = None
        t_np, (p_np, _) = _best(lambda: tat("numpy"), args.repeat)
        diff = float(np.abs(p_nb - p_np).max()) if p_nb is not None else float("nan")
        rows.append((f"tatonnement {name}", first, t_nb, t_np, diff))

    V = np.array([[2.0, 1.0], [0.0, 1.0]])
    h = 2.0 ** -args.grid_bits
    steps = int(round(2 / h)) + 1

    def grid(backend):
        return _kernels.grid_scan(V, 1.0, h, steps, 4 * h * 2, h, backend=backend)

    if _kernels.NUMBA_AVAILABLE:
        t = time.perf_counter()
        grid("numba")
        first = time.perf_counter() - t
        t_nb, (a_nb, _) = _best(lambda: grid("numba"), args.repeat)
    else:
        first = t_nb = float("nan")
        a_nb = None
    t_np, (a_np, _) = _best(lambda: grid("numpy"), args.repeat)
    rows.append((f"grid scan {steps}x{steps}", first, t_nb, t_np,
                 float((a_nb != a_np).sum()) if a_nb is not None else float("nan")))

    print(f"{'kernel':28s} {'first nb':>9s} {'numba':>9s} {'numpy':>9s} {'speedup':>8s} {'max diff':>9s}")
    for name, first, t_nb, t_np, diff in rows:
        print(f"{name:28s} {first:9.4f} {t_nb:9.4f} {t_np:9.4f} {t_np / t_nb:8.1f} {diff:9.2e}")


if __name__ == "__main__":
    main()
