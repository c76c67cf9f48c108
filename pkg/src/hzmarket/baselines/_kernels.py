"""Float kernels behind the oracles.

Each kernel has a loop-style implementation compiled with numba and a
vectorised numpy implementation. ``HZ_DISABLE_NUMBA=1`` (or numba missing)
selects numpy. Both are kept importable so the benchmark can time them side
by side; results agree to float rounding.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - depends on the environment
    import numba
except ImportError:  # pragma: no cover
    numba = None

NUMBA_AVAILABLE = numba is not None
USE_NUMBA = NUMBA_AVAILABLE and os.environ.get("HZ_DISABLE_NUMBA", "") not in ("1", "true", "yes")


# --- smoothed relaxed demand ---------------------------------------------------

def _demand_row_py(v, p, tau, out):
    """Entropy-smoothed demand of one agent with an outside option of value 0.

    ``x_j`` is proportional to ``exp((v_j - a p_j) / tau)``; the multiplier
    ``a >= 0`` is the smallest one keeping spend within 1.
    """
    m = v.shape[0]
    lo = 0.0
    hi = 1.0

    def spend(a):
        top = 0.0
        for j in range(m):
            s = (v[j] - a * p[j]) / tau
            if s > top:
                top = s
        z = np.exp(-top)
        c = 0.0
        for j in range(m):
            e = np.exp((v[j] - a * p[j]) / tau - top)
            out[j] = e
            z += e
            c += p[j] * e
        for j in range(m):
            out[j] /= z
        return c / z

    if spend(0.0) <= 1.0:
        return 0.0
    while spend(hi) > 1.0 and hi < 1e9:
        lo = hi
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if spend(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    spend(hi)
    return hi


def _demand_py(V, p, tau, X):
    for i in range(V.shape[0]):
        _demand_row_py(V[i], p, tau, X[i])
    return X


def _tatonnement_py(V, C, p0, eta0, rounds, tau0, tau1, eta_min):
    n, m = V.shape
    p = p0.copy()
    X = np.zeros((n, m))
    eta = eta0
    prev = 1e300
    acc = 0.0
    window = 64
    best_p = p.copy()
    best_res = 1e300
    for t in range(rounds):
        tau = tau0 * (tau1 / tau0) ** (t / max(rounds - 1, 1))
        _demand_py(V, p, tau, X)
        res = 0.0
        z = np.zeros(m)
        for j in range(m):
            s = 0.0
            for i in range(n):
                s += X[i, j]
            z[j] = s - C[j]
            if abs(z[j]) > res:
                res = abs(z[j])
        acc += res
        if (t + 1) % window == 0:
            if acc > prev and eta > eta_min:
                eta *= 0.5
            prev = acc
            acc = 0.0
        if t > rounds // 2 and res < best_res:
            best_res = res
            best_p[:] = p
        for j in range(m):
            q = p[j] + eta * z[j]
            p[j] = q if q > 0.0 else 0.0
    return best_p, best_res


# --- numpy versions -------------------------------------------------------------

def _demand_np(V, p, tau, X=None):
    n, m = V.shape
    lo = np.zeros(n)
    hi = np.ones(n)

    def soft(a):
        s = (V - a[:, None] * p[None, :]) / tau
        top = np.maximum(s.max(axis=1), 0.0)
        e = np.exp(s - top[:, None])
        z = e.sum(axis=1) + np.exp(-top)
        x = e / z[:, None]
        return x, x @ p

    x0, c0 = soft(np.zeros(n))
    need = c0 > 1.0
    if not need.any():
        if X is not None:
            X[:] = x0
        return x0
    for _ in range(40):
        _, c = soft(hi)
        grow = need & (c > 1.0) & (hi < 1e9)
        if not grow.any():
            break
        lo = np.where(grow, hi, lo)
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        _, c = soft(mid)
        over = c > 1.0
        lo = np.where(over, mid, lo)
        hi = np.where(over, hi, mid)
    a = np.where(need, hi, 0.0)
    x, _ = soft(a)
    if X is not None:
        X[:] = x
    return x


def _tatonnement_np(V, C, p0, eta0, rounds, tau0, tau1, eta_min):
    p = p0.copy()
    eta = eta0
    prev = np.inf
    acc = 0.0
    window = 64
    best_p = p.copy()
    best_res = np.inf
    span = max(rounds - 1, 1)
    for t in range(rounds):
        tau = tau0 * (tau1 / tau0) ** (t / span)
        X = _demand_np(V, p, tau)
        z = X.sum(axis=0) - C
        res = float(np.abs(z).max())
        acc += res
        if (t + 1) % window == 0:
            if acc > prev and eta > eta_min:
                eta *= 0.5
            prev = acc
            acc = 0.0
        if t > rounds // 2 and res < best_res:
            best_res = res
            best_p = p.copy()
        p = np.maximum(p + eta * z, 0.0)
    return best_p, best_res


# --- two-item grid scan ----------------------------------------------------------

def _grid_py(V, C0, h, steps, delta, tol, accept, U):
    """Mark grid points ``(a h, b h)`` where delta-optimal unit demands can clear item 0."""
    n = V.shape[0]
    for a in range(steps):
        p1 = a * h
        for b in range(steps):
            p2 = b * h
            slo = 0.0
            shi = 0.0
            ok = True
            for i in range(n):
                flo = 0.0
                fhi = 1.0
                d = p1 - p2
                if d > 0.0:
                    fhi = min(1.0, (1.0 - p2) / d)
                elif d < 0.0:
                    flo = max(0.0, (1.0 - p2) / d)
                elif p2 > 1.0:
                    ok = False
                    break
                if flo > fhi:
                    ok = False
                    break
                g = V[i, 0] - V[i, 1]
                if g > 0.0:
                    U[a, b, i] = V[i, 1] + g * fhi
                    lo_i = max(flo, fhi - delta / g)
                    hi_i = fhi
                elif g < 0.0:
                    U[a, b, i] = V[i, 1] + g * flo
                    lo_i = flo
                    hi_i = min(fhi, flo - delta / g)
                else:
                    U[a, b, i] = V[i, 1]
                    lo_i = flo
                    hi_i = fhi
                slo += lo_i
                shi += hi_i
            accept[a, b] = ok and (slo - tol <= C0) and (C0 <= shi + tol)
    return accept


def _grid_np(V, C0, h, steps, delta, tol, accept, U):
    g = np.arange(steps) * h
    P1, P2 = np.meshgrid(g, g, indexing="ij")
    d = P1 - P2
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (1.0 - P2) / d
    flo = np.where(d < 0, np.maximum(0.0, ratio), 0.0)
    fhi = np.where(d > 0, np.minimum(1.0, ratio), 1.0)
    ok = ~((d == 0) & (P2 > 1.0)) & (flo <= fhi)
    slo = np.zeros_like(P1)
    shi = np.zeros_like(P1)
    for i in range(V.shape[0]):
        gi = V[i, 0] - V[i, 1]
        if gi > 0:
            U[:, :, i] = V[i, 1] + gi * fhi
            lo_i = np.maximum(flo, fhi - delta / gi)
            hi_i = fhi
        elif gi < 0:
            U[:, :, i] = V[i, 1] + gi * flo
            lo_i = flo
            hi_i = np.minimum(fhi, flo - delta / gi)
        else:
            U[:, :, i] = V[i, 1]
            lo_i, hi_i = flo, fhi
        slo += lo_i
        shi += hi_i
    accept[:] = ok & (slo - tol <= C0) & (C0 <= shi + tol)
    return accept


if NUMBA_AVAILABLE:  # pragma: no branch
    _demand_row_nb = numba.njit(cache=True)(_demand_row_py)

    @numba.njit(cache=True)
    def _demand_nb(V, p, tau, X):
        for i in range(V.shape[0]):
            _demand_row_nb(V[i], p, tau, X[i])
        return X

    @numba.njit(cache=True)
    def _tatonnement_nb(V, C, p0, eta0, rounds, tau0, tau1, eta_min):
        n, m = V.shape
        p = p0.copy()
        X = np.zeros((n, m))
        eta = eta0
        prev = 1e300
        acc = 0.0
        window = 64
        best_p = p.copy()
        best_res = 1e300
        z = np.zeros(m)
        for t in range(rounds):
            tau = tau0 * (tau1 / tau0) ** (t / max(rounds - 1, 1))
            _demand_nb(V, p, tau, X)
            res = 0.0
            for j in range(m):
                s = 0.0
                for i in range(n):
                    s += X[i, j]
                z[j] = s - C[j]
                if abs(z[j]) > res:
                    res = abs(z[j])
            acc += res
            if (t + 1) % window == 0:
                if acc > prev and eta > eta_min:
                    eta *= 0.5
                prev = acc
                acc = 0.0
            if t > rounds // 2 and res < best_res:
                best_res = res
                best_p[:] = p
            for j in range(m):
                q = p[j] + eta * z[j]
                p[j] = q if q > 0.0 else 0.0
        return best_p, best_res

    _grid_nb = numba.njit(cache=True)(_grid_py)


def smoothed_demand(V, p, tau):
    V = np.ascontiguousarray(V, dtype=np.float64)
    p = np.ascontiguousarray(p, dtype=np.float64)
    X = np.zeros_like(V)
    if USE_NUMBA:
        return _demand_nb(V, p, float(tau), X)
    return _demand_np(V, p, float(tau), X)


def tatonnement(V, C, p0, eta=0.125, rounds=10_000, tau0=0.25, tau1=1e-5, eta_min=2.0**-12, backend=None):
    use = USE_NUMBA if backend is None else backend == "numba"
    args = (np.ascontiguousarray(V, dtype=np.float64), np.ascontiguousarray(C, dtype=np.float64),
            np.ascontiguousarray(p0, dtype=np.float64), float(eta), int(rounds), float(tau0), float(tau1),
            float(eta_min))
    if use:
        return _tatonnement_nb(*args)
    return _tatonnement_np(*args)


def grid_scan(V, C0, h, steps, delta, tol, backend=None):
    use = USE_NUMBA if backend is None else backend == "numba"
    V = np.ascontiguousarray(V, dtype=np.float64)
    accept = np.zeros((steps, steps), dtype=np.bool_)
    U = np.zeros((steps, steps, V.shape[0]))
    if use:
        _grid_nb(V, float(C0), float(h), int(steps), float(delta), float(tol), accept, U)
    else:
        _grid_np(V, float(C0), float(h), int(steps), float(delta), float(tol), accept, U)
    return accept, U
