"""Hot numeric kernels with numba-accelerated and pure-numpy implementations.

Selection: the numba path is used when numba imports successfully and the
environment variable ``NETOPT_NO_NUMBA`` is unset/empty.  Both paths compute
the same quantities with the same stopping rules, so results agree to floating
point noise; tests assert agreement and ``netopt.benchmark`` compares speed.

Kernels:

* partition cost-matrix assembly and the O(n*M^2) min-cost partition DP,
* adaptive summation of sum_{k>=2} k * log(k)^-beta * t^k with a certified
  geometric tail bound,
* Levy dyadic bridge fill for Brownian paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

_ENV_FLAG = "NETOPT_NO_NUMBA"


def _numba_requested() -> bool:
    return not os.environ.get(_ENV_FLAG, "")


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def _build_cost_numpy(grid, dk, dg2, tail):
    """Cost matrix C[jp, j] = integral over (g_jp, g_j] of (g_j - t) H^2 dt.

    dk[l], dg2[l] are the per-interval masses of (1-t)H^2 and H^2 on
    (g_{l-1}, g_l]; the last grid point is 1 and its column comes from the
    closed/quadrature tail integrals in ``tail`` (avoids inf - inf when H^2
    is not integrable up to 1).  Entries with jp >= j are +inf.
    """
    g = np.asarray(grid)
    size = g.shape[0]
    cost = np.full((size, size), np.inf)
    # interior columns: backward cumulative sums of the nonnegative terms
    # dk[l] - (1 - g_j) * dg2[l]  (= integral of (g_j - t) H^2 over interval l)
    for j in range(1, size - 1):
        terms = dk[1 : j + 1] - (1.0 - g[j]) * dg2[1 : j + 1]
        acc = np.cumsum(terms[::-1])[::-1]
        cost[:j, j] = acc
    cost[: size - 1, size - 1] = tail[: size - 1]
    return cost


def _dp_solve_numpy(cost, n):
    """Min-cost path 0 = j_0 < ... < j_n = G-1; ties toward smaller index."""
    size = cost.shape[0]
    best = np.full(size, np.inf)
    best[1:] = cost[0, 1:]
    choice = np.zeros((n + 1, size), dtype=np.int64)
    for k in range(2, n + 1):
        # infeasible predecessors carry inf in cost, so a full column
        # min/argmin reproduces the loop (argmin keeps the first minimum)
        stacked = best[:, None] + cost
        choice[k] = np.argmin(stacked, axis=0)
        best = stacked[choice[k], np.arange(size)]
        best[:k] = np.inf
    path = np.empty(n + 1, dtype=np.int64)
    path[n] = size - 1
    for k in range(n, 1, -1):
        path[k - 1] = choice[k, path[k]]
    path[0] = 0
    return float(best[size - 1]), path


def _log_series_sum_numpy(beta, t, rel_tol, max_terms):
    """sum_{k>=2} k * log(k)^(-beta) * t^k with certified geometric tail.

    Returns (value, tail_bound, terms). terms < 0 signals that the budget was
    exhausted before the tail could be certified below rel_tol * value.
    """
    if t <= 0.0:
        return 0.0, 0.0, 0
    log_t = math.log(t)
    total = 0.0
    chunk = 65536
    k0 = 2
    while k0 <= max_terms:
        k1 = min(k0 + chunk, max_terms + 1)
        k = np.arange(k0, k1, dtype=np.float64)
        total += float(np.sum(k * np.exp(-beta * np.log(np.log(k)) + k * log_t)))
        nxt = float(k1)
        term = nxt * math.exp(-beta * math.log(math.log(nxt)) + nxt * log_t)
        ratio = t * (1.0 + 1.0 / nxt)
        if ratio < 1.0:
            bound = term / (1.0 - ratio)
            if bound <= rel_tol * max(total, 1e-300):
                return total, bound, int(k1 - 2)
        k0 = k1
    return total, np.inf, -1


def _bridge_fill_numpy(z, m):
    """Brownian path values on the dyadic grid j/m from bridge normals.

    z has shape (paths, m) in canonical dyadic order: z[:,0] is the terminal
    value scale, level l (1-based) occupies columns 2^(l-1) .. 2^l - 1.
    Returns w with shape (paths, m+1), w[:, j] = W(j/m).
    """
    paths = z.shape[0]
    w = np.empty((paths, m + 1))
    w[:, 0] = 0.0
    w[:, m] = z[:, 0]
    levels = int(round(math.log2(m)))
    for lev in range(1, levels + 1):
        span = m >> (lev - 1)
        half = span >> 1
        lo = np.arange(0, m, span)
        std = math.sqrt(span / m) / 2.0  # conditional std of the midpoint
        w[:, lo + half] = 0.5 * (w[:, lo] + w[:, lo + span]) + std * z[:, (1 << (lev - 1)) : (1 << lev)]
    return w


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

USING_NUMBA = False
build_cost = _build_cost_numpy
dp_solve = _dp_solve_numpy
log_series_sum = _log_series_sum_numpy
bridge_fill = _bridge_fill_numpy

if _numba_requested():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        njit = None
    if njit is not None:
        @njit(cache=True)
        def _build_cost_nb(grid, dk, dg2, tail):  # pragma: no cover - compiled
            size = grid.shape[0]
            cost = np.full((size, size), np.inf)
            for j in range(1, size - 1):
                one_minus = 1.0 - grid[j]
                acc = 0.0
                for jp in range(j - 1, -1, -1):
                    acc += dk[jp + 1] - one_minus * dg2[jp + 1]
                    cost[jp, j] = acc
            for jp in range(size - 1):
                cost[jp, size - 1] = tail[jp]
            return cost

        @njit(cache=True)
        def _dp_solve_nb(cost, n):  # pragma: no cover - compiled
            size = cost.shape[0]
            best = np.full(size, np.inf)
            nxt = np.full(size, np.inf)
            choice = np.zeros((n + 1, size), dtype=np.int64)
            for j in range(1, size):
                best[j] = cost[0, j]
            for k in range(2, n + 1):
                for j in range(k, size):
                    b = np.inf
                    arg = 0
                    for jp in range(k - 1, j):
                        v = best[jp] + cost[jp, j]
                        if v < b:
                            b = v
                            arg = jp
                    nxt[j] = b
                    choice[k, j] = arg
                for j in range(size):
                    best[j] = nxt[j]
                    nxt[j] = np.inf
            path = np.empty(n + 1, dtype=np.int64)
            path[n] = size - 1
            for k in range(n, 1, -1):
                path[k - 1] = choice[k, path[k]]
            path[0] = 0
            return best[size - 1], path

        @njit(cache=True)
        def _log_series_sum_nb(beta, t, rel_tol, max_terms):  # pragma: no cover
            if t <= 0.0:
                return 0.0, 0.0, 0
            log_t = math.log(t)
            total = 0.0
            k = 2
            term = 0.0
            while k <= max_terms:
                # refresh t^k from exp(k log t) each chunk to stop drift
                power = math.exp(k * log_t)
                stop = min(k + 65536, max_terms + 1)
                while k < stop:
                    term = k * math.exp(-beta * math.log(math.log(k))) * power
                    total += term
                    power *= t
                    k += 1
                fk = float(k)
                nxt = fk * math.exp(-beta * math.log(math.log(fk)) + fk * log_t)
                ratio = t * (1.0 + 1.0 / fk)
                if ratio < 1.0:
                    bound = nxt / (1.0 - ratio)
                    if bound <= rel_tol * max(total, 1e-300):
                        return total, bound, k - 2
            return total, np.inf, -1

        @njit(cache=True)
        def _bridge_fill_nb(z, m):  # pragma: no cover - compiled
            paths = z.shape[0]
            w = np.empty((paths, m + 1))
            levels = int(round(math.log2(m)))
            for p in range(paths):
                w[p, 0] = 0.0
                w[p, m] = z[p, 0]
                for lev in range(1, levels + 1):
                    span = m >> (lev - 1)
                    half = span >> 1
                    std = math.sqrt(span / m) / 2.0
                    base = 1 << (lev - 1)
                    for i in range(base):
                        lo = i * span
                        w[p, lo + half] = 0.5 * (w[p, lo] + w[p, lo + span]) + std * z[p, base + i]
            return w

        def _dp_solve_wrap(cost, n):
            value, path = _dp_solve_nb(np.ascontiguousarray(cost), n)
            return float(value), path

        build_cost = _build_cost_nb
        dp_solve = _dp_solve_wrap
        log_series_sum = _log_series_sum_nb
        bridge_fill = _bridge_fill_nb
        USING_NUMBA = True


IMPLEMENTATIONS = {
    "numpy": {
        "build_cost": _build_cost_numpy,
        "dp_solve": _dp_solve_numpy,
        "log_series_sum": _log_series_sum_numpy,
        "bridge_fill": _bridge_fill_numpy,
    },
}
if USING_NUMBA:
    IMPLEMENTATIONS["numba"] = {
        "build_cost": build_cost,
        "dp_solve": dp_solve,
        "log_series_sum": log_series_sum,
        "bridge_fill": bridge_fill,
    }
