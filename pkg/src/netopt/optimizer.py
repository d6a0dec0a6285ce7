"""Approximating the optimal net error: grid DP, local refinement, brute force.

The theory supplies bounds but no exact optimal nets, so the best estimate is
the minimum over several upper-bound constructions:

* dynamic programming over a structured grid (mass quantiles when the weight
  is integrable, log-uniform in u = -log(1-t) otherwise),
* the regular (mass-equipartition) net when it exists,
* truncated nets at the balance cutoff and, for log-power weights, at the
  explicit cutoff,

each optionally polished by first-order coordinate descent on the interior
knots.  DP values are grid-exact and nonincreasing under grid refinement; no
claim is made that they converge to the continuum infimum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InfiniteValueError, TooLargeError
from .nets import MIN_GAP, TimeNet, balance_cutoff, equidistant, log_power_cutoff, regular_net, score, truncated_net
from .weightfn import DOMAIN_CAP, LogPowerWeight, WeightFunction


@dataclass(frozen=True)
class OptimizerConfig:
    """Grid and refinement knobs.

    grid_scheme "auto" picks mass quantiles for integrable weights and a
    log-uniform grid in u = -log(1-t) up to u_max otherwise.  dp_max_n caps
    the O(n M^2) DP within scans; larger n fall back to constructions.
    """

    grid_size: int = 512
    grid_scheme: str = "auto"
    refine_iters: int = 200
    refine_tol: float = 1e-12
    u_max: float = 34.5
    dp_max_n: int = 256
    brute_budget: int = 10 ** 8

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be >= 0")
        if self.grid_scheme not in ("auto", "mass-quantile", "log-uniform"):
            raise ValueError(f"unknown grid scheme {self.grid_scheme!r}")


DEFAULT_OPT = OptimizerConfig()


@dataclass(frozen=True)
class OptResult:
    """A net, its recomputed score, and how it was obtained.

    ``value`` always equals score(h, net).total; ``lower_hint`` is the
    grid-exact DP optimum (an observation about the grid, not a bound on the
    continuum optimum).
    """

    net: TimeNet
    value: float
    lower_hint: float | None = None
    iterations: int = 0
    converged: bool = True
    method: str = ""
    grid_size: int | None = None
    grid_scheme: str | None = None

    def to_json(self) -> dict:
        out = {
            "schema": "netopt/1",
            "value": self.value,
            "knots": [float(f"{x:.17g}") for x in self.net.knots],
            "converged": self.converged,
            "iterations": self.iterations,
            "method": self.method,
        }
        if self.grid_size is not None:
            out["grid"] = {"M": self.grid_size, "scheme": self.grid_scheme}
        if self.lower_hint is not None:
            out["lower_hint"] = self.lower_hint
        return out


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def _dedupe(grid: np.ndarray) -> np.ndarray:
    g = np.unique(grid)
    keep = [g[0]]
    for x in g[1:-1]:
        if x - keep[-1] >= MIN_GAP and x <= 1.0 - MIN_GAP:
            keep.append(x)
    keep.append(g[-1])
    return np.asarray(keep)


def build_grid(h: WeightFunction, cfg: OptimizerConfig = DEFAULT_OPT):
    """Structured knot grid (includes 0 and 1); returns (grid, scheme)."""
    scheme = cfg.grid_scheme
    if scheme == "auto":
        total = h.total_mass()
        scheme = "mass-quantile" if (math.isfinite(total) and total > 0) else "log-uniform"
    m = cfg.grid_size
    if scheme == "mass-quantile":
        total = h.total_mass()
        if not math.isfinite(total) or total <= 0.0:
            raise InfiniteValueError("mass-quantile grid needs finite positive mass")
        grid = np.empty(m + 1)
        grid[0], grid[m] = 0.0, 1.0
        for j in range(1, m):
            grid[j] = h.inverse_cumulative(total * j / m)
    else:
        u_cap = min(cfg.u_max, -math.log1p(-min(h.domain_cap, DOMAIN_CAP)))
        u = np.linspace(0.0, u_cap, m)
        grid = np.append(-np.expm1(-u), 1.0)
    return _dedupe(grid), scheme


_GRID_CACHE: dict = {}


def _grid_data(h: WeightFunction, cfg: OptimizerConfig):
    """Grid plus per-interval masses and tail vector, cached per weight/config."""
    key = (h.spec_string(), cfg.grid_size, cfg.grid_scheme, cfg.u_max)
    hit = _GRID_CACHE.get(key)
    if hit is not None:
        return hit
    grid, scheme = build_grid(h, cfg)
    interior = grid[:-1]  # last interval (to 1.0) is handled via the tail
    dk = np.concatenate([[0.0], h.interval_weighted(interior), [0.0]])
    dg2 = np.concatenate([[0.0], h.interval_h2(interior), [0.0]])
    tail = h.tail_vector(grid[:-1])
    data = (grid, scheme, dk, dg2, np.asarray(tail, dtype=float))
    _GRID_CACHE[key] = data
    return data


# ---------------------------------------------------------------------------
# dynamic programming
# ---------------------------------------------------------------------------

def optimal_net_dp(h: WeightFunction, n: int,
                   cfg: OptimizerConfig = DEFAULT_OPT) -> OptResult:
    """Best net with knots restricted to the structured grid.

    The DP value is an upper bound on the continuum optimum restricted to the
    grid and never increases when the grid is refined (nested schemes).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if cfg.grid_size < n + 1:
        cfg = OptimizerConfig(grid_size=n + 1, grid_scheme=cfg.grid_scheme,
                              refine_iters=cfg.refine_iters,
                              refine_tol=cfg.refine_tol, u_max=cfg.u_max,
                              dp_max_n=cfg.dp_max_n,
                              brute_budget=cfg.brute_budget)
    grid, scheme, dk, dg2, tail = _grid_data(h, cfg)
    if grid.size - 1 < n:
        raise ValueError("grid too coarse after dedup for the requested n")
    if not np.any(np.isfinite(tail)):
        raise InfiniteValueError("terminal cell diverges for every last knot")
    cost = _kernels.build_cost(grid, dk, dg2, tail)
    value_sq, path = _kernels.dp_solve(np.asarray(cost), n)
    if math.isinf(value_sq):
        raise InfiniteValueError("no finite-cost grid net exists")
    net = TimeNet(grid[path])
    return OptResult(net=net, value=score(h, net).total,
                     lower_hint=math.sqrt(max(value_sq, 0.0)),
                     method="dp", grid_size=grid.size - 1, grid_scheme=scheme)


# ---------------------------------------------------------------------------
# first-order local refinement
# ---------------------------------------------------------------------------

def refine_local(h: WeightFunction, net: TimeNet,
                 cfg: OptimizerConfig = DEFAULT_OPT,
                 max_sweeps: int | None = None) -> OptResult:
    """Coordinate descent on interior knots.

    The stationarity condition for knot t_i is
        integral_{t_{i-1}}^{t_i} H^2 = (t_{i+1} - t_i) H^2(t_i);
    each one-dimensional update solves it by bisection and is accepted only
    if the two adjacent cell errors do not increase, so the objective is
    nonincreasing across sweeps.  Same-parity knots share no cell, which lets
    the red-black sweeps run vectorized.
    """
    sweeps = cfg.refine_iters if max_sweeps is None else min(max_sweeps, cfg.refine_iters)
    knots = net.knots.copy()
    n = knots.size - 1
    cap = min(h.domain_cap, DOMAIN_CAP)
    iterations = 0
    converged = sweeps == 0
    prev_sq = float(np.sum(h.cell_error_many(knots[:-1], knots[1:])))
    for it in range(sweeps):
        max_move = 0.0
        for parity in (1, 0):
            idx = np.arange(1 + parity, n, 2) if n > 1 else np.array([], dtype=int)
            if idx.size == 0:
                continue
            a = knots[idx - 1]
            b = knots[idx + 1]
            cur = knots[idx]
            lo = a + MIN_GAP
            hi = np.minimum(b - MIN_GAP, cap)

            def g(x):
                h2 = np.asarray(h.h2_mass_many(a, x), dtype=float)
                return h2 - (b - x) * np.asarray(h._eval(x)) ** 2

            g_lo = g(lo)
            g_hi = g(hi)
            active = (g_lo < 0.0) & (g_hi > 0.0) & (hi > lo)
            x_lo, x_hi = lo.copy(), hi.copy()
            for _ in range(52):
                if not np.any(active):
                    break
                mid = 0.5 * (x_lo + x_hi)
                gm = g(mid)
                neg = gm < 0.0
                x_lo = np.where(active & neg, mid, x_lo)
                x_hi = np.where(active & ~neg, mid, x_hi)
            new = 0.5 * (x_lo + x_hi)
            new = np.where(active, new, cur)
            # descent guard: keep the move only if the local error drops
            old_err = (h.cell_error_many(a, cur) + h.cell_error_many(cur, b))
            new_err = (h.cell_error_many(a, new) + h.cell_error_many(new, b))
            accept = new_err <= old_err
            new = np.where(accept, new, cur)
            knots[idx] = new
            if new.size:
                max_move = max(max_move, float(np.max(np.abs(new - cur))))
        iterations = it + 1
        if max_move < cfg.refine_tol:
            converged = True
            break
        cur_sq = float(np.sum(h.cell_error_many(knots[:-1], knots[1:])))
        if prev_sq - cur_sq <= 1e-13 * max(cur_sq, 1e-300):
            converged = True
            break
        prev_sq = cur_sq
    refined = TimeNet(knots, flags=net.flags)
    return OptResult(net=refined, value=score(h, refined).total,
                     iterations=iterations, converged=converged,
                     method="refine")


def stationarity_residual(h: WeightFunction, net: TimeNet) -> np.ndarray:
    """Per-interior-knot residual of the first-order condition."""
    k = net.knots
    idx = np.arange(1, k.size - 1)
    h2 = np.asarray(h.h2_mass_many(k[idx - 1], k[idx]), dtype=float)
    return h2 - (k[idx + 1] - k[idx]) * np.asarray(h._eval(k[idx])) ** 2


# ---------------------------------------------------------------------------
# brute force oracle
# ---------------------------------------------------------------------------

def brute_force_best(h: WeightFunction, n: int, grid_size: int = 101,
                     grid: np.ndarray | None = None,
                     budget: int = 10 ** 8):
    """Exact minimum over all interior-knot placements on a grid.

    Exhaustive enumeration, independent of the DP recursion; intended for
    small n (<= 4) as an oracle.  Returns (value, net).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if grid is None:
        grid = np.linspace(0.0, 1.0, grid_size)
    grid = np.asarray(grid, dtype=float)
    size = grid.size
    interior = size - 2
    if n > 1:
        count = math.comb(interior, n - 1)
        if count > budget:
            raise TooLargeError(f"{count} candidate nets exceed budget {budget}")
    if n == 1:
        net = TimeNet(np.array([0.0, 1.0]))
        return score(h, net).total, net
    ii, jj = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    upper = ii < jj
    cost = np.full((size, size), np.inf)
    cost[upper] = h.cell_error_many(grid[ii[upper]], grid[jj[upper]])
    best_val = math.inf
    best_combo = None
    combos = itertools.combinations(range(1, size - 1), n - 1)
    chunk_size = 200_000
    while True:
        chunk = list(itertools.islice(combos, chunk_size))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.int64)
        full = np.concatenate([
            np.zeros((idx.shape[0], 1), dtype=np.int64),
            idx,
            np.full((idx.shape[0], 1), size - 1, dtype=np.int64),
        ], axis=1)
        totals = np.zeros(idx.shape[0])
        for c in range(n):
            totals += cost[full[:, c], full[:, c + 1]]
        k = int(np.argmin(totals))
        if totals[k] < best_val:
            best_val = float(totals[k])
            best_combo = full[k]
    net = TimeNet(grid[best_combo])
    return math.sqrt(max(best_val, 0.0)), net


# ---------------------------------------------------------------------------
# combined estimate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    """Best upper estimate of the optimal error and its provenance."""

    n: int
    value: float
    net: TimeNet
    method: str
    candidates: dict = field(repr=False, default_factory=dict)

    @property
    def divergent(self) -> bool:
        return math.isinf(self.value)


def _refine_budget(cfg: OptimizerConfig, n: int) -> int:
    return min(cfg.refine_iters, max(6, 2048 // max(n, 1)))


def estimate_best(h: WeightFunction, n: int,
                  cfg: OptimizerConfig = DEFAULT_OPT,
                  extra_nets: tuple = ()) -> Estimate:
    """Minimum over the available upper-bound constructions for one n.

    To keep scans cheap only the two best raw candidates get the coordinate
    descent polish (descent can only improve them).
    """
    candidates: dict[str, tuple[float, TimeNet]] = {}

    def consider(tag: str, net: TimeNet):
        candidates[tag] = (score(h, net).total, net)

    consider("equidistant", equidistant(n))
    total = h.total_mass()
    if math.isfinite(total) and total > 0.0:
        consider("regular", regular_net(h, n))
    if n >= 2:
        cut, flagged = balance_cutoff(h, n)
        if 0.0 < cut < 1.0:
            tag = "truncated-balance" + ("-flagged" if flagged else "")
            consider(tag, truncated_net(h, n, cut))
    if n >= 2 and isinstance(h, LogPowerWeight):
        consider("truncated-logcut", truncated_net(h, n, log_power_cutoff(h.alpha, n)))
    if n <= cfg.dp_max_n:
        try:
            res = optimal_net_dp(h, n, cfg)
            candidates["dp"] = (res.value, res.net)
        except InfiniteValueError:
            pass
    for tag, net in extra_nets:
        consider(tag, net)
    if n >= 2 and cfg.refine_iters > 0:
        ranked = sorted(candidates, key=lambda k: (candidates[k][0], k))
        for tag in ranked[:2]:
            value, net = candidates[tag]
            if math.isinf(value):
                continue
            res = refine_local(h, net, cfg, max_sweeps=_refine_budget(cfg, n))
            candidates[tag + "+refine"] = (res.value, res.net)
    best_tag = min(candidates, key=lambda k: (candidates[k][0], k))
    value, net = candidates[best_tag]
    return Estimate(n=n, value=value, net=net, method=best_tag,
                    candidates={k: v[0] for k, v in candidates.items()})
