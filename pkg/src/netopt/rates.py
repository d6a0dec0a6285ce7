"""Rate scans across n, exponent fitting, and weight classification.

A scan produces one best-estimate row per n.  The previous row's best net,
grown by splitting its worst cells, is always among the candidates, which
makes the scan nonincreasing in n by construction (adding a knot never
increases the score).  Verdicts from ``classify`` are numerical certificates
over finite grids, never claims beyond the checked points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError
from .nets import MIN_GAP, TimeNet, score
from .optimizer import DEFAULT_OPT, Estimate, OptimizerConfig, brute_force_best, estimate_best, optimal_net_dp
from .weightfn import DOMAIN_CAP, PowerWeight, WeightFunction


@dataclass(frozen=True)
class RateRow:
    n: int
    value: float
    method: str
    net: TimeNet | None = field(default=None, repr=False, compare=False)

    @property
    def sqrt_n_value(self) -> float:
        return math.sqrt(self.n) * self.value


@dataclass(frozen=True)
class RateTable:
    rows: tuple
    h_spec: str

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("rows must have strictly increasing n")
        vals = [r.value for r in self.rows if math.isfinite(r.value)]
        if any(v < 0 for v in vals):
            raise ValueError("values must be nonnegative")
        if any(b > a + 1e-9 for a, b in zip(vals, vals[1:])):
            raise ValueError("optimal error must be nonincreasing in n")

    def values(self) -> np.ndarray:
        return np.asarray([r.value for r in self.rows])

    def to_csv(self) -> str:
        lines = ["n,value,method,sqrt_n_times_value"]
        for r in self.rows:
            lines.append(f"{r.n},{r.value:.17g},{r.method},{r.sqrt_n_value:.17g}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "schema": "netopt/1",
            "h_spec": self.h_spec,
            "rows": [
                {"n": r.n, "value": r.value, "method": r.method,
                 "sqrt_n_times_value": r.sqrt_n_value}
                for r in self.rows
            ],
        }


def split_worst(h: WeightFunction, net: TimeNet, extra_knots: int) -> TimeNet:
    """Repeatedly bisect the cell with the largest error contribution."""
    cur = net
    for _ in range(extra_knots):
        cells = score(h, cur).cells
        order = np.argsort(cells)[::-1]
        for idx in order:
            lo, hi = cur.knots[idx], cur.knots[idx + 1]
            if hi - lo > 4 * MIN_GAP and math.isfinite(cells[idx]):
                cur = cur.refine([0.5 * (lo + hi)])
                break
        else:
            break
    return cur


def scan(h: WeightFunction, n_list, cfg: OptimizerConfig = DEFAULT_OPT) -> RateTable:
    """One best-estimate row per n (strictly increasing n_list)."""
    n_list = list(n_list)
    if not n_list:
        raise ValueError("n_list must be nonempty")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    rows = []
    prev: Estimate | None = None
    for n in n_list:
        extra = ()
        if prev is not None and prev.net is not None and math.isfinite(prev.value):
            grown = split_worst(h, prev.net, n - prev.net.n)
            extra = (("grown-previous", grown),)
        est = estimate_best(h, n, cfg, extra_nets=extra)
        rows.append(RateRow(n=n, value=est.value, method=est.method, net=est.net))
        prev = est
    return RateTable(rows=tuple(rows), h_spec=h.spec_string())


def fit_exponent(table: RateTable, tail_fraction: float = 0.5) -> tuple[float, float]:
    """OLS of log value on log n over the scan tail.

    Returns (beta_hat, stderr) where the model is value ~ n^(-beta/2), so
    beta_hat = -2 * slope.
    """
    if not 0.0 < tail_fraction <= 1.0:
        raise ValueError("tail_fraction must lie in (0, 1]")
    finite = [(r.n, r.value) for r in table.rows
              if math.isfinite(r.value) and r.value > 0.0]
    count = math.ceil(tail_fraction * len(finite))
    window = finite[-count:]
    if len(window) < 3:
        raise InsufficientDataError("need at least 3 finite rows in the window")
    x = np.log([n for n, _ in window])
    y = np.log([v for _, v in window])
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    resid = y - (y.mean() + slope * xc)
    dof = len(window) - 2
    var = float(np.dot(resid, resid) / dof) if dof > 0 else 0.0
    stderr = math.sqrt(var / float(np.dot(xc, xc)))
    return -2.0 * slope, 2.0 * stderr


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateVerdict:
    """Numerical certificate for the decay class of a weight.

    kind: rate_half_yes | log_power_band | log_power_upper | log_power_lower
          | log_tail_rate_half | unclassified
    """

    kind: str
    witness: dict

    def to_json(self) -> dict:
        return {"kind": self.kind, "witness": self.witness}


def _log_grid(h: WeightFunction, points: int) -> np.ndarray:
    u_cap = -math.log1p(-min(h.domain_cap, DOMAIN_CAP)) - 0.7
    u = np.linspace(0.05, u_cap, points)
    return -np.expm1(-u)


def classify(h: WeightFunction, grid_points: int = 96) -> RateVerdict:
    """Check, in order: integrability; log-power envelopes; the log-tail
    sufficient condition with exponent above one."""
    total = h.total_mass()
    if math.isfinite(total):
        return RateVerdict(kind="rate_half_yes", witness={"integral": total})
    ts = _log_grid(h, grid_points)
    vals = h.eval(ts)
    u = 1.0 - np.log1p(-ts)
    mask = vals > 0
    if np.count_nonzero(mask) < 8:
        return RateVerdict(kind="unclassified", witness={"reason": "weight vanishes on grid"})
    x = np.log(u[mask])
    y = np.log(vals[mask] * (1.0 - ts[mask]))
    xc = x - x.mean()
    slope = float(np.dot(xc, y) / np.dot(xc, xc))
    alpha_hat = -slope
    if 0.5 < alpha_hat < 1.0:
        ref = u ** (-alpha_hat) / (1.0 - ts)
        ratio = vals / ref
        c_up = float(np.max(ratio))
        c_lo = float(np.max(1.0 / ratio[mask]))
        return RateVerdict(kind="log_power_band", witness={
            "alpha": alpha_hat, "c_upper": c_up, "c_lower": c_lo,
            "s": 0.0, "grid_points": int(grid_points),
        })
    if alpha_hat > 1.0:
        bracket = alpha_hat + np.log1p(1.0 / (1.0 - ts))
        big_c = float(np.max(vals * (1.0 - ts) * bracket ** alpha_hat))
        return RateVerdict(kind="log_tail_rate_half", witness={
            "alpha": alpha_hat, "C": big_c, "grid_points": int(grid_points),
        })
    return RateVerdict(kind="unclassified", witness={"alpha": alpha_hat})


# ---------------------------------------------------------------------------
# certificates and probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FloorRow:
    n: int
    floor: float
    value_sq: float

    @property
    def margin(self) -> float:
        return self.value_sq - self.floor


@dataclass(frozen=True)
class FloorReport:
    theta: float
    rows: tuple
    slack: float = 1e-9

    @property
    def passed(self) -> bool:
        return all(r.margin >= -self.slack for r in self.rows)


def check_power_floor(theta: float, n_max: int = 6,
                      cfg: OptimizerConfig = DEFAULT_OPT) -> FloorReport:
    """Certify best-estimate(n)^2 >= (theta-1)^(n-1) for the power family.

    Estimates are upper bounds of the true optimum, which satisfies the floor,
    so margins should be nonnegative up to quadrature noise.
    """
    if n_max > 6:
        raise ValueError("floor check is intended for n_max <= 6")
    h = PowerWeight(theta)
    rows = []
    for n in range(1, n_max + 1):
        value = optimal_net_dp(h, n, cfg).value
        if n <= 4:
            brute, _ = brute_force_best(h, n, grid_size=161)
            value = min(value, brute)
        rows.append(FloorRow(n=n, floor=(theta - 1.0) ** (n - 1), value_sq=value ** 2))
    return FloorReport(theta=theta, rows=tuple(rows))


@dataclass(frozen=True)
class ProbeRow:
    n: int
    estimate_sq: float
    two_term_bound: float

    @property
    def ratio(self) -> float:
        return self.estimate_sq / self.two_term_bound


@dataclass(frozen=True)
class ProbeReport:
    """EXPLORATORY: ratios of best estimates to the two-term upper bound.

    Whether the bound is tight up to a constant is an open question; this
    records evidence only and carries no pass/fail semantics.
    """

    h_spec: str
    rows: tuple
    skipped: tuple = ()
    label: str = "EXPLORATORY"

    @property
    def ratio_range(self) -> tuple[float, float]:
        ratios = [r.ratio for r in self.rows]
        return (min(ratios), max(ratios)) if ratios else (math.nan, math.nan)


def two_term_bound(h: WeightFunction, n: int, points: int = 256) -> float:
    """inf over T of cumulative(T)^2/(n-1) + weighted_tail(T), by grid scan
    plus golden-section refinement in u = -log(1-T)."""
    if n < 2:
        raise ValueError("two-term bound needs n >= 2")
    u_cap = -math.log1p(-min(h.domain_cap, DOMAIN_CAP))

    def objective(u):
        t = -math.expm1(-u)
        tail = h.weighted_tail(t)
        if math.isinf(tail):
            return math.inf
        return h.cumulative(t) ** 2 / (n - 1) + tail

    us = np.linspace(1e-6, u_cap, points)
    vals = np.asarray([objective(u) for u in us])
    j = int(np.argmin(vals))
    lo = us[max(j - 1, 0)]
    hi = us[min(j + 1, points - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(80):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = objective(d)
        if b - a < 1e-12 * max(1.0, b):
            break
    return min(float(np.min(vals)), fc, fd)


def probe_two_term_bound(h: WeightFunction, n_list,
                         cfg: OptimizerConfig = DEFAULT_OPT) -> ProbeReport:
    """Ratio of squared best estimates to the two-term bound, per n (n >= 2)."""
    rows = []
    skipped = []
    for n in n_list:
        if n < 2:
            skipped.append(n)
            continue
        est = estimate_best(h, n, cfg)
        bound = two_term_bound(h, n)
        rows.append(ProbeRow(n=n, estimate_sq=est.value ** 2, two_term_bound=bound))
    return ProbeReport(h_spec=h.spec_string(), rows=tuple(rows),
                       skipped=tuple(skipped))
