"""Time nets: construction, validation, scoring and serialization.

A net is a strictly increasing knot vector 0 = t_0 < ... < t_n = 1.  Its score
against a weight H is the error functional

    total = sqrt( sum_i  integral_{t_{i-1}}^{t_i} (t_i - t) H^2(t) dt ),

with per-cell attribution.  The last cell may be divergent, in which case the
total is inf (a value, not an error).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BadCutoffError, DomainError, NotIntegrableError
from .quadrature import DEFAULT_QUAD, QuadratureConfig
from .weightfn import DOMAIN_CAP, WeightFunction

#: smallest allowed knot gap (coincident equipartition knots are nudged apart)
MIN_GAP = 1e-15


@dataclass(frozen=True)
class TimeNet:
    """Strictly increasing knots with exact endpoints 0 and 1."""

    knots: np.ndarray
    flags: tuple = ()

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.ndim != 1 or k.size < 2:
            raise ValueError("a net needs at least the two endpoint knots")
        if k[0] != 0.0 or k[-1] != 1.0:
            raise ValueError("net must start at 0 and end at 1 exactly")
        gaps = np.diff(k)
        # 10% slack absorbs rounding of nudged knots right below 1.0
        if np.any(gaps <= 0.0) or np.any(gaps < MIN_GAP * 0.9):
            raise ValueError(f"knots must increase by at least {MIN_GAP}")
        object.__setattr__(self, "knots", k)

    @property
    def n(self) -> int:
        return self.knots.size - 1

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.knots)))

    def interior(self) -> np.ndarray:
        return self.knots[1:-1]

    def refine(self, points) -> "TimeNet":
        """Net with extra knots merged in (too-close duplicates dropped)."""
        cand = np.union1d(self.knots, np.asarray(points, dtype=float))
        cand = cand[(cand > 0.0) & (cand < 1.0)]
        out = [0.0]
        for x in cand:
            if x >= out[-1] + MIN_GAP and x <= 1.0 - MIN_GAP:
                out.append(float(x))
        out.append(1.0)
        return TimeNet(np.asarray(out), flags=self.flags)

    # -- serialization (lossless at 17 significant digits) -------------------

    def to_json(self) -> dict:
        return {
            "schema": "netopt/1",
            "knots": [float(f"{x:.17g}") for x in self.knots],
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, obj) -> "TimeNet":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(np.asarray(obj["knots"], dtype=float),
                   tuple(obj.get("flags", ())))

    def to_csv(self) -> str:
        lines = ["knot"] + [f"{x:.17g}" for x in self.knots]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "TimeNet":
        rows = [ln.strip() for ln in text.splitlines()
                if ln.strip() and not ln.lstrip().startswith("#")]
        if rows and rows[0].lower() == "knot":
            rows = rows[1:]
        return cls(np.asarray([float(r) for r in rows]))


@dataclass(frozen=True)
class NetScore:
    """Error functional value with per-cell attribution."""

    total: float
    cells: np.ndarray = field(repr=False)
    mesh: float

    @property
    def divergent(self) -> bool:
        return math.isinf(self.total)


def _strictify(knots: np.ndarray, flags: list) -> np.ndarray:
    """Nudge coincident knots apart (flat weight regions collapse quantiles)."""
    k = knots.copy()
    nudged = False
    for i in range(1, k.size):
        if k[i] < k[i - 1] + MIN_GAP:
            k[i] = k[i - 1] + MIN_GAP
            nudged = True
    # keep the tail below 1 by walking back from the fixed right endpoint
    k[-1] = 1.0
    for i in range(k.size - 2, 0, -1):
        if k[i] > k[i + 1] - MIN_GAP:
            k[i] = k[i + 1] - MIN_GAP
            nudged = True
    if np.any(np.diff(k) < MIN_GAP / 2):
        raise ValueError("cannot separate knots at float resolution")
    if nudged:
        flags.append("nudged-knots")
    return k


def equidistant(n: int) -> TimeNet:
    """Knots i/n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return TimeNet(np.linspace(0.0, 1.0, n + 1))


def regular_net(h: WeightFunction, n: int) -> TimeNet:
    """Mass-equipartition net: cumulative(t_i) = (i/n) * total mass.

    Requires a finite total mass.  A zero weight makes every net optimal; the
    equidistant net is returned with a ``zero-mass`` flag instead of failing.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    total = h.total_mass()
    if math.isinf(total):
        raise NotIntegrableError("regular net needs an integrable weight")
    if total <= 0.0:
        warnings.warn("zero-mass weight: returning the equidistant net")
        return TimeNet(np.linspace(0.0, 1.0, n + 1), flags=("zero-mass",))
    knots = np.empty(n + 1)
    knots[0] = 0.0
    knots[n] = 1.0
    for i in range(1, n):
        knots[i] = h.inverse_cumulative(total * i / n)
    flags: list = []
    knots = _strictify(knots, flags)
    return TimeNet(knots, flags=tuple(flags))


def truncated_net(h: WeightFunction, n: int, cutoff: float) -> TimeNet:
    """Equipartition of the mass on [0, T] over the first n-1 cells, then 1.

    The knot t_{n-1} equals T exactly; the last cell [T, 1] absorbs the
    (possibly heavy) tail.
    """
    if n < 2:
        raise ValueError("truncated nets need n >= 2")
    if not 0.0 < cutoff < 1.0:
        raise BadCutoffError(f"cutoff {cutoff} not in (0, 1)")
    mass = h.cumulative(cutoff)
    if math.isinf(mass):
        raise NotIntegrableError("mass on [0, T] must be finite")
    knots = np.empty(n + 1)
    knots[0] = 0.0
    knots[n - 1] = cutoff
    knots[n] = 1.0
    for i in range(1, n - 1):
        knots[i] = min(h.inverse_cumulative(mass * i / (n - 1)), cutoff)
    flags: list = []
    knots = _strictify(knots, flags)
    return TimeNet(knots, flags=tuple(flags))


def balance_cutoff(h: WeightFunction, n: int,
                   residual_tol: float = 1e-10) -> tuple[float, bool]:
    """T equating bulk and tail: cumulative(T) = sqrt((n-1) * weighted_tail(T)).

    The left side increases from 0 and the right side decreases, so bisection
    applies.  When no sign change exists on (0, 1), the endpoint minimizing
    the two-term bound is returned with flagged=True.
    """
    if n < 2:
        raise ValueError("balance cutoff needs n >= 2")

    def residual(t):
        tail = h.weighted_tail(t)
        if math.isinf(tail):
            return -math.inf
        return h.cumulative(t) - math.sqrt((n - 1) * tail)

    lo_t = 1e-12
    hi_t = min(h.domain_cap, DOMAIN_CAP)
    r_lo = residual(lo_t)
    r_hi = residual(hi_t)
    if not (r_lo < 0.0 < r_hi):
        # no interior root: scan the two-term bound and return its argmin
        ts = 1.0 - np.exp(-np.linspace(1e-6, -math.log1p(-hi_t), 64))
        vals = [h.cumulative(t) ** 2 / (n - 1) + h.weighted_tail(t) for t in ts]
        best = int(np.argmin(vals))
        return float(ts[best]), True
    for _ in range(200):
        mid = 0.5 * (lo_t + hi_t)
        r_mid = residual(mid)
        if abs(r_mid) <= residual_tol:
            return mid, False
        if r_mid < 0.0:
            lo_t = mid
        else:
            hi_t = mid
        if hi_t - lo_t < 1e-17:
            break
    return 0.5 * (lo_t + hi_t), False


def log_power_cutoff(alpha: float, n: int) -> float:
    """Explicit cutoff 1 - exp(c(n)) with c(n) = 1 - ((1-a) n^(1-a) + 1)^(1/(1-a)).

    For log-power weights with unit constant this places mass n^(1-alpha) on
    [0, T].  Clamped into [MIN_GAP, domain cap]: the exact value underflows
    float64 for small alpha and large n.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if n < 1:
        raise ValueError("n must be >= 1")
    c = 1.0 - ((1.0 - alpha) * n ** (1.0 - alpha) + 1.0) ** (1.0 / (1.0 - alpha))
    t = -math.expm1(c)
    return min(max(t, MIN_GAP), DOMAIN_CAP)


def score(h: WeightFunction, net: TimeNet,
          cfg: QuadratureConfig = DEFAULT_QUAD) -> NetScore:
    """Evaluate the error functional cell by cell."""
    cells = np.asarray(h.cell_error_many(net.knots[:-1], net.knots[1:]),
                       dtype=float)
    if np.any(np.isnan(cells)):
        raise DomainError("cell error evaluated to NaN")
    ssum = float(np.sum(cells))
    total = math.inf if math.isinf(ssum) else math.sqrt(max(ssum, 0.0))
    return NetScore(total=total, cells=cells, mesh=net.mesh)
