"""Monte Carlo measurement of the discrete approximation error.

The driving process is a standard Brownian motion on [0, 1]; model "W" is the
motion itself, model "S" the exponential martingale exp(W_t - t/2).  A payoff
Z is approximated by its expectation plus a discrete stochastic integral with
the left-endpoint hedge coefficients dF/dx, and the squared residual

    Z - E[Z] - sum_i dF/dx(t_{i-1}, X_{t_{i-1}}) (X_{t_i} - X_{t_{i-1}})

is averaged over paths.  This Riemann choice of coefficients is the measured
quantity (equivalent to the optimal step coefficients up to constants); it is
reported as such, never as the infimum.

Paths are built with a dyadic bridge from counter-based Philox streams keyed
by (seed, level, path-chunk), with inverse-CDF normals so each normal consumes
exactly one 64-bit word.  Results are therefore bit-deterministic for a fixed
seed and configuration, refinements of fine_steps extend paths without
changing coarse values, and adding paths never perturbs existing ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .errors import DomainError, QuadratureFailure, SnapTooCoarseError
from .hermite import HermiteCoefficients
from .nets import TimeNet, score
from .weightfn import ConstantWeight, HermiteSeriesWeight, WeightFunction, monotone_envelope

_CHUNK = 2048  # fixed path-chunk size; part of the stream layout, not tunable


@dataclass(frozen=True)
class Model:
    """Driving process: "W" (Brownian motion, starts at 0) or "S"
    (exponential martingale, starts at 1)."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("W", "S"):
            raise ValueError("model kind must be 'W' or 'S'")

    @property
    def x0(self) -> float:
        return 0.0 if self.kind == "W" else 1.0

    def state_from_bm(self, w, t):
        """Model state at time t given the driving motion value."""
        return w if self.kind == "W" else np.exp(w - 0.5 * t)

    def bm_from_state(self, x, t):
        if self.kind == "W":
            return x
        return np.log(x) + 0.5 * t


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------

class Payoff:
    """Terminal payoff; polynomially bounded with the stated (C, q)."""

    growth: tuple[float, float] = (1.0, 1.0)

    def terminal(self, x):
        """Payoff from the terminal state X_1."""
        raise NotImplementedError

    def on_bm(self, model: Model, w):
        """Payoff as a function of the driving motion's terminal value."""
        return self.terminal(model.state_from_bm(w, 1.0))

    def spec_string(self) -> str:
        raise NotImplementedError


class IdentityPayoff(Payoff):
    growth = (1.0, 1.0)

    def terminal(self, x):
        return np.asarray(x, dtype=float)

    def spec_string(self):
        return "identity"


class SquarePayoff(Payoff):
    growth = (1.0, 2.0)

    def terminal(self, x):
        return np.asarray(x, dtype=float) ** 2

    def spec_string(self):
        return "square"


@dataclass(frozen=True)
class CallPayoff(Payoff):
    strike: float

    def __post_init__(self):
        object.__setattr__(self, "growth", (1.0 + abs(self.strike), 1.0))

    def terminal(self, x):
        return np.maximum(np.asarray(x, dtype=float) - self.strike, 0.0)

    def spec_string(self):
        return f"call:K={self.strike!r}"


@dataclass(frozen=True)
class HermiteSeriesPayoff(Payoff):
    """Z = sum_k a_k h_k(W_1): defined on the driving motion's terminal value.

    Under model "S" this means the payoff applied to log X_1 + 1/2, which is
    exactly the payload whose squared weights are the model series.
    """

    coeffs: HermiteCoefficients

    def __post_init__(self):
        object.__setattr__(self, "growth", (float(np.sum(np.abs(self.coeffs.a))),
                                            float(self.coeffs.order)))

    def terminal(self, x):
        from .hermite import hermite_series

        return hermite_series(self.coeffs.a, x)

    def on_bm(self, model: Model, w):
        from .hermite import hermite_series

        return hermite_series(self.coeffs.a, w)

    def spec_string(self):
        alpha = self.coeffs.decay_alpha
        tag = f"alpha={alpha!r}," if alpha is not None else ""
        return f"hermite:{tag}terms={self.coeffs.order}"


# ---------------------------------------------------------------------------
# conditional expectation, hedge coefficient, curvature
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gh_nodes(n: int):
    """Nodes/weights for E f(g), g standard normal."""
    x, w = np.polynomial.hermite.hermgauss(n)
    return x * math.sqrt(2.0), w / math.sqrt(math.pi)


def _scaled_hermite_triplet(a: np.ndarray, y, t):
    """(sum a_k q_k, sum a_k sqrt(k) q_{k-1}, sum a_k sqrt(k(k-1)) q_{k-2})
    where q_k(y, t) = t^(k/2) h_k(y / sqrt(t)), by the stable recurrence
    q_{k+1} = (y q_k - sqrt(k) t q_{k-1}) / sqrt(k+1); exact at t = 0."""
    y = np.asarray(y, dtype=float)
    q_prev = np.ones_like(y)          # q_0
    val = a[0] * q_prev
    der = np.zeros_like(y)
    der2 = np.zeros_like(y)
    if a.size > 1:
        q_cur = y.copy()              # q_1
        val = val + a[1] * q_cur
        der = der + a[1] * q_prev
        for k in range(1, a.size - 1):
            q_next = (y * q_cur - math.sqrt(k) * t * q_prev) / math.sqrt(k + 1)
            val = val + a[k + 1] * q_next
            der = der + a[k + 1] * math.sqrt(k + 1) * q_cur
            der2 = der2 + a[k + 1] * math.sqrt((k + 1) * k) * q_prev
            q_prev, q_cur = q_cur, q_next
    return val, der, der2


def _check_time(t: float):
    if not 0.0 <= t < 1.0:
        raise DomainError("t must lie in [0, 1)")


def conditional_F(model: Model, payoff: Payoff, t: float, x,
                  quad_nodes: int = 64, check: bool = False):
    """F(t, x) = E[Z | X_t = x]; closed forms where known, else quadrature."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    s = math.sqrt(1.0 - t)
    if isinstance(payoff, IdentityPayoff):
        return x + 0.0
    if isinstance(payoff, SquarePayoff):
        if model.kind == "W":
            return x ** 2 + (1.0 - t)
        return x ** 2 * math.exp(1.0 - t)
    if isinstance(payoff, CallPayoff) and model.kind == "W":
        d = (x - payoff.strike) / s
        return s * _phi(d) + (x - payoff.strike) * ndtr(d)
    if isinstance(payoff, CallPayoff) and model.kind == "S":
        k = payoff.strike
        if k <= 0:
            return x - k
        d1 = (np.log(x / k) + 0.5 * (1.0 - t)) / s
        return x * ndtr(d1) - k * ndtr(d1 - s)
    if isinstance(payoff, HermiteSeriesPayoff):
        y = model.bm_from_state(x, t)
        val, _, _ = _scaled_hermite_triplet(payoff.coeffs.a, y, t)
        return val
    return _quad_conditional(model, payoff, t, x, quad_nodes, check)


def _phi(d):
    return np.exp(-0.5 * np.asarray(d, dtype=float) ** 2) / math.sqrt(2.0 * math.pi)


def _quad_moments(model: Model, payoff: Payoff, t: float, x, quad_nodes: int):
    """(E z, E z*g, E z*(g^2-1)) over g for z = payoff(W_1), W_1 = w_t + s g."""
    s = math.sqrt(1.0 - t)
    w = model.bm_from_state(np.asarray(x, dtype=float), t)
    g, wts = _gh_nodes(quad_nodes)
    z = payoff.on_bm(model, w[..., None] + s * g)
    m0 = z @ wts
    m1 = (z * g) @ wts
    m2 = (z * (g * g - 1.0)) @ wts
    return m0, m1, m2


def _quad_conditional(model, payoff, t, x, quad_nodes, check):
    m0, _, _ = _quad_moments(model, payoff, t, x, quad_nodes)
    if check:
        ref, _, _ = _quad_moments(model, payoff, t, x, 2 * quad_nodes)
        if np.max(np.abs(m0 - ref)) > 1e-8 * (1.0 + np.max(np.abs(ref))):
            raise QuadratureFailure("node doubling changed the conditional expectation")
    return m0


def delta(model: Model, payoff: Payoff, t: float, x,
          quad_nodes: int = 64, check: bool = False):
    """Hedge coefficient dF/dx(t, x)."""
    _check_time(t)
    x = np.asarray(x, dtype=float)
    s = math.sqrt(1.0 - t)
    if isinstance(payoff, IdentityPayoff):
        return np.ones_like(x)
    if isinstance(payoff, SquarePayoff):
        if model.kind == "W":
            return 2.0 * x
        return 2.0 * x * math.exp(1.0 - t)
    if isinstance(payoff, CallPayoff) and model.kind == "W":
        return ndtr((x - payoff.strike) / s)
    if isinstance(payoff, CallPayoff) and model.kind == "S":
        k = payoff.strike
        if k <= 0:
            return np.ones_like(x)
        return ndtr((np.log(x / k) + 0.5 * (1.0 - t)) / s)
    if isinstance(payoff, HermiteSeriesPayoff):
        y = model.bm_from_state(x, t)
        _, der, _ = _scaled_hermite_triplet(payoff.coeffs.a, y, t)
        return der if model.kind == "W" else der / x
    _, m1, _ = _quad_moments(model, payoff, t, x, quad_nodes)
    out = m1 / s
    if model.kind == "S":
        out = out / x
    if check:
        _, r1, _ = _quad_moments(model, payoff, t, x, 2 * quad_nodes)
        ref = r1 / s if model.kind == "W" else r1 / (s * x)
        if np.max(np.abs(out - ref)) > 1e-8 * (1.0 + np.max(np.abs(ref))):
            raise QuadratureFailure("node doubling changed the hedge coefficient")
    return out


def delta_fd(model: Model, payoff: Payoff, t: float, x,
             quad_nodes: int = 64):
    """Central-difference fallback/cross-check for dF/dx."""
    x = np.asarray(x, dtype=float)
    h = np.maximum(1e-5, 1e-5 * np.abs(x))
    up = conditional_F(model, payoff, t, x + h, quad_nodes)
    dn = conditional_F(model, payoff, t, x - h, quad_nodes)
    return (up - dn) / (2.0 * h)


def curvature(model: Model, payoff: Payoff, t: float, x,
              quad_nodes: int = 64, method: str = "auto"):
    """sigma^2(x) * d2F/dx2 at (t, x): the integrand of the weight functional.

    sigma^2 is 1 for model W and x^2 for model S.  method "quadrature" forces
    the differentiated-kernel route (the independent oracle for the series
    forms).
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    s2 = 1.0 - t
    if method != "quadrature":
        if isinstance(payoff, IdentityPayoff):
            return np.zeros_like(x)
        if isinstance(payoff, SquarePayoff):
            if model.kind == "W":
                return np.full_like(x, 2.0)
            return 2.0 * x ** 2 * math.exp(1.0 - t)
        if isinstance(payoff, CallPayoff) and model.kind == "W":
            d = (x - payoff.strike) / math.sqrt(s2)
            return _phi(d) / math.sqrt(s2)
        if isinstance(payoff, CallPayoff) and model.kind == "S":
            k = payoff.strike
            if k <= 0:
                return np.zeros_like(x)
            d1 = (np.log(x / k) + 0.5 * s2) / math.sqrt(s2)
            return x * _phi(d1) / math.sqrt(s2)
        if isinstance(payoff, HermiteSeriesPayoff):
            y = model.bm_from_state(x, t)
            _, der, der2 = _scaled_hermite_triplet(payoff.coeffs.a, y, t)
            return der2 if model.kind == "W" else der2 - der
    _, m1, m2 = _quad_moments(model, payoff, t, x, quad_nodes)
    if model.kind == "W":
        return m2 / s2
    return m2 / s2 - m1 / math.sqrt(s2)


def h_functional(model: Model, payoff: Payoff, t: float,
                 quad_nodes: int = 64, method: str = "auto",
                 check: bool = False) -> float:
    """Weight value: L2 norm of the curvature over the law of X_t."""
    _check_time(t)
    if t == 0.0:
        val = curvature(model, payoff, 0.0, np.asarray(model.x0), quad_nodes, method)
        return abs(float(val))

    def outer(nodes):
        g, wts = _gh_nodes(nodes)
        x = model.state_from_bm(math.sqrt(t) * g, t)
        c = curvature(model, payoff, t, x, quad_nodes, method)
        return math.sqrt(max(float((c * c) @ wts), 0.0))

    val = outer(quad_nodes)
    if check:
        ref = outer(2 * quad_nodes)
        if abs(val - ref) > 1e-8 * (1.0 + abs(ref)):
            raise QuadratureFailure("node doubling changed the weight value")
    return val


def weight_from_payoff(model: Model, payoff: Payoff,
                       grid_size: int = 257) -> WeightFunction:
    """Weight function governing the discretization error of this payoff.

    Exact where the curvature is known in closed form; otherwise the running
    maximum of quadrature values on a grid (the weight is increasing, so the
    envelope converges from below/above only by grid resolution).
    """
    if isinstance(payoff, IdentityPayoff):
        return ConstantWeight(0.0)
    if isinstance(payoff, SquarePayoff):
        if model.kind == "W":
            return ConstantWeight(2.0)
        # H(t) = 2 e^(1 + 2t): series of H^2 = 4 e^2 sum (4t)^k / k!
        k = np.arange(0, 64)
        series = 4.0 * math.e ** 2 * 4.0 ** k / np.array([math.factorial(int(j)) for j in k])
        return HermiteSeriesWeight(series, label="gbm-square")
    if isinstance(payoff, HermiteSeriesPayoff):
        from .hermite import as_weightfunction

        return as_weightfunction(payoff.coeffs, model.kind)
    return monotone_envelope(lambda ts: np.array([
        h_functional(model, payoff, float(t)) for t in np.atleast_1d(ts)
    ]), grid_size)


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    n_paths: int
    fine_steps: int = 4096
    seed: int = 0
    quad_nodes: int = 64

    def __post_init__(self):
        if self.n_paths < 100:
            raise ValueError("n_paths must be >= 100")
        m = self.fine_steps
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError("fine_steps must be a power of two >= 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class McEstimate:
    """Mean and standard error of squared residuals over paths."""

    mean_sq: float
    stderr: float
    n_paths: int
    max_snap: float = 0.0

    def to_json(self) -> dict:
        return {"mean_sq": self.mean_sq, "stderr": self.stderr,
                "n_paths": self.n_paths, "max_snap": self.max_snap}


def _snap_knots(net: TimeNet, m: int):
    idx = np.rint(net.knots * m).astype(np.int64)
    disp = np.abs(net.knots - idx / m)
    if np.any(np.diff(idx) < 1) or float(np.max(disp)) > 0.5 / m + 1e-12:
        raise SnapTooCoarseError(
            f"net cannot be represented on a fine grid of {m} steps")
    return idx, float(np.max(disp))


def _chunk_normals(seed: int, chunk_index: int, rows: int, m: int) -> np.ndarray:
    """Dyadic-bridge normals for one path chunk, shape (rows, m).

    Column blocks are keyed by (seed, level, chunk): level 0 is the terminal
    value, level l >= 1 holds the 2^(l-1) midpoint refinements.  One uniform
    word per normal (inverse CDF), so streams never overlap or shift.
    """
    z = np.empty((rows, m))
    levels = int(round(math.log2(m)))
    for level in range(levels + 1):
        cols = 1 if level == 0 else 1 << (level - 1)
        key = np.array([seed, (np.uint64(level) << np.uint64(40)) | np.uint64(chunk_index)],
                       dtype=np.uint64)
        raw = np.random.Philox(key=key).random_raw(rows * cols)
        uni = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
        block = ndtri(uni).reshape(rows, cols)
        if level == 0:
            z[:, 0] = block[:, 0]
        else:
            z[:, cols: 2 * cols] = block
    return z


def path_residuals(model: Model, payoff: Payoff, net: TimeNet,
                   cfg: SimConfig) -> tuple[np.ndarray, float]:
    """Per-path residuals of the discrete approximation and the max snap.

    Knots are snapped to the nearest fine-grid point; the expectation E[Z]
    comes from quadrature at t = 0, not from the sample mean, so squared
    residuals are not centering-biased.
    """
    m = cfg.fine_steps
    idx, max_snap = _snap_knots(net, m)
    times = idx / m
    ez = float(np.asarray(conditional_F(model, payoff, 0.0, model.x0,
                                        cfg.quad_nodes)))
    chunks = []
    done = 0
    chunk_index = 0
    while done < cfg.n_paths:
        rows = min(_CHUNK, cfg.n_paths - done)
        z = _chunk_normals(cfg.seed, chunk_index, _CHUNK, m)[:rows]
        w = _kernels.bridge_fill(z, m)
        wk = w[:, idx]
        xk = model.state_from_bm(wk, times)
        acc = payoff.on_bm(model, w[:, m]) - ez
        for i in range(len(idx) - 1):
            lam = delta(model, payoff, float(times[i]), xk[:, i], cfg.quad_nodes)
            acc = acc - lam * (xk[:, i + 1] - xk[:, i])
        chunks.append(acc)
        done += rows
        chunk_index += 1
    return np.concatenate(chunks), max_snap


def simulate_error(model: Model, payoff: Payoff, net: TimeNet,
                   cfg: SimConfig) -> McEstimate:
    """Mean and standard error of the squared residual over paths."""
    res, max_snap = path_residuals(model, payoff, net, cfg)
    sq = res * res
    mean = float(np.mean(sq))
    stderr = float(np.std(sq, ddof=1) / math.sqrt(sq.size))
    return McEstimate(mean_sq=mean, stderr=stderr, n_paths=cfg.n_paths,
                      max_snap=max_snap)


@dataclass(frozen=True)
class EquivalenceReport:
    """Measured error next to the weight-functional prediction."""

    model: str
    payoff: str
    mc: McEstimate
    weight_value: float
    net_n: int

    @property
    def ratio(self) -> float:
        return math.sqrt(self.mc.mean_sq) / self.weight_value if self.weight_value else math.inf

    def ratio_interval(self, z: float = 3.0) -> tuple[float, float]:
        lo = max(self.mc.mean_sq - z * self.mc.stderr, 0.0)
        hi = self.mc.mean_sq + z * self.mc.stderr
        if not self.weight_value:
            return (math.inf, math.inf)
        return (math.sqrt(lo) / self.weight_value, math.sqrt(hi) / self.weight_value)

    def to_json(self) -> dict:
        lo, hi = self.ratio_interval()
        return {
            "schema": "netopt/1",
            "model": self.model,
            "payoff": self.payoff,
            "mc": self.mc.to_json(),
            "A_value": self.weight_value,
            "ratio": self.ratio,
            "ratio_3se": [lo, hi],
            "n": self.net_n,
        }


def compare_equivalence(model: Model, payoff: Payoff, net: TimeNet,
                        cfg: SimConfig,
                        weight: WeightFunction | None = None) -> EquivalenceReport:
    """Ratio of the measured error to the weight-functional value A."""
    mc = simulate_error(model, payoff, net, cfg)
    if weight is None:
        weight = weight_from_payoff(model, payoff)
    a_value = score(weight, net).total
    return EquivalenceReport(model=model.kind, payoff=payoff.spec_string(),
                             mc=mc, weight_value=a_value, net_n=net.n)


def parse_payoff(spec: str) -> Payoff:
    """Parse "identity", "square", "call:K=1", "hermite:alpha=0.75,terms=200"."""
    spec = spec.strip()
    kind, _, body = spec.partition(":")
    kind = kind.lower()
    if kind == "identity":
        return IdentityPayoff()
    if kind == "square":
        return SquarePayoff()
    if kind == "call":
        kv = dict(p.split("=") for p in body.split(",") if p)
        return CallPayoff(float(kv.get("K", kv.get("k", 1.0))))
    if kind == "hermite":
        from .hermite import log_decay_coeffs

        kv = dict(p.split("=") for p in body.split(",") if p)
        return HermiteSeriesPayoff(log_decay_coeffs(float(kv["alpha"]),
                                                    int(kv.get("terms", 200))))
    raise ValueError(f"unknown payoff {spec!r}")
