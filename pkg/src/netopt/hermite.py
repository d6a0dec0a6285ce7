"""Hermite-expansion payloads and the series identities behind log-power weights.

Coefficient sequences (a_k) define a square-integrable function of a standard
Gaussian.  The squared weight functions of the two supported models are power
series with nonnegative coefficients:

* bm  (model "W"):   sum_k a_{k+2}^2 (k+2)(k+1) t^k
* gbm (model "S"):   sum_k (a_{k+2} - a_{k+1}/sqrt(k+2))^2 (k+2)(k+1) t^k

The log-decay coefficient family reproduces, term by term, the series
1 + sum_{k>=2} k log(k)^(-2 alpha) t^k, which is comparable to
[(1-log(1-t))^(-alpha) / (1-t)]^2; the ratio checks in this module quantify
those comparisons numerically on finite grids, with no claim beyond the
checked points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from . import _kernels
from .errors import (DivergentSeriesError, DomainError,
                     MonotonicityViolationError, NetoptError, QuadratureFailure)
from .quadrature import DEFAULT_QUAD, QuadratureConfig, integrate
from .weightfn import DOMAIN_CAP, HermiteSeriesWeight

#: default per-evaluation budget for the adaptive infinite-series sums
MAX_SERIES_TERMS = 1 << 26


# ---------------------------------------------------------------------------
# orthonormal Hermite polynomials (probabilists', normalized in L2(gaussian))
# ---------------------------------------------------------------------------

def hermite_eval(k: int, x):
    """h_k(x) by the stable three-term recurrence.

    h_0 = 1, h_1 = x, h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, (x * cur - math.sqrt(j) * prev) / math.sqrt(j + 1)
    return cur if cur.ndim else float(cur)


def hermite_series(a: np.ndarray, x):
    """sum_k a_k h_k(x), forward recurrence, vectorized in x."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    prev = np.ones_like(x)
    total = a[0] * prev
    if a.size > 1:
        cur = x.copy()
        total = total + a[1] * cur
        for k in range(1, a.size - 1):
            prev, cur = cur, (x * cur - math.sqrt(k) * prev) / math.sqrt(k + 1)
            total = total + a[k + 1] * cur
    return float(total[0]) if scalar else total


# ---------------------------------------------------------------------------
# coefficient payloads
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermiteCoefficients:
    """Truncated coefficient sequence a_0..a_K.

    ``decay_alpha`` tags the log-decay family, enabling analytic bounds on
    the truncation error against the infinite model.
    """

    a: np.ndarray
    decay_alpha: float | None = None

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=float)
        if arr.ndim != 1 or arr.size < 3:
            raise ValueError("need coefficients a_0..a_K with K >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "a", arr)

    @property
    def order(self) -> int:
        return self.a.size - 1

    def to_json(self) -> dict:
        out = {"a": [float(v) for v in self.a]}
        if self.decay_alpha is not None:
            out["decay_alpha"] = self.decay_alpha
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "HermiteCoefficients":
        return cls(np.asarray(obj["a"], dtype=float), obj.get("decay_alpha"))


def log_decay_coeffs(alpha: float, order: int = 5000) -> HermiteCoefficients:
    """The slowly decaying payload: a_2 = 1/sqrt(2), a_k = 0 for k in {0,1,3},
    a_k = sqrt((k-2)/(k(k-1))) log(k-2)^(-alpha) for k >= 4."""
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (1/2, 1)")
    if order < 4:
        raise ValueError("order must be >= 4")
    a = np.zeros(order + 1)
    a[2] = 1.0 / math.sqrt(2.0)
    k = np.arange(4, order + 1, dtype=float)
    a[4:] = np.sqrt((k - 2.0) / (k * (k - 1.0))) * np.log(k - 2.0) ** (-alpha)
    return HermiteCoefficients(a, decay_alpha=alpha)


def series_coeffs(c: HermiteCoefficients, model: str) -> np.ndarray:
    """Nonnegative power-series coefficients of the squared weight."""
    a = c.a
    k = np.arange(a.size - 2, dtype=float)
    if model == "W":
        amp = a[2:]
    elif model == "S":
        amp = a[2:] - a[1:-1] / np.sqrt(k + 2.0)
    else:
        raise ValueError("model must be 'W' or 'S'")
    return amp ** 2 * (k + 2.0) * (k + 1.0)


def _truncation_bound(c: HermiteCoefficients, t: float, model: str) -> float:
    """Upper bound on the omitted infinite-model tail at t (decay tag only)."""
    if c.decay_alpha is None:
        return 0.0
    if t <= 0.0:
        return 0.0
    m0 = max(c.order - 1, 2)  # first omitted series index, minus safety one
    beta = 2.0 * c.decay_alpha
    term = m0 * math.log(m0) ** (-beta) * t ** m0
    ratio = t * (1.0 + 1.0 / m0)
    if ratio >= 1.0:
        return math.inf
    bound = term / (1.0 - ratio)
    if model == "S":
        bound *= 4.0
    return bound


def weight_sq(c: HermiteCoefficients, t, model: str, *, certify: bool = True,
              rel_tol: float = 1e-10):
    """Squared weight series at t, certified against the infinite model.

    Raises DivergentSeries when the decay tag says the truncation error at t
    cannot be brought below rel_tol (relative).  Untagged payloads are exact.
    """
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("t must lie in [0, 1)")
    coeffs = series_coeffs(c, model)
    vals = np.polynomial.polynomial.polyval(arr, coeffs)
    if certify and c.decay_alpha is not None:
        worst = float(np.max(arr))
        bound = _truncation_bound(c, worst, model)
        if not bound <= rel_tol * max(float(np.min(vals)), 1e-300):
            raise DivergentSeriesError(
                f"truncation tail {bound:.3e} at t={worst} exceeds "
                f"{rel_tol} relative; increase the coefficient order")
    return float(vals) if scalar else vals


def weight_sq_w(c: HermiteCoefficients, t, **kw):
    return weight_sq(c, t, "W", **kw)


def weight_sq_s(c: HermiteCoefficients, t, **kw):
    return weight_sq(c, t, "S", **kw)


def certified_cap(c: HermiteCoefficients, model: str = "W",
                  rel_tol: float = 1e-10) -> float:
    """Largest t where the truncation is certified, capped at the domain cap."""
    if c.decay_alpha is None:
        return DOMAIN_CAP

    def ok(t):
        val = np.polynomial.polynomial.polyval(t, series_coeffs(c, model))
        return _truncation_bound(c, t, model) <= rel_tol * max(val, 1e-300)

    if ok(DOMAIN_CAP):
        return DOMAIN_CAP
    lo, hi = 0.0, DOMAIN_CAP
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def as_weightfunction(c: HermiteCoefficients, model: str = "W",
                      grid_size: int = 257) -> HermiteSeriesWeight:
    """Wrap sqrt of the squared-weight series as a WeightFunction.

    These weights are provably nondecreasing (the series coefficients are
    nonnegative), so a violation on the verification grid signals a
    truncation or construction bug and raises.
    """
    coeffs = series_coeffs(c, model)
    cap = certified_cap(c, model)
    label = ""
    if c.decay_alpha is not None:
        label = f"hermite:alpha={c.decay_alpha!r},model={model},terms={c.order}"
    w = HermiteSeriesWeight(coeffs, label=label, cap=cap)
    ts = np.linspace(0.0, w.domain_cap, grid_size, endpoint=False)
    vals = w.eval(ts)
    if np.any(np.diff(vals) < -1e-12):
        raise MonotonicityViolationError("derived weight is not nondecreasing")
    return w


# ---------------------------------------------------------------------------
# infinite-model series and ratio checks
# ---------------------------------------------------------------------------

def log_series_value(beta: float, t: float, rel_tol: float = 1e-10,
                     max_terms: int = MAX_SERIES_TERMS) -> float:
    """1 + sum_{k>=2} k log(k)^(-beta) t^k with a certified tail."""
    if not 0.0 <= t < 1.0:
        raise DomainError("t must lie in [0, 1)")
    value, _bound, terms = _kernels.log_series_sum(beta, t, rel_tol, max_terms)
    if terms < 0:
        raise DivergentSeriesError(
            f"series tail at t={t} not certified within {max_terms} terms")
    return 1.0 + value


@dataclass(frozen=True)
class RatioCheck:
    lhs: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def log_series_ratio(beta: float, t: float, rel_tol: float = 1e-10) -> RatioCheck:
    """Compare (1-log(1-t))^-beta / (1-t)^2 with its power-series companion."""
    if beta <= 1.0:
        raise ValueError("beta must exceed 1")
    if not 0.0 <= t < DOMAIN_CAP:
        raise DomainError("t must lie in [0, domain cap)")
    u = 1.0 - math.log1p(-t)
    lhs = u ** (-beta) / (1.0 - t) ** 2
    rhs = log_series_value(beta, t, rel_tol)
    return RatioCheck(lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class MixtureCheck:
    psi: float
    phi: float
    phi_direct: float

    @property
    def ratio(self) -> float:
        return self.psi / self.phi


def power_mixture_ratio(beta: float, t: float,
                        cfg: QuadratureConfig = DEFAULT_QUAD) -> MixtureCheck:
    """Compare (1-log(1-t))^-(1+beta) / (1-t)^2 with the power-mixture integral
    int_1^inf z^(-beta-2) (1-t)^(1/z-2) dz.

    phi uses the incomplete-gamma representation
    (-log(1-t))^(-beta-1) (1-t)^-2 * gamma_lower(beta+1, -log(1-t));
    it is cross-checked against direct adaptive quadrature of the z-integral
    (transformed to w = 1/z) within 1e-6 relative.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not 0.0 < t < DOMAIN_CAP:
        raise DomainError("t must lie in (0, domain cap)")
    big_l = -math.log1p(-t)
    inv_sq = (1.0 - t) ** -2.0
    psi = (1.0 + big_l) ** (-(1.0 + beta)) * inv_sq
    phi = big_l ** (-(beta + 1.0)) * inv_sq * gammainc(beta + 1.0, big_l) * math.gamma(beta + 1.0)

    log1mt = math.log1p(-t)

    def integrand(w):
        return w ** beta * np.exp(w * log1mt)

    phi_direct = inv_sq * integrate(integrand, 0.0, 1.0, cfg)
    if not math.isclose(phi, phi_direct, rel_tol=1e-6):
        raise QuadratureFailure(
            f"power-mixture routes disagree: {phi} vs {phi_direct}")
    return MixtureCheck(psi=psi, phi=phi, phi_direct=phi_direct)


def gamma_integral(beta: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
    """int_0^inf x^beta e^-x dx by quadrature (substitution x = y^2)."""
    if beta <= -1.0:
        raise ValueError("beta must exceed -1")

    def integrand(y):
        return 2.0 * y ** (2.0 * beta + 1.0) * np.exp(-y * y)

    return integrate(integrand, 0.0, 30.0, cfg)


# ---------------------------------------------------------------------------
# sandwich between the two model series
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    t: float
    w_sq: float
    s_sq: float
    lower: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.s_sq <= self.upper


def check_series_sandwich(c: HermiteCoefficients, t, slack: float = 1e-9,
                          strict: bool = True):
    """Verify (1/12) W-series - (2/3)(a_1^2 + a_2^2) <= S-series <= 4 W-series + 2 a_1^2."""
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    w_sq = weight_sq(c, arr, "W", certify=False)
    s_sq = weight_sq(c, arr, "S", certify=False)
    a1, a2 = float(c.a[1]), float(c.a[2])
    lower = w_sq / 12.0 - (2.0 / 3.0) * (a1 ** 2 + a2 ** 2) - slack
    upper = 4.0 * w_sq + 2.0 * a1 ** 2 + slack
    reports = [SandwichReport(float(tt), float(w), float(s), float(lo), float(up))
               for tt, w, s, lo, up in zip(arr, w_sq, s_sq, lower, upper)]
    if strict:
        for r in reports:
            if not r.holds:
                raise NetoptError(
                    f"series sandwich violated at t={r.t}: "
                    f"{r.lower} <= {r.s_sq} <= {r.upper} fails")
    return reports[0] if scalar else reports
