"""Nondecreasing weight functions H on [0, 1) and their cell integrals.

Every kind supports evaluation, the cumulative integral of H, the inverse of
that cumulative (mass quantiles), and the integrals entering the net error
functional:

* ``h2_mass(a, b)``        integral of H^2 over [a, b],
* ``weighted_mass(a, b)``  integral of (1-t) H^2 over [a, b],
* ``weighted_tail(t)``     integral of (1-t) H^2 over [t, 1),
* ``cell_error(a, b)``     integral of (b-t) H^2 over [a, b].

Closed forms are used for the constant, power and log-power families and for
tabulated step functions; everything else falls back to adaptive quadrature
under the substitution u = -log(1-t), where these families are slowly varying.
Divergent integrals are returned as ``math.inf``.  All values are immutable
after construction and every operation is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, MassOutOfRangeError
from .quadrature import (DEFAULT_QUAD, QuadratureConfig, integrate,
                         integrate_u, tail_to_one)

# evaluation beyond this point is refused: 1 - t underflows float64 soon after
DOMAIN_CAP = 1.0 - 1e-15
# absolute slack allowed when asserting monotonicity of series-backed kinds
MONOTONE_EPS = 1e-12


def _as_array(t):
    arr = np.asarray(t, dtype=float)
    return arr, arr.ndim == 0


class WeightFunction:
    """Base class; subclasses implement ``_eval`` on validated arrays."""

    kind = "abstract"
    domain_cap = DOMAIN_CAP

    # -- evaluation ---------------------------------------------------------

    def _eval(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _eval_w(self, t, w):
        """H given both t and the exact complement w = 1 - t.

        Singular kinds override this so integrals in u = -log(1-t)
        coordinates never reconstruct 1 - t from a rounded t.
        """
        return self._eval(np.asarray(t, dtype=float))

    def eval(self, t):
        """H(t) for 0 <= t < domain_cap (scalar or array)."""
        arr, scalar = _as_array(t)
        if np.any(arr < 0.0) or np.any(arr >= self.domain_cap):
            raise DomainError(
                f"{self.kind}: evaluation outside [0, {self.domain_cap})"
            )
        out = self._eval(arr)
        return float(out) if scalar else out

    __call__ = eval

    # -- mass (integral of H) ----------------------------------------------

    def cumulative(self, t: float) -> float:
        """Integral of H over [0, t]; t = 1 allowed (may return inf)."""
        if t < 0.0 or t > 1.0:
            raise DomainError("cumulative needs t in [0, 1]")
        if t == 0.0:
            return 0.0
        if t == 1.0:
            return tail_to_one(self._eval_w, 0.0)
        return integrate_u(self._eval_w, 0.0, t)

    def total_mass(self) -> float:
        cached = getattr(self, "_total_mass", None)
        if cached is None:
            cached = self.cumulative(1.0)
            object.__setattr__(self, "_total_mass", cached)
        return cached

    def inverse_cumulative(self, mass: float, rel_tol: float = 1e-12,
                           abs_tol: float = 1e-14) -> float:
        """t with cumulative(t) = mass, by bisection plus Newton polish."""
        total = self.total_mass()
        if mass < -abs_tol or (math.isfinite(total) and mass > total * (1 + 1e-12) + abs_tol):
            raise MassOutOfRangeError(f"mass {mass} outside [0, {total}]")
        if mass <= 0.0:
            return 0.0
        if math.isfinite(total) and mass >= total:
            return 1.0
        lo, hi = 0.0, self.domain_cap
        if not math.isfinite(total):
            # expand a finite bracket in u coordinates
            hi = 0.5
            while self.cumulative(hi) < mass and hi < self.domain_cap:
                hi = min(1.0 - (1.0 - hi) * (1.0 - hi), self.domain_cap)
            if self.cumulative(hi) < mass:
                raise MassOutOfRangeError(
                    f"mass {mass} not reachable below the domain cap")
        f_lo = -mass
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = self.cumulative(mid) - mass
            if abs(f_mid) <= rel_tol * mass + abs_tol:
                return mid
            if (f_mid < 0.0) == (f_lo < 0.0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * max(1.0, hi):
                break
            # Newton polish once the bracket is tight
            if hi - lo < 1e-6:
                h_mid = float(self._eval(np.asarray(mid)))
                if h_mid > 0.0:
                    newt = mid - f_mid / h_mid
                    if lo < newt < hi:
                        f_newt = self.cumulative(newt) - mass
                        if abs(f_newt) <= rel_tol * mass + abs_tol:
                            return newt
                        if (f_newt < 0.0) == (f_lo < 0.0):
                            lo, f_lo = newt, f_newt
                        else:
                            hi = newt
        return 0.5 * (lo + hi)

    # -- squared-weight integrals --------------------------------------------

    def h2_mass(self, a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
        """Integral of H^2 over [a, b], b < 1."""
        return integrate_u(lambda t, w: self._eval_w(t, w) ** 2, a, b, cfg)

    def weighted_mass(self, a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
        """Integral of (1-t) H^2 over [a, b]."""
        if b >= 1.0:
            return self.weighted_tail(a, cfg)
        return integrate_u(lambda t, w: w * self._eval_w(t, w) ** 2, a, b, cfg)

    def weighted_tail(self, t: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
        """Integral of (1-s) H^2 over [t, 1); inf when divergent."""
        return tail_to_one(lambda s, w: w * self._eval_w(s, w) ** 2, t, cfg)

    def cell_error(self, a: float, b: float, cfg: QuadratureConfig = DEFAULT_QUAD) -> float:
        """Integral of (b-t) H^2 over [a, b]; inf when b = 1 and divergent."""
        if not 0.0 <= a < b <= 1.0:
            raise DomainError("cell_error needs 0 <= a < b <= 1")
        if b >= 1.0:
            return self.weighted_tail(a, cfg)
        value = self.weighted_mass(a, b, cfg) - (1.0 - b) * self.h2_mass(a, b, cfg)
        return max(value, 0.0)

    # -- vectorized helpers used by the grid optimizer -----------------------

    def h2_mass_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.array([self.h2_mass(x, y) for x, y in zip(a, b)])

    def interval_h2(self, edges: np.ndarray) -> np.ndarray:
        return self.h2_mass_many(edges[:-1], edges[1:])

    def interval_weighted(self, edges: np.ndarray) -> np.ndarray:
        return np.array([self.weighted_mass(edges[i], edges[i + 1])
                         for i in range(len(edges) - 1)])

    def tail_vector(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.weighted_tail(p) for p in points])

    def cell_error_many(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.array([self.cell_error(x, y) for x, y in zip(a, b)])

    # -- description ----------------------------------------------------------

    def spec_string(self) -> str:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec_string()}>"


# ---------------------------------------------------------------------------
# concrete kinds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantWeight(WeightFunction):
    """H(t) = c."""

    c: float
    kind = "const"
    domain_cap = DOMAIN_CAP

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("constant weight must be nonnegative")

    def _eval(self, t):
        return np.full_like(t, self.c, dtype=float)

    def cumulative(self, t):
        if t < 0.0 or t > 1.0:
            raise DomainError("cumulative needs t in [0, 1]")
        return self.c * t

    def inverse_cumulative(self, mass, rel_tol=1e-12, abs_tol=1e-14):
        if mass < -abs_tol or mass > self.c + abs_tol:
            raise MassOutOfRangeError(f"mass {mass} outside [0, {self.c}]")
        if self.c == 0.0:
            if mass > abs_tol:
                raise MassOutOfRangeError("zero weight has no positive mass")
            return 0.0
        return min(max(mass / self.c, 0.0), 1.0)

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        return self.c ** 2 * (b - a)

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        return 0.5 * self.c ** 2 * ((1.0 - a) ** 2 - (1.0 - b) ** 2)

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        return 0.5 * self.c ** 2 * (1.0 - t) ** 2

    def cell_error(self, a, b, cfg=DEFAULT_QUAD):
        if not 0.0 <= a < b <= 1.0:
            raise DomainError("cell_error needs 0 <= a < b <= 1")
        return 0.5 * self.c ** 2 * (b - a) ** 2

    def interval_h2(self, edges):
        return self.c ** 2 * np.diff(edges)

    def interval_weighted(self, edges):
        return 0.5 * self.c ** 2 * ((1.0 - edges[:-1]) ** 2 - (1.0 - edges[1:]) ** 2)

    def tail_vector(self, points):
        return 0.5 * self.c ** 2 * (1.0 - np.asarray(points)) ** 2

    def cell_error_many(self, a, b):
        return 0.5 * self.c ** 2 * (np.asarray(b) - np.asarray(a)) ** 2

    def spec_string(self):
        return f"const:c={self.c!r}"


@dataclass(frozen=True)
class PowerWeight(WeightFunction):
    """H(t) = sqrt((2-theta) (1-t)^-theta), theta in [1, 2).

    Integrable (total mass 2/sqrt(2-theta)) while H^2 is not; the weighted
    tail (1-t)H^2 stays integrable for theta < 2.
    """

    theta: float
    kind = "power"
    domain_cap = DOMAIN_CAP

    def __post_init__(self):
        if not 1.0 <= self.theta < 2.0:
            raise ValueError("theta must lie in [1, 2)")

    def _eval(self, t):
        return np.sqrt((2.0 - self.theta) * (1.0 - t) ** (-self.theta))

    def _eval_w(self, t, w):
        return np.sqrt((2.0 - self.theta) * np.asarray(w) ** (-self.theta))

    def cumulative(self, t):
        if t < 0.0 or t > 1.0:
            raise DomainError("cumulative needs t in [0, 1]")
        ex = 1.0 - 0.5 * self.theta
        return (2.0 / math.sqrt(2.0 - self.theta)) * (1.0 - (1.0 - t) ** ex)

    def inverse_cumulative(self, mass, rel_tol=1e-12, abs_tol=1e-14):
        total = self.total_mass()
        if mass < -abs_tol or mass > total + abs_tol:
            raise MassOutOfRangeError(f"mass {mass} outside [0, {total}]")
        base = 1.0 - mass * math.sqrt(2.0 - self.theta) / 2.0
        if base <= 0.0:
            return 1.0
        return min(max(1.0 - base ** (2.0 / (2.0 - self.theta)), 0.0), 1.0)

    def _h2_antiderivative_gap(self, a, b):
        # integral of (1-t)^-theta over [a, b]
        if self.theta == 1.0:
            return math.log((1.0 - a) / (1.0 - b))
        p = 1.0 - self.theta
        return ((1.0 - b) ** p - (1.0 - a) ** p) / (self.theta - 1.0)

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        return (2.0 - self.theta) * self._h2_antiderivative_gap(a, b)

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        p = 2.0 - self.theta
        return (1.0 - a) ** p - (1.0 - b) ** p

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        return (1.0 - t) ** (2.0 - self.theta)

    def cell_error(self, a, b, cfg=DEFAULT_QUAD):
        if not 0.0 <= a < b <= 1.0:
            raise DomainError("cell_error needs 0 <= a < b <= 1")
        if b >= 1.0:
            return self.weighted_tail(a)
        return max(self.weighted_mass(a, b)
                   - (1.0 - b) * self.h2_mass(a, b), 0.0)

    def interval_h2(self, edges):
        e = np.asarray(edges)
        if self.theta == 1.0:
            gaps = np.log((1.0 - e[:-1]) / (1.0 - e[1:]))
        else:
            p = 1.0 - self.theta
            gaps = ((1.0 - e[1:]) ** p - (1.0 - e[:-1]) ** p) / (self.theta - 1.0)
        return (2.0 - self.theta) * gaps

    def interval_weighted(self, edges):
        e = np.asarray(edges)
        p = 2.0 - self.theta
        return (1.0 - e[:-1]) ** p - (1.0 - e[1:]) ** p

    def tail_vector(self, points):
        return (1.0 - np.asarray(points)) ** (2.0 - self.theta)

    def cell_error_many(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        p = 2.0 - self.theta
        wm = (1.0 - a) ** p - (1.0 - b) ** p
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.theta == 1.0:
                h2 = np.log((1.0 - a) / (1.0 - b))
            else:
                q = 1.0 - self.theta
                h2 = ((1.0 - b) ** q - (1.0 - a) ** q) / (self.theta - 1.0)
            out = wm - (1.0 - b) * (2.0 - self.theta) * h2
        out = np.where(b >= 1.0, (1.0 - a) ** p, out)
        return np.maximum(out, 0.0)

    def spec_string(self):
        return f"power:theta={self.theta!r}"


def _u_of(t):
    with np.errstate(divide="ignore"):
        return 1.0 - np.log1p(-np.asarray(t, dtype=float))


_GL32 = None


def _gl32():
    global _GL32
    if _GL32 is None:
        _GL32 = np.polynomial.legendre.leggauss(32)
    return _GL32


@dataclass(frozen=True)
class LogPowerWeight(WeightFunction):
    """H(t) = c1 (1 - log(1-t))^-alpha / (1-t), alpha in (1/2, 1).

    Not integrable, but (1-t)H^2 has the closed tail
    c1^2 u^(1-2 alpha) / (2 alpha - 1) with u = 1 - log(1-t).
    """

    alpha: float
    c1: float = 1.0
    kind = "logpow"
    domain_cap = DOMAIN_CAP

    def __post_init__(self):
        if not 0.5 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (1/2, 1)")
        if self.c1 <= 0:
            raise ValueError("c1 must be positive")

    def _eval(self, t):
        u = _u_of(t)
        return self.c1 * u ** (-self.alpha) / (1.0 - t)

    def _eval_w(self, t, w):
        w = np.asarray(w, dtype=float)
        return self.c1 * (1.0 - np.log(w)) ** (-self.alpha) / w

    def cumulative(self, t):
        if t < 0.0 or t > 1.0:
            raise DomainError("cumulative needs t in [0, 1]")
        if t == 1.0:
            return math.inf
        u = 1.0 - math.log1p(-t)
        return self.c1 * (u ** (1.0 - self.alpha) - 1.0) / (1.0 - self.alpha)

    def inverse_cumulative(self, mass, rel_tol=1e-12, abs_tol=1e-14):
        if mass < -abs_tol:
            raise MassOutOfRangeError("mass must be nonnegative")
        if mass <= 0.0:
            return 0.0
        u = (1.0 + mass * (1.0 - self.alpha) / self.c1) ** (1.0 / (1.0 - self.alpha))
        return -math.expm1(1.0 - u)

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        return float(self.h2_mass_many(np.asarray([a]), np.asarray([b]))[0])

    def h2_mass_many(self, a, b):
        # integral of c1^2 u^(-2 alpha) e^(u-1) du has no elementary form;
        # composite fixed-order Gauss-Legendre in u (analytic integrand) is
        # accurate to ~1e-15 relative with panels of length <= 8
        u_a = _u_of(a)
        u_b = _u_of(b)
        width = u_b - u_a
        panels = np.maximum(np.ceil(width / 8.0).astype(int), 1)
        two_a = 2.0 * self.alpha
        out = np.zeros_like(width)
        nodes, weights = _gl32()
        for npan in np.unique(panels):
            sel = panels == npan
            ua, ub = u_a[sel], u_b[sel]
            step = (ub - ua) / npan
            acc = np.zeros(ua.shape)
            for p in range(npan):
                lo = ua + p * step
                mid = lo + 0.5 * step
                half = 0.5 * step
                uu = mid[:, None] + half[:, None] * nodes
                acc += half * np.sum(weights * uu ** (-two_a) * np.exp(uu - 1.0), axis=1)
            out[sel] = acc
        return self.c1 ** 2 * out

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        if b >= 1.0:
            return self.weighted_tail(a)
        u_a = 1.0 - math.log1p(-a)
        u_b = 1.0 - math.log1p(-b)
        p = 1.0 - 2.0 * self.alpha
        return self.c1 ** 2 * (u_a ** p - u_b ** p) / (2.0 * self.alpha - 1.0)

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        u = 1.0 - math.log1p(-t)
        return self.c1 ** 2 * u ** (1.0 - 2.0 * self.alpha) / (2.0 * self.alpha - 1.0)

    def interval_weighted(self, edges):
        u = _u_of(edges)
        p = 1.0 - 2.0 * self.alpha
        return self.c1 ** 2 * (u[:-1] ** p - u[1:] ** p) / (2.0 * self.alpha - 1.0)

    def tail_vector(self, points):
        u = _u_of(points)
        return self.c1 ** 2 * u ** (1.0 - 2.0 * self.alpha) / (2.0 * self.alpha - 1.0)

    def cell_error_many(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        u_a, u_b = _u_of(a), _u_of(b)
        p = 1.0 - 2.0 * self.alpha
        wm = self.c1 ** 2 * (u_a ** p - u_b ** p) / (2.0 * self.alpha - 1.0)
        interior = b < 1.0
        out = np.empty_like(wm)
        out[~interior] = self.c1 ** 2 * u_a[~interior] ** p / (2.0 * self.alpha - 1.0)
        if np.any(interior):
            h2 = self.h2_mass_many(a[interior], b[interior])
            out[interior] = wm[interior] - (1.0 - b[interior]) * h2
        return np.maximum(out, 0.0)

    def spec_string(self):
        return f"logpow:alpha={self.alpha!r},c={self.c1!r}"


@dataclass(frozen=True)
class TabulatedWeight(WeightFunction):
    """Nondecreasing step function from sorted samples.

    Each sample's value extends to the next breakpoint: H(t) = values[i] on
    [breaks[i], breaks[i+1]) and on [breaks[-1], 1) for the last piece.  All
    integrals are exact piecewise sums.
    """

    breaks: np.ndarray
    values: np.ndarray
    kind = "tabulated"
    domain_cap = DOMAIN_CAP

    def __post_init__(self):
        br = np.asarray(self.breaks, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if br.ndim != 1 or br.shape != vals.shape or br.size < 1:
            raise ValueError("breaks and values must be matching 1-d arrays")
        if br[0] != 0.0 or br[-1] >= 1.0 or np.any(np.diff(br) <= 0):
            raise ValueError("breaks must be strictly increasing from 0 into [0, 1)")
        if np.any(vals < 0) or np.any(np.diff(vals) < 0):
            raise ValueError("values must be nonnegative and nondecreasing")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "values", vals)

    def _eval(self, t):
        idx = np.searchsorted(self.breaks, t, side="right") - 1
        return self.values[np.maximum(idx, 0)]

    def _piece_edges(self):
        return np.append(self.breaks, 1.0)

    def cumulative(self, t):
        if t < 0.0 or t > 1.0:
            raise DomainError("cumulative needs t in [0, 1]")
        edges = self._piece_edges()
        hi = np.minimum(edges[1:], t)
        lo = edges[:-1]
        return float(np.sum(self.values * np.clip(hi - lo, 0.0, None)))

    def inverse_cumulative(self, mass, rel_tol=1e-12, abs_tol=1e-14):
        total = self.total_mass()
        if mass < -abs_tol or mass > total + abs_tol:
            raise MassOutOfRangeError(f"mass {mass} outside [0, {total}]")
        mass = min(max(mass, 0.0), total)
        edges = self._piece_edges()
        widths = np.diff(edges)
        cum = np.concatenate([[0.0], np.cumsum(self.values * widths)])
        i = int(np.searchsorted(cum, mass, side="left"))
        if i == 0:
            return 0.0
        i -= 1
        if self.values[i] == 0.0:
            return float(edges[i + 1]) if mass > cum[i] else float(edges[i])
        return float(edges[i] + (mass - cum[i]) / self.values[i])

    def _overlaps(self, a, b):
        edges = self._piece_edges()
        lo = np.clip(edges[:-1], a, b)
        hi = np.clip(edges[1:], a, b)
        return lo, hi

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        lo, hi = self._overlaps(a, b)
        return float(np.sum(self.values ** 2 * (hi - lo)))

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        lo, hi = self._overlaps(a, b)
        return float(np.sum(0.5 * self.values ** 2 * ((1 - lo) ** 2 - (1 - hi) ** 2)))

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        return self.weighted_mass(t, 1.0)

    def cell_error(self, a, b, cfg=DEFAULT_QUAD):
        if not 0.0 <= a < b <= 1.0:
            raise DomainError("cell_error needs 0 <= a < b <= 1")
        lo, hi = self._overlaps(a, b)
        return float(np.sum(0.5 * self.values ** 2 * ((b - lo) ** 2 - (b - hi) ** 2)))

    def spec_string(self):
        bs = ";".join(repr(float(x)) for x in self.breaks)
        vs = ";".join(repr(float(x)) for x in self.values)
        return f"tab:breaks={bs},values={vs}"


@dataclass(frozen=True)
class HermiteSeriesWeight(WeightFunction):
    """H(t) = sqrt(sum_k series[k] t^k) for a nonnegative coefficient array.

    Backs weights derived from truncated Hermite expansions: the series is the
    exact squared weight of the truncation, so evaluation and all integrals
    are polynomial identities.  ``domain_cap`` may be tightened by the caller
    when the truncation models an infinite series (tail certification).
    """

    series: np.ndarray
    label: str = ""
    cap: float = DOMAIN_CAP

    kind = "hermite"

    def __post_init__(self):
        s = np.asarray(self.series, dtype=float)
        if s.ndim != 1 or s.size < 1 or np.any(s < 0):
            raise ValueError("series must be a nonnegative 1-d coefficient array")
        object.__setattr__(self, "series", s)
        object.__setattr__(self, "domain_cap", min(self.cap, DOMAIN_CAP))

    def _poly(self, t, shift):
        k = np.arange(self.series.size, dtype=float)
        coef = self.series / (k + shift)
        t = np.asarray(t, dtype=float)
        powers = t[..., None] ** (k + shift)
        return np.sum(coef * powers, axis=-1)

    def _eval(self, t):
        val = np.polynomial.polynomial.polyval(np.asarray(t, dtype=float), self.series)
        return np.sqrt(np.maximum(val, 0.0))

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        return float(self._poly(b, 1.0) - self._poly(a, 1.0))

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        if b >= 1.0:
            return self.weighted_tail(a)
        upper = self._poly(b, 1.0) - self._poly(b, 2.0)
        lower = self._poly(a, 1.0) - self._poly(a, 2.0)
        return float(upper - lower)

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        # per-term (1 - t^(k+1))/(k+1) - (1 - t^(k+2))/(k+2), each nonnegative
        k = np.arange(self.series.size, dtype=float)
        if t <= 0.0:
            terms = 1.0 / (k + 1.0) - 1.0 / (k + 2.0)
        else:
            log_t = math.log(t)
            one_m1 = -np.expm1((k + 1.0) * log_t)
            one_m2 = -np.expm1((k + 2.0) * log_t)
            terms = one_m1 / (k + 1.0) - one_m2 / (k + 2.0)
        return float(np.sum(self.series * terms))

    def tail_vector(self, points):
        return np.array([self.weighted_tail(p) for p in points])

    def h2_mass_many(self, a, b):
        return np.asarray(self._poly(np.asarray(b), 1.0)
                          - self._poly(np.asarray(a), 1.0))

    def cell_error_many(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        interior = b < 1.0
        out = np.empty_like(a)
        out[~interior] = [self.weighted_tail(x) for x in a[~interior]]
        if np.any(interior):
            ai, bi = a[interior], b[interior]
            wm = (self._poly(bi, 1.0) - self._poly(bi, 2.0)
                  - self._poly(ai, 1.0) + self._poly(ai, 2.0))
            out[interior] = wm - (1.0 - bi) * self.h2_mass_many(ai, bi)
        return np.maximum(out, 0.0)

    def spec_string(self):
        return self.label or f"hermite-series:terms={self.series.size}"


@dataclass(frozen=True)
class ShiftedWeight(WeightFunction):
    """H(t) = base(t) + delta, delta >= 0."""

    base: WeightFunction
    delta: float
    kind = "shift"

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        object.__setattr__(self, "domain_cap", self.base.domain_cap)

    def _eval(self, t):
        return self.base._eval(t) + self.delta

    def _eval_w(self, t, w):
        return self.base._eval_w(t, w) + self.delta

    def cumulative(self, t):
        base = self.base.cumulative(t)
        return base + self.delta * t

    def h2_mass(self, a, b, cfg=DEFAULT_QUAD):
        cross = self.base.cumulative(b) - self.base.cumulative(a)
        return (self.base.h2_mass(a, b, cfg)
                + 2.0 * self.delta * cross
                + self.delta ** 2 * (b - a))

    def weighted_mass(self, a, b, cfg=DEFAULT_QUAD):
        if b >= 1.0:
            return self.weighted_tail(a, cfg)
        cross = integrate_u(lambda t, w: w * self.base._eval_w(t, w), a, b, cfg)
        return (self.base.weighted_mass(a, b, cfg)
                + 2.0 * self.delta * cross
                + 0.5 * self.delta ** 2 * ((1 - a) ** 2 - (1 - b) ** 2))

    def weighted_tail(self, t, cfg=DEFAULT_QUAD):
        base_tail = self.base.weighted_tail(t, cfg)
        if math.isinf(base_tail):
            return math.inf
        cross = tail_to_one(lambda s, w: w * self.base._eval_w(s, w), t, cfg)
        if math.isinf(cross):
            return math.inf
        return base_tail + 2.0 * self.delta * cross + 0.5 * self.delta ** 2 * (1 - t) ** 2

    def spec_string(self):
        return f"shift:delta={self.delta!r},base=({self.base.spec_string()})"


# ---------------------------------------------------------------------------
# monotone envelope and utilities
# ---------------------------------------------------------------------------

def monotone_envelope(fn: Callable, grid_size: int, t_max: float = DOMAIN_CAP) -> TabulatedWeight:
    """Running-maximum envelope of an arbitrary evaluable function.

    Samples fn on a uniform grid of ``grid_size`` points in [0, t_max) and
    returns the step-function envelope sup_{s <= t} fn(s), which satisfies the
    monotonicity invariant exactly.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    ts = np.linspace(0.0, t_max, grid_size, endpoint=False)
    try:
        vals = np.asarray(fn(ts), dtype=float)
        if vals.shape != ts.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(fn(t)) for t in ts])
    if not np.all(np.isfinite(vals)):
        raise DomainError("envelope input produced non-finite values")
    if np.any(vals < 0.0):
        raise DomainError("envelope input must be nonnegative")
    return TabulatedWeight(ts, np.maximum.accumulate(vals))


def is_nondecreasing(h: WeightFunction, grid_size: int = 257,
                     eps: float = MONOTONE_EPS) -> bool:
    """Check the monotonicity invariant on a uniform grid up to domain_cap."""
    ts = np.linspace(0.0, h.domain_cap, grid_size, endpoint=False)
    vals = h.eval(ts)
    return bool(np.all(np.diff(vals) >= -eps))


# ---------------------------------------------------------------------------
# text spec parsing:  kind ':' key=value[,key=value...] with '(...)' nesting
# ---------------------------------------------------------------------------

def _split_top_level(s: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ValueError(f"unbalanced parentheses in {s!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError(f"unbalanced parentheses in {s!r}")
    parts.append("".join(cur))
    return parts


def _parse_kv(body: str) -> dict[str, str]:
    out = {}
    for part in _split_top_level(body):
        if not part:
            continue
        key, _, value = part.partition("=")
        if not _:
            raise ValueError(f"expected key=value, got {part!r}")
        out[key.strip()] = value.strip()
    return out


def parse_weight_spec(spec: str) -> WeightFunction:
    """Parse the textual weight description accepted everywhere.

    Examples: ``const:c=2``, ``power:theta=1.5``, ``logpow:alpha=0.75,c=1``,
    ``hermite:alpha=0.75,model=W,terms=5000``,
    ``shift:delta=1,base=(power:theta=1.5)``.
    """
    spec = spec.strip()
    kind, sep, body = spec.partition(":")
    if not sep:
        raise ValueError(f"weight spec needs 'kind:...', got {spec!r}")
    kv = _parse_kv(body)
    kind = kind.strip().lower()
    if kind == "const":
        return ConstantWeight(float(kv["c"]))
    if kind == "power":
        return PowerWeight(float(kv["theta"]))
    if kind == "logpow":
        return LogPowerWeight(float(kv["alpha"]), float(kv.get("c", 1.0)))
    if kind == "hermite":
        from . import hermite  # deferred: hermite imports this module

        coeffs = hermite.log_decay_coeffs(float(kv["alpha"]),
                                          int(kv.get("terms", 5000)))
        return hermite.as_weightfunction(coeffs, kv.get("model", "W"))
    if kind == "shift":
        base = kv["base"]
        if not (base.startswith("(") and base.endswith(")")):
            raise ValueError("shift base must be parenthesized")
        return ShiftedWeight(parse_weight_spec(base[1:-1]), float(kv["delta"]))
    if kind == "tab":
        breaks = [float(x) for x in kv["breaks"].split(";")]
        values = [float(x) for x in kv["values"].split(";")]
        return TabulatedWeight(np.asarray(breaks), np.asarray(values))
    raise ValueError(f"unknown weight kind {kind!r}")
