# services/gauss_service.py
"""Closed-form normal-mean cases: the a·x̄ + b point-estimator family, the
refined box interval, the one-sided t modification and the lower limit of a
stochastically ordered family."""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from engine.errors import InputError
from kernels.continuous import std_normal_cdf, std_normal_quantile, std_normal_sf, t_cdf, upper_t, upper_z

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianSpec:
    n: int
    sigma: float = 1.0
    alpha: float = 0.05
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise InputError(f"n must be at least 1, got {self.n}")
        if self.sigma <= 0:
            raise InputError(f"σ must be positive, got {self.sigma}")
        if not 0 < self.alpha < 1:
            raise InputError(f"α must lie in (0, 1), got {self.alpha}")

    @property
    def se(self):
        return self.sigma / math.sqrt(self.n)


@dataclass(frozen=True)
class GaussInterval:
    lower: float
    upper: float
    case: str
    levels: Optional[tuple] = None


@dataclass(frozen=True)
class TModification:
    keep: bool
    threshold: float

    @property
    def case(self):
        return "keep" if self.keep else "whole-line"

    def interval(self, xbar, s, n, c):
        if not self.keep:
            return GaussInterval(-math.inf, math.inf, self.case)
        return GaussInterval(xbar + c * s / math.sqrt(n), math.inf, self.case)


# ---------------- a·x̄ + b ESTIMATOR ----------------
def h_zab(xbar, mu0, spec):
    if spec.a <= 0:
        raise InputError(f"a must be positive, got {spec.a}")
    a, b, se = spec.a, spec.b, spec.se
    u = ((2 - a) * mu0 - 2 * b - a * xbar) / (a * se)
    v = (xbar - mu0) / se
    if mu0 >= a * xbar + b:
        h = std_normal_sf(u) + std_normal_cdf(v)
    else:
        h = std_normal_sf(v) + std_normal_cdf(u)
    return float(min(h, 1.0))


def _flank_root(f, mode, direction, scale, xtol):
    """Root of f on one side of ``mode`` (f(mode) > 0), bracket grown geometrically."""
    step = scale
    far = mode + direction * step
    while f(far) > 0:
        step *= 2
        far = mode + direction * step
        if step > 1e12 * scale:
            raise InputError("flank root bracket did not close")
    near = far - direction * step / 2 if step > scale else mode
    lo, hi = sorted((near, far))
    return brentq(f, lo, hi, xtol=xtol)


def c_zab(xbar, spec):
    """hull{μ₀ : h_zab(x̄, μ₀) > α} with its case label."""
    if spec.a <= 0:
        raise InputError(f"a must be positive, got {spec.a}")
    a, b, se, alpha = spec.a, spec.b, spec.se, spec.alpha
    if a > 2:
        return GaussInterval(-math.inf, math.inf, "i")
    if a < 2:
        mode = a * xbar + b
        f = lambda mu0: h_zab(xbar, mu0, spec) - alpha
        lower = _flank_root(f, mode, -1, se, 1e-10 * se)
        upper = _flank_root(f, mode, +1, se, 1e-10 * se)
        return GaussInterval(lower, upper, "ii")

    z = upper_z(alpha)
    tail = std_normal_cdf(-(b + xbar) / se)
    if xbar > z * se - b:
        return GaussInterval(xbar - se * std_normal_quantile(1 - alpha + tail), math.inf, "iii-1")
    if xbar >= -z * se - b:
        return GaussInterval(-math.inf, math.inf, "iii-2")
    return GaussInterval(-math.inf, xbar - se * std_normal_quantile(alpha - 1 + tail), "iii-3")


# ---------------- REFINED BOX INTERVAL ----------------
def h_box(delta, a, b):
    """h₀ of the box [x̄ − a·σ/√n, x̄ + b·σ/√n] at δ = √n(μ₀ − x̄)/σ."""
    k = a - b
    if delta <= -k / 2:
        return float(std_normal_sf(max(k / 2, -delta)) + std_normal_cdf(min(k / 2, k + delta)))
    return float(std_normal_sf(max(k / 2, delta + k)) + std_normal_cdf(min(k / 2, -delta)))


def refine_box(xbar, a, b, spec):
    """C₀^M of the box interval: x̄ + c_i·σ/√n with Φ(c₁) + (1 − Φ(c₂)) = α."""
    alpha = spec.alpha
    z_half = upper_z(alpha / 2)
    if a < z_half - 1e-12 or b < z_half - 1e-12:
        raise InputError(f"a and b must be at least z_(α/2) = {z_half:.6f}, got a={a}, b={b}")
    mode = (b - a) / 2
    f = lambda d: h_box(d, a, b) - alpha
    c1 = _flank_root(f, mode, -1, 1.0, 1e-13)
    c2 = _flank_root(f, mode, +1, 1.0, 1e-13)
    levels = (float(std_normal_cdf(c1)), float(std_normal_sf(c2)))
    return GaussInterval(xbar + c1 * spec.se, xbar + c2 * spec.se, "box", levels)


# ---------------- ONE-SIDED t ----------------
def t_h_lower(xbar, s, mu0, c, n):
    """h_1l of [x̄ + c·s/√n, ∞) after the sup over σ."""
    if mu0 > xbar + c * s / math.sqrt(n):
        return 1.0
    return float(1.0 - t_cdf(-c, n - 1))


def one_sided_t_modify(c, n, alpha):
    if n < 2:
        raise InputError(f"n must be at least 2, got {n}")
    threshold = -upper_t(alpha, n - 1)
    return TModification(keep=c <= threshold, threshold=threshold)


# ---------------- STOCHASTICALLY ORDERED FAMILY ----------------
def stochastic_lower(cdf, x, alpha, theta_range, scan_points=101, tol=1e-12):
    """inf{θ₀ : 1 − F(x − 1, θ₀) > α} for a family with F nonincreasing in θ."""
    lo, hi = theta_range
    g = lambda theta: 1.0 - cdf(x - 1, theta)
    scanned = np.array([g(th) for th in np.linspace(lo, hi, scan_points)])
    if np.any(np.diff(scanned) < -1e-12):
        raise InputError(f"F(x-1, θ) is not nonincreasing in θ at x={x}")
    if g(lo) > alpha:
        return float(lo)
    if g(hi) <= alpha:
        raise InputError(f"1 - F(x-1, θ) never exceeds α={alpha} on [{lo}, {hi}]")
    inside, outside = hi, lo
    while inside - outside > tol:
        mid = 0.5 * (inside + outside)
        if g(mid) > alpha:
            inside = mid
        else:
            outside = mid
    return float(inside)
