# services/prop_service.py
import logging

import numpy as np
from scipy.special import xlog1py, xlogy

from engine.errors import InputError
from engine.hfunction import check_alpha, h_eval, invert_all
from engine.models import FiniteModel, GridPolicy, HFunctionSpec, LimitsTable
from kernels.binomial import binom_cdf, binom_pmf_matrix, binom_sf, check_trials, tail_vectors
from kernels.continuous import upper_z

logger = logging.getLogger(__name__)

EXACT_METHODS = ("cp", "blaker", "lrt")
BASELINE_METHODS = ("wald", "wilson", "sample_prop", "custom_point", "identity")


# ---------------- MODEL ----------------
def build_prop_model(n):
    check_trials(n)

    def mass(theta, etas):
        row = binom_pmf_matrix(n, [theta])
        return np.repeat(row, len(etas), axis=0)

    return FiniteModel(
        name="binomial",
        points=np.arange(n + 1),
        mass_fn=mass,
        theta_range=(0.0, 1.0),
        monotone_in_theta=True,
        design={"design": "prop", "n": n, "point_names": ["x"]},
    )


# ---------------- STATISTICS ----------------
def cp_closed_form(n):
    """h_p1(·, p₀) = min{2·min(P(X ≤ x), P(X ≥ x)), 1} for every x."""

    def h(p0):
        lower, upper = tail_vectors(n, p0)
        return np.minimum(2.0 * np.minimum(lower, upper), 1.0)

    return h


def blaker_statistic(n):
    def stat(p0):
        lower, upper = tail_vectors(n, p0)
        return np.minimum(lower, upper)

    return stat


def lrt_statistic(n):
    """log of (p₀/p̂)^x ((1−p₀)/(1−p̂))^(n−x); 0·log(·) terms vanish at x ∈ {0, n}."""
    x = np.arange(n + 1, dtype=float)
    phat = x / n
    log_sup = xlogy(x, phat) + xlog1py(n - x, -phat)

    def stat(p0):
        return xlogy(x, p0) + xlog1py(n - x, -p0) - log_sup

    return stat


def h_spec(n, method):
    if method == "cp":
        return HFunctionSpec(name="cp", closed_form=cp_closed_form(n))
    if method == "blaker":
        return HFunctionSpec(name="blaker", statistic=blaker_statistic(n))
    if method == "lrt":
        return HFunctionSpec(name="lrt", statistic=lrt_statistic(n))
    raise InputError(f"{method} is not an h-function method; expected one of {EXACT_METHODS}")


def _check_x(n, x):
    check_trials(n)
    if int(x) != x or not 0 <= x <= n:
        raise InputError(f"x must be an integer in [0, {n}], got {x}")


def cp_h(n, x, p0):
    _check_x(n, x)
    return min(2.0 * min(binom_cdf(x, n, p0), binom_sf(x, n, p0)), 1.0)


def blaker_h(n, x, p0, grid=None):
    _check_x(n, x)
    return h_eval(build_prop_model(n), h_spec(n, "blaker"), x, p0, grid or GridPolicy.from_config())


def lrt_h(n, x, p0, grid=None):
    _check_x(n, x)
    return h_eval(build_prop_model(n), h_spec(n, "lrt"), x, p0, grid or GridPolicy.from_config())


# ---------------- INTERVALS ----------------
def exact_limits(n, alpha, method, grid=None, threads=None):
    """C_p1 / C_p2 / C_p3 at every x by inverting the method's h-function."""
    grid = grid or GridPolicy.from_config()
    table, degenerate = invert_all(build_prop_model(n), h_spec(n, method), alpha, grid, threads)
    if degenerate:
        logger.warning("%s n=%d: %d degenerate inversions", method, n, len(degenerate))
    return table


def baseline_limits(n, alpha, method, values=None):
    """Closed-form baseline tables. Wald lower limits are kept unclipped (clip on report)."""
    check_trials(n)
    check_alpha(alpha)
    x = np.arange(n + 1, dtype=float)
    phat = x / n
    if method == "wald":
        half = upper_z(alpha / 2) * np.sqrt(phat * (1 - phat) / n)
        lower, upper = phat - half, phat + half
    elif method == "wilson":
        z = upper_z(alpha / 2)
        centre = (phat + z * z / (2 * n)) / (1 + z * z / n)
        half = z * np.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lower, upper = centre - half, centre + half
    elif method in ("sample_prop", "identity"):
        # identity keeps the order of X; the scale is irrelevant to the one-sided operators
        lower, upper = phat, phat.copy()
    elif method == "custom_point":
        if values is None or len(values) != n + 1:
            raise InputError(f"custom_point needs {n + 1} per-x values")
        lower = np.asarray(values, dtype=float)
        upper = lower.copy()
    else:
        raise InputError(f"unknown baseline method {method}")

    return LimitsTable(
        points=np.arange(n + 1),
        lower=lower,
        upper=upper,
        theta_range=(0.0, 1.0),
        meta={"design": "prop", "n": n, "alpha": alpha, "method": method, "point_names": ["x"]},
    )


def prop_limits(n, alpha, method, grid=None, threads=None, values=None):
    if method in EXACT_METHODS:
        return exact_limits(n, alpha, method, grid, threads)
    return baseline_limits(n, alpha, method, values)


# ---------------- SYMMETRY ----------------
def complete_by_symmetry(limits):
    """U(x) := 1 − L(n − x)."""
    n = len(limits) - 1
    lower = np.array([limits.interval_at(x)[0] for x in range(n + 1)])
    return LimitsTable(
        points=np.arange(n + 1),
        lower=lower,
        upper=1.0 - lower[::-1],
        theta_range=limits.theta_range,
        meta={**limits.meta, "completed": True},
    )


def nesting_holds(n, method="blaker", alphas=(0.10, 0.05), grid=None, threads=None):
    """True when the interval at the larger α sits inside the one at the smaller α at every x."""
    wide_alpha, narrow_alpha = sorted(alphas)
    wide = exact_limits(n, wide_alpha, method, grid, threads)
    narrow = exact_limits(n, narrow_alpha, method, grid, threads)
    return wide.contains(narrow, tol=1e-9)
