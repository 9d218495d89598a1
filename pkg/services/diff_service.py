# services/diff_service.py
import logging

import numpy as np
from scipy.special import xlog1py, xlogy

from engine.errors import InputError
from engine.hfunction import check_alpha, h_eval, invert_all
from engine.models import FiniteModel, GridPolicy, HFunctionSpec, LimitsTable
from engine.optimizer import lane_sup
from kernels.binomial import binom_pmf_matrix, check_trials
from kernels.continuous import upper_z

logger = logging.getLogger(__name__)

EXACT_METHODS = ("lrt", "score")
BASELINE_METHODS = ("wald", "mle")


def nuisance_domain_d(d0):
    """D(d₀): the p₂ values with p₁ = p₂ + d₀ inside [0, 1]."""
    if not -1.0 <= d0 <= 1.0:
        raise InputError(f"d₀ must lie in [-1, 1], got {d0}")
    return max(0.0, -d0), min(1.0, 1.0 - d0)


# ---------------- MODEL ----------------
def sample_space_d(n1, n2):
    check_trials(n1)
    check_trials(n2)
    x, y = np.meshgrid(np.arange(n1 + 1), np.arange(n2 + 1), indexing="ij")
    return np.column_stack([x.ravel(), y.ravel()])


def build_diff_model(n1, n2):
    """Product binomial on S_d (x-major order), θ = d = p₁ − p₂, nuisance p₂ ∈ D(d)."""
    points = sample_space_d(n1, n2)

    def mass(d, p2s):
        pmf1 = binom_pmf_matrix(n1, p2s + d)
        pmf2 = binom_pmf_matrix(n2, p2s)
        return (pmf1[:, :, None] * pmf2[:, None, :]).reshape(len(p2s), -1)

    return FiniteModel(
        name="two-binomial",
        points=points,
        mass_fn=mass,
        theta_range=(-1.0, 1.0),
        nuisance_fn=nuisance_domain_d,
        monotone_in_theta=False,
        design={"design": "diff", "n1": n1, "n2": n2, "point_names": ["x", "y"]},
    )


# ---------------- CONSTRAINED MLE ----------------
def _loglik(x, y, n1, n2, p2, d0):
    p1 = np.clip(p2 + d0, 0.0, 1.0)
    p2 = np.clip(p2, 0.0, 1.0)
    return xlogy(x, p1) + xlog1py(n1 - x, -p1) + xlogy(y, p2) + xlog1py(n2 - y, -p2)


def constrained_mle_vector(x, y, d0, n1, n2, grid):
    """argmax over p₂ ∈ D(d₀) of the likelihood, for arrays of (x, y).

    Same grid and golden-section settings as the nuisance sup, with the
    polish always on; the log-likelihood is concave in p₂ so the best cell
    holds the maximum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = nuisance_domain_d(d0)
    if hi <= lo:
        return np.full(x.shape, lo)
    etas = np.linspace(lo, hi, grid.nuisance_points)
    values = _loglik(x[None, :], y[None, :], n1, n2, etas[:, None], d0)
    p2, _ = lane_sup(lambda p: _loglik(x, y, n1, n2, p, d0), etas, values, grid.golden_iterations)
    return p2


def constrained_mle_p2(x, y, d0, n1, n2, grid=None):
    _check_point(x, y, n1, n2)
    grid = grid or GridPolicy.from_config()
    return float(constrained_mle_vector(np.array([x]), np.array([y]), d0, n1, n2, grid)[0])


def _check_point(x, y, n1, n2):
    check_trials(n1)
    check_trials(n2)
    if not (0 <= x <= n1 and 0 <= y <= n2) or int(x) != x or int(y) != y:
        raise InputError(f"({x}, {y}) is not a sample point for (n1, n2) = ({n1}, {n2})")


# ---------------- STATISTICS ----------------
def lrt_statistic_d(n1, n2, grid):
    """log likelihood ratio (constrained over unconstrained) for every point of S_d."""
    pts = sample_space_d(n1, n2).astype(float)
    x, y = pts[:, 0], pts[:, 1]
    p1hat, p2hat = x / n1, y / n2
    log_sup = xlogy(x, p1hat) + xlog1py(n1 - x, -p1hat) + xlogy(y, p2hat) + xlog1py(n2 - y, -p2hat)

    def stat(d0):
        p2 = constrained_mle_vector(x, y, d0, n1, n2, grid)
        return np.minimum(_loglik(x, y, n1, n2, p2, d0) - log_sup, 0.0)

    return stat


def score_statistic_d(n1, n2, grid):
    """−|p̂₁ − p̂₂ − d₀| / √v̂ with v̂ from the constrained MLE.

    A zero numerator gives 0 (this covers the 0/0 points (n1, 0, 1) and
    (0, n2, −1)); a zero variance with a nonzero numerator gives −∞.
    """
    pts = sample_space_d(n1, n2).astype(float)
    x, y = pts[:, 0], pts[:, 1]
    diff = x / n1 - y / n2

    def stat(d0):
        p2 = constrained_mle_vector(x, y, d0, n1, n2, grid)
        p1 = np.clip(p2 + d0, 0.0, 1.0)
        var = p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2
        num = np.abs(diff - d0)
        num = np.where(num <= 1e-14, 0.0, num)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -num / np.sqrt(var)
        out = np.where(num == 0.0, 0.0, out)
        return np.where((var <= 0.0) & (num > 0.0), -np.inf, out)

    return stat


def _statistic_vector(stat, x, y, d0, n1, n2, grid):
    _check_point(x, y, n1, n2)
    nuisance_domain_d(d0)
    fn = lrt_statistic_d if stat == "lrt" else score_statistic_d
    return float(fn(n1, n2, grid)(d0)[x * (n2 + 1) + y])


def lrt_stat_d(x, y, d0, n1, n2, grid=None):
    return _statistic_vector("lrt", x, y, d0, n1, n2, grid or GridPolicy.from_config())


def score_stat_d(x, y, d0, n1, n2, grid=None):
    return _statistic_vector("score", x, y, d0, n1, n2, grid or GridPolicy.from_config())


def h_spec_d(n1, n2, method, grid):
    if method == "lrt":
        return HFunctionSpec(name="lrt", statistic=lrt_statistic_d(n1, n2, grid))
    if method == "score":
        return HFunctionSpec(name="score", statistic=score_statistic_d(n1, n2, grid))
    raise InputError(f"{method} is not an h-function method; expected one of {EXACT_METHODS}")


def h_d(stat, x, y, d0, n1, n2, grid=None):
    grid = grid or GridPolicy.from_config()
    return h_eval(build_diff_model(n1, n2), h_spec_d(n1, n2, stat, grid), (x, y), d0, grid)


# ---------------- INTERVALS ----------------
def exact_limits_d(n1, n2, alpha, method, grid=None, threads=None):
    grid = grid or GridPolicy.from_config()
    table, degenerate = invert_all(build_diff_model(n1, n2), h_spec_d(n1, n2, method, grid),
                                   alpha, grid, threads)
    if degenerate:
        logger.warning("%s (%d, %d): %d degenerate inversions", method, n1, n2, len(degenerate))
    return table


def _wald_arrays(x, y, n1, n2, alpha):
    p1, p2 = x / n1, y / n2
    half = upper_z(alpha / 2) * np.sqrt(p1 * (1 - p1) / n1 + p2 * (1 - p2) / n2)
    return p1 - p2 - half, p1 - p2 + half


def wald_interval_d(x, y, n1, n2, alpha):
    _check_point(x, y, n1, n2)
    check_alpha(alpha)
    lo, hi = _wald_arrays(float(x), float(y), n1, n2, alpha)
    return max(-1.0, float(lo)), min(1.0, float(hi))


def mle_point_d(x, y, n1, n2):
    _check_point(x, y, n1, n2)
    d = x / n1 - y / n2
    return d, d


def baseline_limits_d(n1, n2, alpha, method):
    """Wald (C_d3) or the MLE point (C_d4) at every point of S_d, unclipped."""
    check_alpha(alpha)
    pts = sample_space_d(n1, n2)
    x, y = pts[:, 0].astype(float), pts[:, 1].astype(float)
    if method == "wald":
        lower, upper = _wald_arrays(x, y, n1, n2, alpha)
    elif method == "mle":
        lower = x / n1 - y / n2
        upper = lower.copy()
    else:
        raise InputError(f"unknown baseline method {method}")
    return LimitsTable(
        points=pts,
        lower=lower,
        upper=upper,
        theta_range=(-1.0, 1.0),
        meta={"design": "diff", "n1": n1, "n2": n2, "alpha": alpha, "method": method,
              "point_names": ["x", "y"]},
    )


def diff_limits(n1, n2, alpha, method, grid=None, threads=None):
    if method in EXACT_METHODS:
        return exact_limits_d(n1, n2, alpha, method, grid, threads)
    return baseline_limits_d(n1, n2, alpha, method)


def complete_by_symmetry_d(limits, n1, n2):
    """U(x, y) := −L(n1 − x, n2 − y)."""
    pts = sample_space_d(n1, n2)
    lower = np.array([limits.interval_at(p)[0] for p in pts.tolist()])
    mirror = np.array([limits.interval_at((n1 - x, n2 - y))[0] for x, y in pts.tolist()])
    return LimitsTable(
        points=pts,
        lower=lower,
        upper=-mirror,
        theta_range=limits.theta_range,
        meta={**limits.meta, "completed": True},
    )
