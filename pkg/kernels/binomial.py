# kernels/binomial.py
import math

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from engine.errors import InputError


# ---------------- VALIDATION ----------------
def check_trials(n):
    if int(n) != n or n < 1:
        raise InputError(f"trial count must be a positive integer, got {n}")


def _check_prob(p, name="p"):
    if not (0.0 <= p <= 1.0):
        raise InputError(f"{name} must lie in [0, 1], got {p}")


# ---------------- SINGLE BINOMIAL ----------------
def log_binom_pmf(x, n, p):
    """log p_B(x, n, p) with the convention 0·log 0 = 0 (so p ∈ {0, 1} is exact)."""
    check_trials(n)
    _check_prob(p)
    if int(x) != x or not (0 <= x <= n):
        raise InputError(f"x must be an integer in [0, {n}], got {x}")
    return float(_log_pmf_array(np.asarray(x, dtype=float), n, p))


def _log_pmf_array(x, n, p):
    log_choose = gammaln(n + 1) - (gammaln(x + 1) + gammaln(n - x + 1))
    return log_choose + xlogy(x, p) + xlog1py(n - x, -p)


def binom_pmf_vector(n, p):
    """p_B(0..n, n, p) as an array; log space, exponentiated at the last step."""
    x = np.arange(n + 1, dtype=float)
    return np.exp(_log_pmf_array(x, n, p))


def binom_pmf_matrix(n, ps):
    """Rows are p_B(0..n, n, p) for each p in ``ps``."""
    ps = np.clip(np.asarray(ps, dtype=float), 0.0, 1.0)
    x = np.arange(n + 1, dtype=float)
    return np.exp(_log_pmf_array(x[None, :], n, ps[:, None]))


def binom_cdf(x, n, p):
    """P(X ≤ x); x = −1 gives 0. Summed directly from the lower end."""
    check_trials(n)
    _check_prob(p)
    if x < 0:
        return 0.0
    if x >= n:
        return 1.0
    pmf = binom_pmf_vector(n, p)
    return min(1.0, math.fsum(pmf[: int(x) + 1]))


def binom_sf(x, n, p):
    """P(X ≥ x) by direct tail summation, never by subtraction."""
    check_trials(n)
    _check_prob(p)
    if x <= 0:
        return 1.0
    if x > n:
        return 0.0
    pmf = binom_pmf_vector(n, p)
    return min(1.0, math.fsum(pmf[int(x):]))


def tail_vectors(n, p):
    """(P(X ≤ x), P(X ≥ x)) for every x in 0..n, each summed from its own small end."""
    pmf = binom_pmf_vector(n, p)
    lower = np.minimum(np.cumsum(pmf), 1.0)
    upper = np.minimum(np.cumsum(pmf[::-1])[::-1], 1.0)
    return lower, upper


# ---------------- MATCHED PAIRS ----------------
def mpair_cell_probs(d_m, p_t):
    """(p10, p_t, p01) for the reduced matched-pair trinomial."""
    p10 = (1.0 + d_m - p_t) / 2.0
    p01 = (1.0 - d_m - p_t) / 2.0
    return np.clip(p10, 0.0, 1.0), np.clip(p_t, 0.0, 1.0), np.clip(p01, 0.0, 1.0)


def _check_mpair_params(d_m, p_t):
    if not (-1.0 <= d_m <= 1.0):
        raise InputError(f"d_m must lie in [-1, 1], got {d_m}")
    if p_t < 0.0 or abs(d_m) + p_t > 1.0 + 1e-12:
        raise InputError(f"p_t must lie in [0, 1-|d_m|], got p_t={p_t}, d_m={d_m}")


def mpair_log_pmf(n10, t, n, d_m, p_t):
    """Vectorized log mass of (N10, T); n01 = n − n10 − t (trinomial reduction)."""
    n10 = np.asarray(n10, dtype=float)
    t = np.asarray(t, dtype=float)
    n01 = n - n10 - t
    p10, pt, p01 = mpair_cell_probs(d_m, p_t)
    log_coef = gammaln(n + 1) - gammaln(n10 + 1) - gammaln(t + 1) - gammaln(n01 + 1)
    return log_coef + xlogy(n10, p10) + xlogy(t, pt) + xlogy(n01, p01)


def mpair_pmf(n10, t, n, d_m, p_t):
    check_trials(n)
    _check_mpair_params(d_m, p_t)
    if min(n10, t) < 0 or n10 + t > n or int(n10) != n10 or int(t) != t:
        raise InputError(f"({n10}, {t}) is not in the reduced sample space for n={n}")
    return float(np.exp(mpair_log_pmf(n10, t, n, d_m, p_t)))
