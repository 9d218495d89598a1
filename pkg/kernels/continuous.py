# kernels/continuous.py
from scipy import stats

from engine.errors import InputError


def _check_level(q):
    if not (0.0 < q < 1.0):
        raise InputError(f"quantile level must lie strictly inside (0, 1), got {q}")


def _check_df(df):
    if df < 1:
        raise InputError(f"degrees of freedom must be at least 1, got {df}")


# ---------------- STANDARD NORMAL ----------------
def std_normal_cdf(z):
    return stats.norm.cdf(z)


def std_normal_sf(z):
    return stats.norm.sf(z)


def std_normal_quantile(q):
    _check_level(q)
    return float(stats.norm.ppf(q))


def upper_z(alpha):
    """z_α, the upper α-th percentile."""
    _check_level(alpha)
    return float(stats.norm.isf(alpha))


# ---------------- STUDENT T ----------------
def t_cdf(x, df):
    _check_df(df)
    return stats.t.cdf(x, df)


def t_quantile(q, df):
    _check_level(q)
    _check_df(df)
    return float(stats.t.ppf(q, df))


def upper_t(alpha, df):
    """t_{α,df}, the upper α-th percentile."""
    _check_level(alpha)
    _check_df(df)
    return float(stats.t.isf(alpha, df))
