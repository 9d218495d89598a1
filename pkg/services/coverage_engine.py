# services/coverage_engine.py
"""Scoring of limits tables: infimum coverage probability (ICP) and total
interval length (TIL).

ICP is evaluated on the rounded, clipped table so the reported guarantee
survives reporting; TIL is the sum of the raw, unclipped lengths.
"""
import logging
import warnings

import numpy as np

import config
from engine.errors import InputError, MonotonicityWarning
from engine.models import CoverageReport
from engine.parallel import parallel_map
from kernels.binomial import binom_pmf_matrix, mpair_log_pmf

logger = logging.getLogger(__name__)


def til(limits):
    return limits.til()


def _reporting_limits(limits):
    return limits.reported()


def _decimal_grid(step, start=0.0, stop=1.0):
    count = int(round((stop - start) / step))
    return np.round(start + np.arange(count + 1) * step, 10)


def _coverage(ps, n, L, U, lower_strict=False, upper_strict=False):
    """Σ_y p_B(y, n, p) over the y whose interval covers p, for every p in ps."""
    p = np.asarray(ps, dtype=float)[:, None]
    above = (L[None, :] < p) if lower_strict else (L[None, :] <= p)
    below = (p < U[None, :]) if upper_strict else (p <= U[None, :])
    return (binom_pmf_matrix(n, ps) * (above & below)).sum(axis=1)


# ---------------- SINGLE PROPORTION ----------------
def icp_single_prop(limits, n, extra_points=None, fallback_points=10001):
    """ICP of a single-proportion table.

    The coverage function is piecewise polynomial with jumps only at the
    limits, and each piece is unimodal when L and U are nondecreasing, so its
    infimum is one of the one-sided limits at a left limit L(x)⁻ or a right
    limit U(x)⁺. Non-monotone tables fall back to a dense grid.
    """
    table = _reporting_limits(limits)
    L = np.array([table.interval_at(x)[0] for x in range(n + 1)])
    U = np.array([table.interval_at(x)[1] for x in range(n + 1)])

    left = np.unique(L[L > 0])
    right = np.unique(U[U < 1])
    ends = np.array([0.0, 1.0])
    parts = [
        (left, _coverage(left, n, L, U, lower_strict=True)),
        (right, _coverage(right, n, L, U, upper_strict=True)),
        (ends, _coverage(ends, n, L, U)),
    ]
    if extra_points is not None:
        extra = np.asarray(extra_points, dtype=float)
        parts.append((extra, _coverage(extra, n, L, U)))

    notes = []
    method = "one-sided-limits"
    if np.any(np.diff(L) < 0) or np.any(np.diff(U) < 0):
        msg = f"limits are not monotone in x at n={n}; scanning a {fallback_points}-point grid"
        logger.warning(msg)
        warnings.warn(msg, MonotonicityWarning, stacklevel=2)
        notes.append(msg)
        dense = np.linspace(0.0, 1.0, fallback_points)
        parts.append((dense, _coverage(dense, n, L, U)))
        method = "dense-grid"

    ps = np.concatenate([p for p, _ in parts])
    cov = np.concatenate([c for _, c in parts])
    i = int(np.argmin(cov))
    return CoverageReport(
        icp=float(min(cov[i], 1.0)),
        argmin=(float(ps[i]),),
        til=til(limits),
        method=method,
        evaluated=len(ps),
        warnings=notes,
    )


# ---------------- DIFFERENCE OF TWO PROPORTIONS ----------------
def _grid_by_point(table, shape):
    L = np.empty(shape)
    U = np.empty(shape)
    for (x, y), lo, hi in zip(table.points.tolist(), table.lower, table.upper):
        L[x, y], U[x, y] = lo, hi
    return L, U


def _pair_coverage(pmf1, pmf2, inside):
    return np.einsum("ix,xy,iy->i", pmf1, inside.astype(float), pmf2)


def icp_grid_d(limits, n1, n2, step=None, threads=None, local_rescan=False):
    """Exact coverage at every (p₁, p₂) pair of multiples of ``step``; returns the minimum.

    Pairs are grouped by the difference p₁ − p₂ so each band shares one
    covered-set indicator. Each pair also contributes the one-sided limits
    of the coverage as p₁ − p₂ approaches it from above and from below,
    wherever that approach stays inside the unit square; this is where
    degenerate limits such as [0, 0] at (0, 0) reach their infimum.
    """
    step = step or config.ICP_GRID_STEP
    table = _reporting_limits(limits)
    if len(table) != (n1 + 1) * (n2 + 1):
        raise InputError(f"limits table has {len(table)} rows, expected {(n1 + 1) * (n2 + 1)}")
    L, U = _grid_by_point(table, (n1 + 1, n2 + 1))
    ps = _decimal_grid(step)
    count = len(ps) - 1
    pmf1 = binom_pmf_matrix(n1, ps)
    pmf2 = binom_pmf_matrix(n2, ps)

    def band(k):
        i = np.arange(max(0, k), min(count, count + k) + 1)
        j = i - k
        d = round(k * step, 10)
        f1, f2 = pmf1[i], pmf2[j]
        cov = _pair_coverage(f1, f2, (L <= d) & (d <= U))
        from_above = np.where((i < count) | (j > 0), _pair_coverage(f1, f2, (L <= d) & (d < U)), np.inf)
        from_below = np.where((i > 0) | (j < count), _pair_coverage(f1, f2, (L < d) & (d <= U)), np.inf)
        cov = np.minimum(cov, np.minimum(from_above, from_below))
        m = int(np.argmin(cov))
        return float(cov[m]), int(i[m]), int(j[m])

    results = parallel_map(band, range(-count, count + 1), threads)
    best = min(range(len(results)), key=lambda r: results[r][0])
    icp, i, j = results[best]
    argmin = (float(ps[i]), float(ps[j]))
    evaluated = len(ps) ** 2

    if local_rescan:
        fine = step / 10
        p1s = np.clip(argmin[0] + fine * np.arange(-10, 11), 0.0, 1.0)
        p2s = np.clip(argmin[1] + fine * np.arange(-10, 11), 0.0, 1.0)
        f1, f2 = binom_pmf_matrix(n1, p1s), binom_pmf_matrix(n2, p2s)
        for a, p1 in enumerate(p1s):
            for b, p2 in enumerate(p2s):
                d = p1 - p2
                cov = float(_pair_coverage(f1[a:a + 1], f2[b:b + 1], (L <= d) & (d <= U))[0])
                if cov < icp:
                    icp, argmin = cov, (float(p1), float(p2))
        evaluated += len(p1s) * len(p2s)

    return CoverageReport(icp=min(icp, 1.0), argmin=argmin, til=til(limits), method="grid", evaluated=evaluated)


# ---------------- MATCHED PAIRS ----------------
def icp_grid_mpair(limits, n, step=None, threads=None):
    """Exact coverage over (d_m, p_t) pairs of multiples of ``step`` with |d_m| + p_t ≤ 1."""
    step = step or config.MPAIR_ICP_STEP
    table = _reporting_limits(limits)
    n10 = table.points[:, 0].astype(float)[None, :]
    t = table.points[:, 1].astype(float)[None, :]
    count = int(round(1 / step))

    def row(k):
        d = round(k * step, 10)
        pts = _decimal_grid(step, 0.0, round(1.0 - abs(d), 10))[:, None]
        inside = (table.lower <= d) & (d <= table.upper)
        cov = (np.exp(mpair_log_pmf(n10, t, n, d, pts)) * inside).sum(axis=1)
        m = int(np.argmin(cov))
        return float(cov[m]), d, float(pts[m, 0]), len(pts)

    results = parallel_map(row, range(-count, count + 1), threads)
    best = min(range(len(results)), key=lambda r: results[r][0])
    icp, d, pt, _ = results[best]
    return CoverageReport(
        icp=min(icp, 1.0),
        argmin=(d, pt),
        til=til(limits),
        method="grid",
        evaluated=sum(r[3] for r in results),
    )


def score(model, limits, threads=None):
    """ICP/TIL for a table of the given model's design."""
    design = model.design.get("design")
    if design == "prop":
        return icp_single_prop(limits, model.design["n"])
    if design == "diff":
        return icp_grid_d(limits, model.design["n1"], model.design["n2"], threads=threads)
    if design == "mpair":
        return icp_grid_mpair(limits, model.design["n"], threads=threads)
    raise InputError(f"no coverage scorer for design {design!r}")
