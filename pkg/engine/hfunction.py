# engine/hfunction.py
"""The generic h-function engine.

h(x, θ₀) = sup over the null of P(T(X, θ₀) ≤ T(x, θ₀)), evaluated by full
enumeration of a FiniteModel. The same inequality h > α read in x gives the
acceptance region and read in θ₀ gives the confidence set, whose hull is the
reported interval.
"""
import logging
import warnings

import numpy as np

from engine.errors import CoarseGridWarning, InputError
from engine.models import FiniteModel, GridPolicy, HFunctionSpec, Inversion, LimitsTable
from engine.optimizer import lane_sup
from engine.parallel import parallel_map

logger = logging.getLogger(__name__)


def check_alpha(alpha, allow_zero=False):
    lo_ok = alpha >= 0 if allow_zero else alpha > 0
    if not (lo_ok and alpha < 1):
        raise InputError(f"α must lie in (0, 1), got {alpha}")


def theta_grid(model, grid):
    lo, hi = model.theta_range
    return np.linspace(lo, hi, grid.theta_points)


# ---------------- TAIL MASSES ----------------
def tie_thresholds(t, tie_tol):
    """T(x) widened by a relative tolerance so equal statistics from different
    floating-point paths are grouped as ties."""
    thr = np.array(t, dtype=float, copy=True)
    finite = np.isfinite(thr)
    thr[finite] += tie_tol * np.maximum(1.0, np.abs(thr[finite]))
    return thr


def tail_masses(t, masses, tie_tol):
    """P(K_x) for every point x and every row of ``masses``, K_x = {s : T(s) ≤ T(x)}.

    Masses are accumulated in increasing-T order, i.e. from the small tail.
    """
    order = np.argsort(t, kind="stable")
    counts = np.searchsorted(t[order], tie_thresholds(t, tie_tol), side="right")
    cum = np.zeros((masses.shape[0], len(t) + 1))
    np.cumsum(masses[:, order], axis=1, out=cum[:, 1:])
    return np.minimum(cum[:, counts], 1.0)


def _null_thetas(model, spec, theta0, grid):
    lo, hi = model.theta_range
    if spec.null_kind == "point" or model.monotone_in_theta:
        return [theta0]
    if spec.null_kind == "lower":
        return list(np.linspace(lo, theta0, grid.theta_side_points))
    return list(np.linspace(theta0, hi, grid.theta_side_points))


def _polish(model, theta, etas, probs, t, grid):
    """Golden-section refinement of the nuisance sup inside each point's best grid cell."""
    thr = tie_thresholds(t, grid.tie_tol)
    inside = (t[None, :] <= thr[:, None]).astype(float)
    lanes = np.arange(model.size)

    def lane_mass(e):
        m = model.mass(theta, e)
        return (m[lanes] * inside).sum(axis=1)

    _, refined = lane_sup(lane_mass, etas, probs, grid.golden_iterations)
    return refined


# ---------------- EVALUATION ----------------
def h_vector(model: FiniteModel, spec: HFunctionSpec, theta0, grid: GridPolicy):
    """h(x, θ₀) for every sample point x of the model."""
    model.check_theta(theta0)
    if spec.closed_form is not None:
        return np.clip(np.asarray(spec.closed_form(theta0), dtype=float), 0.0, 1.0)

    t = np.asarray(spec.statistic(theta0), dtype=float)
    best = np.zeros(model.size)
    for theta in _null_thetas(model, spec, theta0, grid):
        etas = model.nuisance_grid(theta, grid)
        probs = tail_masses(t, model.mass(theta, etas), grid.tie_tol)
        best = np.maximum(best, probs.max(axis=0))
        if grid.polish and len(etas) > 1:
            best = np.maximum(best, _polish(model, theta, etas, probs, t, grid))
    return np.clip(best, 0.0, 1.0)


def h_eval(model, spec, x, theta0, grid):
    return float(h_vector(model, spec, theta0, grid)[model.index_of(x)])


def h_matrix(model, spec, thetas, grid, threads=None):
    """Rows are h(·, θ) for θ in ``thetas``."""
    rows = parallel_map(lambda th: h_vector(model, spec, th, grid), thetas, threads)
    return np.vstack(rows)


# ---------------- INVERSION ----------------
def _bisect_flank(model, spec, idx, inside, outside, alpha, grid):
    """Bisect the indicator h > α; returns the end where h > α was verified."""
    while abs(inside - outside) > grid.bisection_tol:
        mid = 0.5 * (inside + outside)
        if h_vector(model, spec, mid, grid)[idx] > alpha:
            inside = mid
        else:
            outside = mid
    return inside


def _invert_column(model, spec, idx, column, thetas, alpha, grid):
    above = np.flatnonzero(column > alpha)
    if above.size == 0:
        j = int(np.argmax(column))
        point = tuple(model.points[idx].tolist())
        msg = f"{spec.name}: no θ grid point has h > {alpha} at {point}; degenerate interval at {thetas[j]:.6f}"
        logger.warning(msg)
        warnings.warn(msg, CoarseGridWarning, stacklevel=3)
        return Inversion(float(thetas[j]), float(thetas[j]), degenerate=True)

    first, last = int(above[0]), int(above[-1])
    if first == 0:
        lower = float(thetas[0])
    else:
        lower = _bisect_flank(model, spec, idx, thetas[first], thetas[first - 1], alpha, grid)
    if last == len(thetas) - 1:
        upper = float(thetas[-1])
    else:
        upper = _bisect_flank(model, spec, idx, thetas[last], thetas[last + 1], alpha, grid)
    return Inversion(float(lower), float(upper))


def invert_h(model, spec, x, alpha, grid):
    """The hull of {θ₀ : h(x, θ₀) > α} at one sample point."""
    check_alpha(alpha)
    idx = model.index_of(x)
    thetas = theta_grid(model, grid)
    column = np.array([h_vector(model, spec, th, grid)[idx] for th in thetas])
    return _invert_column(model, spec, idx, column, thetas, alpha, grid)


def invert_all(model, spec, alpha, grid, threads=None):
    """Invert h at every sample point; returns (LimitsTable, degenerate points)."""
    check_alpha(alpha)
    thetas = theta_grid(model, grid)
    surface = h_matrix(model, spec, thetas, grid, threads)
    results = parallel_map(
        lambda i: _invert_column(model, spec, i, surface[:, i], thetas, alpha, grid),
        range(model.size),
        threads,
    )
    degenerate = [tuple(model.points[i].tolist()) for i, r in enumerate(results) if r.degenerate]
    table = LimitsTable(
        points=model.points,
        lower=[r.lower for r in results],
        upper=[r.upper for r in results],
        theta_range=model.theta_range,
        meta={"method": spec.name, "alpha": alpha, "model": model.name, **model.design},
    )
    return table, degenerate


# ---------------- TEST FORM ----------------
def _point_key(point):
    return int(point[0]) if len(point) == 1 else tuple(int(v) for v in point)


def acceptance_region(model, spec, theta0, alpha, grid):
    """Sample points with h(x, θ₀) > α; the complement is the rejection region."""
    check_alpha(alpha, allow_zero=True)
    h = h_vector(model, spec, theta0, grid)
    return [_point_key(p) for p in model.points[h > alpha]]


def validate_p_value(model, spec, alpha, theta_grid_values, grid):
    """Worst exact size max P(h(X, θ₀) ≤ α) over the null parameters on the supplied grid."""
    check_alpha(alpha, allow_zero=True)
    thetas = np.asarray(theta_grid_values, dtype=float)
    worst = 0.0
    for theta0 in thetas:
        reject = (h_vector(model, spec, theta0, grid) <= alpha).astype(float)
        if spec.null_kind == "point":
            nulls = [theta0]
        elif spec.null_kind == "lower":
            nulls = thetas[thetas <= theta0]
        else:
            nulls = thetas[thetas >= theta0]
        for theta in nulls:
            masses = model.mass(theta, model.nuisance_grid(theta, grid))
            worst = max(worst, float((masses * reject).sum(axis=1).max()))
    return worst
