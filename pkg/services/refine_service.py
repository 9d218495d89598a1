# services/refine_service.py
"""The modification operator M and its iteration to the fixed point.

Any interval C₀ = [L₀, U₀] defines T₂(x, θ₀) = min{θ₀ − L₀(x), U₀(x) − θ₀};
inverting the h-function of T₂ gives an exact interval C₀^M. One-sided
inputs use the order of their single finite limit instead.
"""
import logging
from dataclasses import replace

import numpy as np

import config
from engine.errors import InputError
from engine.hfunction import acceptance_region, check_alpha, h_eval, invert_all
from engine.models import GridPolicy, HFunctionSpec, LimitsTable, RefinementTrace

logger = logging.getLogger(__name__)

REFINE_MODES = ("none", "M", "Minf")


# ---------------- ALIGNMENT ----------------
def align_to_model(model, limits):
    """Limits reordered into the model's point order; every sample point must be present."""
    lower = np.empty(model.size)
    upper = np.empty(model.size)
    for i, point in enumerate(model.points.tolist()):
        try:
            lower[i], upper[i] = limits.interval_at(point)
        except InputError:
            raise InputError(f"limits table has no row for sample point {tuple(point)}") from None
    if len(limits) != model.size:
        raise InputError(f"limits table has {len(limits)} rows, model {model.name} has {model.size} points")
    return LimitsTable(
        points=model.points,
        lower=lower,
        upper=upper,
        theta_range=model.theta_range,
        meta={**limits.meta, **{k: v for k, v in model.design.items() if k not in limits.meta}},
    )


# ---------------- T2 ----------------
def t2_stat(limits, s, theta0):
    lo, hi = limits.interval_at(s)
    return min(theta0 - lo, hi - theta0)


def t2_spec(model, limits, name=None):
    table = align_to_model(model, limits)
    if not table.is_finite():
        raise InputError("T₂ needs finite limits on both sides; use a one-sided mode instead")
    lower, upper = table.lower, table.upper

    def stat(theta0):
        return np.minimum(theta0 - lower, upper - theta0)

    return HFunctionSpec(name=name or f"{table.meta.get('method', 'limits')}^M", statistic=stat)


def p_value(model, limits, s, theta0, grid=None):
    """h₂(s, θ₀): the p-value the refined interval is built from."""
    return h_eval(model, t2_spec(model, limits), s, theta0, grid or GridPolicy.from_config())


def refined_acceptance_region(model, limits, theta0, alpha, grid=None):
    return acceptance_region(model, t2_spec(model, limits), theta0, alpha, grid or GridPolicy.from_config())


# ---------------- TWO-SIDED MODIFICATION ----------------
def modify(model, limits, alpha, grid=None, threads=None):
    """C₀^M at every sample point (raw, before reporting rounds)."""
    grid = grid or GridPolicy.from_config()
    spec = t2_spec(model, limits)
    table, degenerate = invert_all(model, spec, alpha, grid, threads)
    if degenerate:
        logger.warning("%s: %d degenerate inversions %s", spec.name, len(degenerate), degenerate[:5])
    return table.with_limits(table.lower, table.upper, alpha=alpha)


def refine_fixed_point(model, limits, alpha, grid=None, max_k=None, threads=None):
    """Iterate M until two consecutive iterates agree.

    Iterates are fed back raw; rounding is only used to compare them. k is
    the first index whose successor equals it per point at reporting
    precision with a TIL ratio within TIL_RATIO_TOL of one. Flanks are
    bisected to FIXED_POINT_BISECTION_TOL so the ratio test sees the true
    shrinkage rather than bisection noise.
    """
    grid = grid or GridPolicy.from_config()
    grid = replace(grid, bisection_tol=min(grid.bisection_tol, config.FIXED_POINT_BISECTION_TOL))
    max_k = config.MAX_K if max_k is None else max_k
    if max_k < 1:
        raise InputError(f"max_k must be at least 1, got {max_k}")
    check_alpha(alpha)

    iterates = [align_to_model(model, limits)]
    tils = [iterates[0].til()]
    ratios = []
    for step in range(1, max_k + 1):
        nxt = modify(model, iterates[-1], alpha, grid, threads)
        til_next = nxt.til()
        ratio = til_next / tils[-1] if tils[-1] > 0 else (1.0 if til_next == 0 else np.inf)
        iterates.append(nxt)
        tils.append(til_next)
        ratios.append(ratio)
        logger.info("%s iteration %d: TIL %.6f ratio %.8f", limits.meta.get("method", "limits"),
                    step, til_next, ratio)
        if nxt.same_as(iterates[-2]) and abs(ratio - 1.0) <= config.TIL_RATIO_TOL:
            final = iterates[-2].with_limits(iterates[-2].lower, iterates[-2].upper, k=step - 1)
            return RefinementTrace(step - 1, tils, ratios, True, final, iterates,
                                   _nonincreasing(iterates, grid))

    logger.warning("no fixed point within %d iterations (last ratio %.8f)", max_k, ratios[-1])
    final = iterates[-1].with_limits(iterates[-1].lower, iterates[-1].upper, k=max_k)
    return RefinementTrace(max_k, tils, ratios, False, final, iterates, _nonincreasing(iterates, grid))


def _nonincreasing(iterates, grid):
    """Every iterate from k = 1 on sits inside its predecessor, up to bisection resolution."""
    tol = max(1e-9, 2 * grid.bisection_tol)
    return all(prev.contains(cur, tol=tol) for prev, cur in zip(iterates[1:], iterates[2:]))


def apply_refinement(model, limits, alpha, refine, grid=None, max_k=None, threads=None):
    """(raw table, trace or None) for refine ∈ {none, M, Minf}."""
    if refine not in REFINE_MODES:
        raise InputError(f"refine must be one of {REFINE_MODES}, got {refine}")
    if refine == "none":
        return align_to_model(model, limits), None
    if refine == "M":
        return modify(model, limits, alpha, grid, threads), None
    trace = refine_fixed_point(model, limits, alpha, grid, max_k, threads)
    return trace.final, trace


# ---------------- ONE-SIDED MODIFICATION ----------------
def _order_spec(model, limits, side):
    table = align_to_model(model, limits)
    if side == "lower":
        order = -np.asarray(table.lower, dtype=float)
        null_kind = "lower"
    else:
        order = np.asarray(table.upper, dtype=float)
        null_kind = "upper"
    if not np.all(np.isfinite(order)):
        raise InputError(f"the {side} limits used as an order must be finite")
    return HFunctionSpec(name=f"{table.meta.get('method', 'limits')}^M({side})",
                         statistic=lambda theta0: order, null_kind=null_kind)


def modify_lower_one_sided(model, limits, alpha, grid=None, threads=None):
    """[inf{θ₀ : h_1l > α}, B], with h_1l = sup over θ ≤ θ₀ of P(L(X) ≥ L(x))."""
    grid = grid or GridPolicy.from_config()
    spec = _order_spec(model, limits, "lower")
    table, _ = invert_all(model, spec, alpha, grid, threads)
    upper = np.full(model.size, model.theta_range[1])
    return table.with_limits(table.lower, upper, method=spec.name, sided="lower")


def modify_upper_one_sided(model, limits, alpha, grid=None, threads=None):
    """[A, sup{θ₀ : h_1u > α}], with h_1u = sup over θ ≥ θ₀ of P(U(X) ≤ U(x))."""
    grid = grid or GridPolicy.from_config()
    spec = _order_spec(model, limits, "upper")
    table, _ = invert_all(model, spec, alpha, grid, threads)
    lower = np.full(model.size, model.theta_range[0])
    return table.with_limits(lower, table.upper, method=spec.name, sided="upper")
