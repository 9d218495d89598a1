# engine/optimizer.py
"""Grid scan plus golden-section polish: the one optimizer behind every
nuisance supremum and the constrained MLE."""
import math

import numpy as np

from engine.errors import InputError

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


def golden_section_max(f, lo, hi, iterations=48):
    """Vectorized golden-section search for the maximum of f on [lo, hi].

    ``lo`` and ``hi`` are arrays of bracket ends (one bracket per lane) and
    ``f`` maps an array of abscissae to an array of values lane by lane.
    Returns (argmax, max) per lane.
    """
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    h = b - a
    c = a + INV_PHI_SQUARE * h
    d = a + INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(iterations):
        left = yc >= yd
        # keep [a, d] where the left interior point wins, [c, b] otherwise
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        h = b - a
        new_c = a + INV_PHI_SQUARE * h
        new_d = a + INV_PHI * h
        trial = np.where(left, new_c, new_d)
        yp = f(trial)
        c, d, yc, yd = (
            np.where(left, new_c, d),
            np.where(left, c, new_d),
            np.where(left, yp, yd),
            np.where(left, yc, yp),
        )
    x = np.where(yc >= yd, c, d)
    return x, np.maximum(yc, yd)


def grid_cell(etas, i):
    """The bracketing cells [etas[i-1], etas[i+1]] around grid indices i, clipped at the ends."""
    i = np.asarray(i)
    return etas[np.maximum(i - 1, 0)], etas[np.minimum(i + 1, len(etas) - 1)]


def lane_sup(f, etas, values, iterations=0):
    """Per-lane (argmax, max) from a grid scan, optionally polished.

    ``values[g, l]`` is lane l evaluated at ``etas[g]``; ties go to the
    smaller grid value. With ``iterations`` > 0 each lane's best cell is
    searched by golden section with ``f`` (array of abscissae, one per lane,
    to array of values) and the polished value replaces the grid value only
    where it is larger.
    """
    values = np.asarray(values, dtype=float)
    best = values.argmax(axis=0)
    best_eta = etas[best]
    best_value = values[best, np.arange(values.shape[1])]
    if iterations <= 0 or len(etas) < 2:
        return best_eta, best_value
    a, b = grid_cell(etas, best)
    x, fx = golden_section_max(f, a, b, iterations)
    better = fx > best_value
    return np.where(better, x, best_eta), np.where(better, fx, best_value)


def sup_over_nuisance(f, domain, grid, vectorized=False):
    """(argmax, max) of f over the closed interval ``domain``.

    Grid scan with ``grid.nuisance_points`` equally spaced values including both
    ends; with ``grid.polish`` the best cell is refined by golden section for
    ``grid.golden_iterations`` steps.
    """
    lo, hi = domain
    if lo is None or hi is None or hi < lo:
        raise InputError(f"empty nuisance domain {domain}")
    if hi == lo:
        return float(lo), float(f(np.array([lo]))[0] if vectorized else f(lo))

    scalar = (lambda e: np.asarray(f(e), dtype=float)) if vectorized else np.vectorize(f, otypes=[float])
    etas = np.linspace(lo, hi, grid.nuisance_points)
    values = scalar(etas)[:, None]
    iterations = grid.golden_iterations if grid.polish else 0
    x, fx = lane_sup(scalar, etas, values, iterations)
    return float(x[0]), float(fx[0])
