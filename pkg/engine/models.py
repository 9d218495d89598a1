# engine/models.py
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import pandas as pd

import config
from engine.errors import InputError

# absorbs representation error (e.g. 0.0902 stored as 0.090199999...) before floor/ceil
_ROUND_SLACK = 1e-7


# ---------------- ROUNDING CONVENTION ----------------
def round_down(values, decimals=config.REPORT_DECIMALS):
    scale = 10.0 ** decimals
    out = np.floor(np.asarray(values, dtype=float) * scale + _ROUND_SLACK) / scale
    return out + 0.0


def round_up(values, decimals=config.REPORT_DECIMALS):
    scale = 10.0 ** decimals
    out = np.ceil(np.asarray(values, dtype=float) * scale - _ROUND_SLACK) / scale
    return out + 0.0


# ---------------- GRID POLICY ----------------
@dataclass(frozen=True)
class GridPolicy:
    theta_points: int = config.THETA_POINTS
    nuisance_points: int = config.NUISANCE_POINTS
    bisection_tol: float = config.BISECTION_TOL
    polish: bool = config.POLISH
    tie_tol: float = config.TIE_TOL
    theta_side_points: int = config.THETA_SIDE_POINTS
    golden_iterations: int = config.GOLDEN_ITERATIONS

    def __post_init__(self):
        if self.theta_points < 2 or self.nuisance_points < 2 or self.theta_side_points < 2:
            raise InputError("grid point counts must be at least 2")
        if self.bisection_tol <= 0:
            raise InputError("bisection_tol must be positive")
        if self.tie_tol < 0:
            raise InputError("tie_tol must be nonnegative")
        if self.golden_iterations < 1:
            raise InputError("golden_iterations must be at least 1")

    @classmethod
    def from_config(cls):
        return cls(
            theta_points=config.THETA_POINTS,
            nuisance_points=config.NUISANCE_POINTS,
            bisection_tol=config.BISECTION_TOL,
            polish=config.POLISH,
            tie_tol=config.TIE_TOL,
            theta_side_points=config.THETA_SIDE_POINTS,
            golden_iterations=config.GOLDEN_ITERATIONS,
        )

    @classmethod
    def parse(cls, text):
        """Parse the CLI form ``theta_points,nuisance_points[,polish]``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not 2 <= len(parts) <= 3:
            raise InputError(f"--grid expects theta_points,nuisance_points[,polish], got {text!r}")
        try:
            theta_points, nuisance_points = int(parts[0]), int(parts[1])
        except ValueError as e:
            raise InputError(f"--grid counts must be integers: {e}") from e
        polish = len(parts) == 3 and parts[2].lower() in ("polish", "1", "true", "yes")
        return cls(theta_points=theta_points, nuisance_points=nuisance_points, polish=polish)

    def describe(self):
        return {
            "theta_points": self.theta_points,
            "nuisance_points": self.nuisance_points,
            "bisection_tol": self.bisection_tol,
            "polish": self.polish,
            "tie_tol": self.tie_tol,
            "golden_iterations": self.golden_iterations,
        }


# ---------------- FINITE MODEL ----------------
@dataclass(frozen=True, eq=False)
class FiniteModel:
    """An enumerated sample space with a mass function over (θ, η).

    ``mass_fn(theta, etas)`` returns an array of shape (len(etas), n_points).
    ``nuisance_fn(theta)`` returns the closed nuisance interval D(θ); when it is
    None the model has no nuisance parameter and a single dummy value is used.
    """

    name: str
    points: np.ndarray
    mass_fn: Callable[[float, np.ndarray], np.ndarray]
    theta_range: tuple
    nuisance_fn: Optional[Callable[[float], tuple]] = None
    monotone_in_theta: bool = True
    design: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=int)
        if pts.ndim == 1:
            pts = pts[:, None]
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", {tuple(p): i for i, p in enumerate(pts.tolist())})

    @property
    def size(self):
        return len(self.points)

    @property
    def has_nuisance(self):
        return self.nuisance_fn is not None

    def index_of(self, point):
        key = (int(point),) if np.isscalar(point) else tuple(int(v) for v in point)
        try:
            return self._index[key]
        except KeyError:
            raise InputError(f"{key} is not a sample point of model {self.name}") from None

    def check_theta(self, theta):
        lo, hi = self.theta_range
        if not (lo - 1e-12 <= theta <= hi + 1e-12):
            raise InputError(f"θ₀={theta} outside the parameter range [{lo}, {hi}]")

    def nuisance_domain(self, theta):
        if self.nuisance_fn is None:
            return (0.0, 0.0)
        lo, hi = self.nuisance_fn(theta)
        if hi < lo:
            raise InputError(f"empty nuisance domain at θ={theta}")
        return (float(lo), float(hi))

    def nuisance_grid(self, theta, grid):
        lo, hi = self.nuisance_domain(theta)
        if hi - lo <= 0.0:
            return np.array([lo])
        return np.linspace(lo, hi, grid.nuisance_points)

    def mass(self, theta, etas=None):
        etas = np.atleast_1d(np.asarray(0.0 if etas is None else etas, dtype=float))
        return self.mass_fn(float(theta), etas)


# ---------------- H-FUNCTION RECIPE ----------------
@dataclass(frozen=True, eq=False)
class HFunctionSpec:
    """A test statistic T(s, θ₀) over all points (small values favor H_A), or a
    closed-form h(·, θ₀) vector when the h-function is not a statistic sum."""

    name: str
    statistic: Optional[Callable[[float], np.ndarray]] = None
    null_kind: str = "point"
    closed_form: Optional[Callable[[float], np.ndarray]] = None

    def __post_init__(self):
        if self.null_kind not in ("point", "lower", "upper"):
            raise InputError(f"null_kind must be point, lower or upper, got {self.null_kind}")
        if (self.statistic is None) == (self.closed_form is None):
            raise InputError("exactly one of statistic or closed_form must be given")


# ---------------- LIMITS TABLE ----------------
@dataclass(frozen=True, eq=False)
class LimitsTable:
    points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    theta_range: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=int)
        if pts.ndim == 1:
            pts = pts[:, None]
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if not (len(pts) == len(lower) == len(upper)):
            raise InputError("points, lower and upper must have the same length")
        bad = np.flatnonzero(lower > upper + 1e-12)
        if bad.size:
            p = tuple(pts[bad[0]].tolist())
            raise InputError(f"lower limit exceeds upper limit at {p}: {lower[bad[0]]} > {upper[bad[0]]}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "_index", {tuple(p): i for i, p in enumerate(pts.tolist())})

    def __len__(self):
        return len(self.points)

    def interval_at(self, point):
        key = (int(point),) if np.isscalar(point) else tuple(int(v) for v in point)
        if key not in self._index:
            raise InputError(f"{key} is not in the limits table")
        i = self._index[key]
        return float(self.lower[i]), float(self.upper[i])

    def with_limits(self, lower, upper, **meta):
        return replace(self, lower=np.asarray(lower, float), upper=np.asarray(upper, float),
                       meta={**self.meta, **meta})

    def rounded(self, decimals=config.REPORT_DECIMALS):
        return self.with_limits(round_down(self.lower, decimals), round_up(self.upper, decimals),
                                rounded=True)

    def clipped(self):
        lo, hi = self.theta_range
        return self.with_limits(np.clip(self.lower, lo, hi), np.clip(self.upper, lo, hi))

    def reported(self, decimals=config.REPORT_DECIMALS):
        """Rounded outward, then clipped to the parameter range."""
        return self.rounded(decimals).clipped()

    def is_finite(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def til(self):
        return float(np.sum(self.upper - self.lower))

    def same_as(self, other, decimals=config.REPORT_DECIMALS):
        a, b = self.rounded(decimals), other.rounded(decimals)
        return bool(np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper))

    def contains(self, other, tol=1e-9):
        """True when other(s) ⊆ self(s) at every sample point."""
        return bool(np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol))

    def to_frame(self):
        cols = self.meta.get("point_names") or [f"s{i}" for i in range(self.points.shape[1])]
        frame = pd.DataFrame(self.points, columns=cols)
        frame["lower"] = self.lower
        frame["upper"] = self.upper
        return frame


# ---------------- RESULTS ----------------
@dataclass(frozen=True)
class Inversion:
    lower: float
    upper: float
    degenerate: bool = False


@dataclass
class CoverageReport:
    icp: float
    argmin: tuple
    til: float
    method: str = "grid"
    evaluated: int = 0
    warnings: list = field(default_factory=list)


@dataclass
class RefinementTrace:
    k: int
    til_sequence: list
    ratio_sequence: list
    converged: bool
    final: LimitsTable
    iterates: list = field(default_factory=list)
    nonincreasing: bool = True

    def to_frame(self):
        ratios = [float("nan")] + list(self.ratio_sequence)
        return pd.DataFrame({"k": range(len(self.til_sequence)), "til": self.til_sequence, "ratio": ratios})


@dataclass
class MethodRun:
    """One interval method carried through optional refinement and scored."""

    label: str
    table: LimitsTable
    coverage: Optional[CoverageReport] = None
    trace: Optional[RefinementTrace] = None
