# services/mpair_service.py
import logging

import numpy as np
from scipy.special import gammaln, xlogy

from engine.errors import InputError
from engine.models import FiniteModel, GridPolicy
from kernels.binomial import check_trials, mpair_cell_probs
from services.refine_service import p_value

logger = logging.getLogger(__name__)


def nuisance_domain_m(d_m):
    if not -1.0 <= d_m <= 1.0:
        raise InputError(f"d_m must lie in [-1, 1], got {d_m}")
    return 0.0, 1.0 - abs(d_m)


def sample_space_m(n):
    """S_M = {(n10, t) : n10 + t ≤ n}, n10-major; (n+1)(n+2)/2 points."""
    check_trials(n)
    return np.array([(n10, t) for n10 in range(n + 1) for t in range(n + 1 - n10)])


def build_mpair_model(n):
    points = sample_space_m(n)
    n10 = points[:, 0].astype(float)
    t = points[:, 1].astype(float)
    n01 = n - n10 - t
    log_coef = gammaln(n + 1) - gammaln(n10 + 1) - gammaln(t + 1) - gammaln(n01 + 1)

    def mass(d_m, p_ts):
        p10, pt, p01 = mpair_cell_probs(d_m, p_ts[:, None])
        logp = log_coef[None, :] + xlogy(n10, p10) + xlogy(t, pt) + xlogy(n01, p01)
        return np.exp(logp)

    return FiniteModel(
        name="matched-pairs",
        points=points,
        mass_fn=mass,
        theta_range=(-1.0, 1.0),
        nuisance_fn=nuisance_domain_m,
        monotone_in_theta=False,
        design={"design": "mpair", "n": n, "point_names": ["n10", "t"]},
    )


def h_m(baseline, n10, t, d_m, n, grid=None):
    """h of the T₂ statistic built from ``baseline`` at (n10, t), sup over p_t ∈ [0, 1 − |d_m|]."""
    model = build_mpair_model(n)
    return p_value(model, baseline, (n10, t), d_m, grid or GridPolicy.from_config())
