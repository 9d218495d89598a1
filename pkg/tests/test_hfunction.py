import numpy as np
import pytest

from engine import optimizer
from engine.errors import CoarseGridWarning, InputError
from engine.hfunction import (
    acceptance_region,
    h_eval,
    h_matrix,
    h_vector,
    invert_all,
    invert_h,
    tail_masses,
    validate_p_value,
)
from engine.models import GridPolicy, HFunctionSpec, round_down, round_up
from engine.optimizer import golden_section_max, lane_sup, sup_over_nuisance
from kernels.binomial import binom_cdf
from services import diff_service, prop_service

P0_GRID = np.linspace(0.0, 1.0, 101)


class TestTailMasses:
    def test_ties_share_one_tail(self):
        t = np.array([0.3, 0.1, 0.3, 0.2])
        masses = np.array([[0.1, 0.2, 0.3, 0.4]])
        out = tail_masses(t, masses, 1e-10)
        np.testing.assert_allclose(out[0], [1.0, 0.2, 1.0, 0.6])

    def test_near_ties_grouped(self):
        t = np.array([0.25, 0.25 + 1e-14, 0.5])
        masses = np.array([[0.2, 0.3, 0.5]])
        out = tail_masses(t, masses, 1e-10)
        assert out[0, 0] == pytest.approx(out[0, 1])

    def test_negative_infinity_is_smallest(self):
        t = np.array([-np.inf, 0.0, -np.inf])
        masses = np.array([[0.25, 0.5, 0.25]])
        out = tail_masses(t, masses, 1e-10)
        np.testing.assert_allclose(out[0], [0.5, 1.0, 0.5])


class TestEvaluation:
    def test_cp_matches_closed_form(self, grid):
        model = prop_service.build_prop_model(16)
        spec = prop_service.h_spec(16, "cp")
        for p0 in P0_GRID:
            expected = min(2 * min(binom_cdf(3, 16, p0), 1 - binom_cdf(2, 16, p0)), 1.0)
            assert h_eval(model, spec, 3, p0, grid) == pytest.approx(expected, abs=1e-12)

    def test_statistic_maximum_gives_one(self, grid):
        model = prop_service.build_prop_model(10)
        assert h_eval(model, prop_service.h_spec(10, "lrt"), 5, 0.5, grid) == pytest.approx(1.0, abs=1e-12)

    def test_blaker_matches_direct_enumeration(self, grid):
        n = 12
        model = prop_service.build_prop_model(n)
        spec = prop_service.h_spec(n, "blaker")
        for p0 in (0.13, 0.37, 0.81):
            t = prop_service.blaker_statistic(n)(p0)
            pmf = model.mass(p0)[0]
            for x in range(n + 1):
                expected = pmf[t <= t[x] + 1e-10 * max(1.0, abs(t[x]))].sum()
                assert h_eval(model, spec, x, p0, grid) == pytest.approx(min(expected, 1.0), abs=1e-12)

    def test_relabelled_ties_leave_h_unchanged(self, grid):
        n = 10
        model = prop_service.build_prop_model(n)
        stat = prop_service.blaker_statistic(n)
        exact = HFunctionSpec(name="blaker", statistic=stat)
        snapped = HFunctionSpec(name="blaker-snapped", statistic=lambda p0: np.round(stat(p0), 12))
        np.testing.assert_allclose(h_vector(model, exact, 0.5, grid), h_vector(model, snapped, 0.5, grid),
                                   atol=1e-12)

    def test_degenerate_nuisance_domain(self, grid):
        # D(1) = {0}: the mass sits on (8, 0)
        assert diff_service.h_d("score", 8, 0, 1.0, 8, 10, grid) == pytest.approx(1.0, abs=1e-12)

    def test_sup_dominates_every_nuisance_grid_value(self, coarse_grid):
        model = diff_service.build_diff_model(4, 5)
        spec = diff_service.h_spec_d(4, 5, "score", coarse_grid)
        d0 = 0.15
        h = h_vector(model, spec, d0, coarse_grid)
        etas = model.nuisance_grid(d0, coarse_grid)
        t = spec.statistic(d0)
        for eta in etas[::17]:
            single = tail_masses(t, model.mass(d0, [eta]), coarse_grid.tie_tol)[0]
            assert np.all(h >= single - 1e-12)

    def test_theta_outside_range(self, grid):
        model = prop_service.build_prop_model(5)
        with pytest.raises(InputError):
            h_vector(model, prop_service.h_spec(5, "cp"), 1.2, grid)

    def test_unknown_point(self, grid):
        model = prop_service.build_prop_model(5)
        with pytest.raises(InputError):
            h_eval(model, prop_service.h_spec(5, "cp"), 6, 0.5, grid)


class TestInversion:
    def test_cp_at_zero(self, grid):
        model = prop_service.build_prop_model(16)
        inv = invert_h(model, prop_service.h_spec(16, "cp"), 0, 0.05, grid)
        assert inv.lower == 0.0
        assert float(round_up(inv.upper)) == pytest.approx(0.2060, abs=1e-12)
        assert not inv.degenerate

    def test_cp_interior_point(self, grid):
        model = prop_service.build_prop_model(16)
        inv = invert_h(model, prop_service.h_spec(16, "cp"), 3, 0.05, grid)
        assert float(round_down(inv.lower)) == pytest.approx(0.0404, abs=1e-12)
        assert float(round_up(inv.upper)) == pytest.approx(0.4565, abs=1e-12)

    def test_single_grid_point(self):
        grid = GridPolicy(theta_points=2001)
        model = prop_service.build_prop_model(5)
        spike = HFunctionSpec(name="spike",
                              closed_form=lambda p0: np.full(6, 1.0 if abs(p0 - 0.5) < 1e-12 else 0.0))
        inv = invert_h(model, spike, 2, 0.05, grid)
        assert inv.lower == inv.upper == pytest.approx(0.5)

    def test_empty_level_set_warns(self, grid):
        model = prop_service.build_prop_model(5)
        flat = HFunctionSpec(name="flat", closed_form=lambda p0: np.zeros(6))
        with pytest.warns(CoarseGridWarning):
            inv = invert_h(model, flat, 2, 0.05, grid)
        assert inv.degenerate
        assert inv.lower == inv.upper

    def test_smaller_alpha_gives_wider_interval(self, grid):
        wide = prop_service.exact_limits(16, 0.01, "cp", grid)
        narrow = prop_service.exact_limits(16, 0.05, "cp", grid)
        assert wide.contains(narrow, tol=1e-9)

    def test_alpha_range(self, grid):
        model = prop_service.build_prop_model(5)
        with pytest.raises(InputError):
            invert_h(model, prop_service.h_spec(5, "cp"), 2, 0.0, grid)
        with pytest.raises(InputError):
            invert_h(model, prop_service.h_spec(5, "cp"), 2, 1.0, grid)


class TestAcceptanceRegion:
    def test_cp_at_one_half(self, grid):
        model = prop_service.build_prop_model(16)
        region = acceptance_region(model, prop_service.h_spec(16, "cp"), 0.5, 0.05, grid)
        assert region == list(range(4, 13))

    def test_alpha_zero_accepts_positive_h(self, grid):
        model = prop_service.build_prop_model(16)
        region = acceptance_region(model, prop_service.h_spec(16, "cp"), 0.5, 0.0, grid)
        assert region == list(range(17))

    def test_duality(self, grid):
        model = prop_service.build_prop_model(12)
        spec = prop_service.h_spec(12, "blaker")
        for p0 in P0_GRID[::5]:
            region = set(acceptance_region(model, spec, p0, 0.05, grid))
            for x in range(13):
                assert (x in region) == (h_eval(model, spec, x, p0, grid) > 0.05)

    def test_two_dimensional_points(self, coarse_grid):
        model = diff_service.build_diff_model(4, 5)
        spec = diff_service.h_spec_d(4, 5, "lrt", coarse_grid)
        region = acceptance_region(model, spec, 0.0, 0.05, coarse_grid)
        assert (2, 2) in region
        assert all(isinstance(p, tuple) and len(p) == 2 for p in region)


class TestValidity:
    @pytest.mark.parametrize("method", prop_service.EXACT_METHODS)
    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
    def test_single_proportion(self, grid, method, alpha):
        model = prop_service.build_prop_model(10)
        size = validate_p_value(model, prop_service.h_spec(10, method), alpha, P0_GRID, grid)
        assert size <= alpha + 1e-9

    @pytest.mark.parametrize("method", ["lrt", "score"])
    @pytest.mark.parametrize("alpha", [0.01, 0.05, 0.1])
    def test_difference(self, coarse_grid, method, alpha):
        model = diff_service.build_diff_model(4, 5)
        spec = diff_service.h_spec_d(4, 5, method, coarse_grid)
        size = validate_p_value(model, spec, alpha, np.linspace(-1, 1, 41), coarse_grid)
        assert size <= alpha + 1e-9

    def test_alpha_zero_never_rejects_with_mass(self, grid):
        model = prop_service.build_prop_model(10)
        assert validate_p_value(model, prop_service.h_spec(10, "blaker"), 0.0, P0_GRID, grid) == 0.0


class TestOptimizer:
    def test_constant_returns_left_end(self, grid):
        eta, value = sup_over_nuisance(lambda e: 0.3, (0.2, 0.8), grid)
        assert eta == 0.2
        assert value == 0.3

    def test_point_domain(self, grid):
        eta, value = sup_over_nuisance(lambda e: e + 1, (0.4, 0.4), grid)
        assert eta == 0.4
        assert value == pytest.approx(1.4)

    def test_empty_domain(self, grid):
        with pytest.raises(InputError):
            sup_over_nuisance(lambda e: e, (0.5, 0.2), grid)

    def test_polish_finds_interior_maximum(self):
        grid = GridPolicy(polish=True)
        f = lambda e: -(e - 0.30037) ** 2
        eta, value = sup_over_nuisance(f, (0.0, 1.0), grid, vectorized=True)
        assert eta == pytest.approx(0.30037, abs=1e-6)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_polish_never_below_grid(self, grid):
        f = lambda e: np.sin(40 * e)
        _, plain = sup_over_nuisance(f, (0.0, 1.0), grid, vectorized=True)
        _, polished = sup_over_nuisance(f, (0.0, 1.0), GridPolicy(polish=True), vectorized=True)
        assert polished >= plain

    def test_golden_section_per_lane(self):
        centres = np.array([0.1, 0.5, 0.9])
        x, fx = golden_section_max(lambda e: -(e - centres) ** 2, np.zeros(3), np.ones(3))
        np.testing.assert_allclose(x, centres, atol=1e-8)

    def test_lane_sup_polishes_each_lane(self):
        etas = np.linspace(0.0, 1.0, 11)
        centres = np.array([0.13, 0.57])
        f = lambda e: -(e - centres) ** 2
        values = -(etas[:, None] - centres) ** 2
        x, _ = lane_sup(f, etas, values)
        np.testing.assert_allclose(x, [0.1, 0.6])
        x, fx = lane_sup(f, etas, values, iterations=48)
        np.testing.assert_allclose(x, centres, atol=1e-6)
        assert np.all(fx >= values.max(axis=0))

    def test_one_setting_drives_nuisance_sup_and_mle(self, monkeypatch):
        seen = []
        real = optimizer.golden_section_max

        def spy(f, lo, hi, iterations=48):
            seen.append(iterations)
            return real(f, lo, hi, iterations)

        monkeypatch.setattr(optimizer, "golden_section_max", spy)
        grid = GridPolicy(theta_points=50, nuisance_points=51, polish=True, golden_iterations=17)
        diff_service.constrained_mle_p2(3, 7, 0.1, 8, 10, grid)
        model = diff_service.build_diff_model(3, 4)
        h_vector(model, diff_service.h_spec_d(3, 4, "score", grid), 0.2, grid)
        assert seen
        assert set(seen) == {17}


class TestDeterminism:
    def test_thread_count_does_not_change_results(self, coarse_grid):
        model = prop_service.build_prop_model(16)
        spec = prop_service.h_spec(16, "blaker")
        thetas = np.linspace(0, 1, 51)
        a = h_matrix(model, spec, thetas, coarse_grid, threads=1)
        b = h_matrix(model, spec, thetas, coarse_grid, threads=2)
        assert np.array_equal(a, b)
        t1, _ = invert_all(model, spec, 0.05, coarse_grid, threads=1)
        t8, _ = invert_all(model, spec, 0.05, coarse_grid, threads=8)
        assert np.array_equal(t1.lower, t8.lower)
        assert np.array_equal(t1.upper, t8.upper)
