import numpy as np
import pytest

from engine.errors import InputError
from engine.hfunction import h_vector
from services import prop_service
from services.coverage_engine import icp_single_prop

# n = 16, alpha = 0.05, reported at four decimals
CP_LOWER = [0.0000, 0.0015, 0.0155, 0.0404, 0.0726, 0.1101, 0.1519, 0.1975, 0.2465,
            0.2987, 0.3543, 0.4133, 0.4762, 0.5435, 0.6165, 0.6976, 0.7940]
CP_UPPER = [0.2060, 0.3024, 0.3835, 0.4565, 0.5238, 0.5867, 0.6457, 0.7013, 0.7535,
            0.8025, 0.8481, 0.8899, 0.9274, 0.9596, 0.9845, 0.9985, 1.0000]
BLAKER_LOWER = [0.0000, 0.0032, 0.0226, 0.0531, 0.0902, 0.1321, 0.1746, 0.2011, 0.2717,
                0.3004, 0.3682, 0.4344, 0.5000, 0.5655, 0.6317, 0.6995, 0.7988]
BLAKER_UPPER = [0.2012, 0.3005, 0.3683, 0.4345, 0.5000, 0.5656, 0.6318, 0.6996, 0.7283,
                0.7989, 0.8254, 0.8679, 0.9098, 0.9469, 0.9774, 0.9968, 1.0000]
LRT_LOWER = [0.0000, 0.0032, 0.0226, 0.0531, 0.0902, 0.1205, 0.1462, 0.1727, 0.2592,
             0.2884, 0.3613, 0.4311, 0.5000, 0.5688, 0.6386, 0.7115, 0.8262]
LRT_UPPER = [0.1738, 0.2885, 0.3614, 0.4312, 0.5000, 0.5689, 0.6387, 0.7116, 0.7408,
             0.8273, 0.8538, 0.8795, 0.9098, 0.9469, 0.9774, 0.9968, 1.0000]


def reported(table):
    r = table.reported()
    return r.lower, r.upper


class TestHFunctions:
    def test_cp_h_at_boundary(self):
        assert prop_service.cp_h(16, 0, 0.0) == 1.0

    @pytest.mark.parametrize("n", [5, 16])
    @pytest.mark.parametrize("method", prop_service.EXACT_METHODS)
    def test_reflection_identity(self, grid, n, method):
        model = prop_service.build_prop_model(n)
        spec = prop_service.h_spec(n, method)
        for p0 in np.linspace(0, 1, 101):
            h = h_vector(model, spec, p0, grid)
            mirrored = h_vector(model, spec, 1.0 - p0, grid)
            np.testing.assert_allclose(h, mirrored[::-1], atol=1e-12)

    def test_lrt_maximum_at_mle(self, grid):
        assert prop_service.lrt_h(16, 4, 0.25, grid) == pytest.approx(1.0, abs=1e-12)

    def test_scalar_wrappers_agree_with_engine(self, grid):
        model = prop_service.build_prop_model(12)
        h = h_vector(model, prop_service.h_spec(12, "blaker"), 0.3, grid)
        assert prop_service.blaker_h(12, 5, 0.3, grid) == pytest.approx(h[5])

    def test_invalid_point(self):
        with pytest.raises(InputError):
            prop_service.cp_h(16, 17, 0.5)
        with pytest.raises(InputError):
            prop_service.h_spec(16, "wald")


class TestExactIntervals:
    def test_clopper_pearson_table(self, cp16):
        lower, upper = reported(cp16)
        np.testing.assert_allclose(lower, CP_LOWER, atol=1e-4 + 1e-9)
        np.testing.assert_allclose(upper, CP_UPPER, atol=1e-4 + 1e-9)

    def test_blaker_table(self, blaker16):
        lower, upper = reported(blaker16)
        np.testing.assert_allclose(lower, BLAKER_LOWER, atol=1e-4 + 1e-9)
        np.testing.assert_allclose(upper, BLAKER_UPPER, atol=1e-4 + 1e-9)

    def test_lrt_table(self, lrt16):
        lower, upper = reported(lrt16)
        np.testing.assert_allclose(lower, LRT_LOWER, atol=1e-4 + 1e-9)
        np.testing.assert_allclose(upper, LRT_UPPER, atol=1e-4 + 1e-9)

    def test_total_lengths(self, cp16, blaker16, lrt16):
        assert cp16.til() == pytest.approx(6.9380, abs=2e-4)
        assert blaker16.til() == pytest.approx(6.5043, abs=2e-4)
        assert lrt16.til() == pytest.approx(6.6115, abs=2e-4)

    def test_blaker_inside_clopper_pearson(self, cp16, blaker16):
        assert cp16.contains(blaker16, tol=1e-6)

    def test_blaker_inside_clopper_pearson_n30(self, grid):
        cp = prop_service.exact_limits(30, 0.05, "cp", grid)
        blaker = prop_service.exact_limits(30, 0.05, "blaker", grid)
        assert cp.contains(blaker, tol=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("n", [16, 30, 100])
    @pytest.mark.parametrize("method", prop_service.EXACT_METHODS)
    def test_exact_coverage(self, grid, n, method):
        table = prop_service.exact_limits(n, 0.05, method, grid)
        assert icp_single_prop(table, n).icp >= 0.95 - 1e-9

    def test_nesting(self, grid):
        assert prop_service.nesting_holds(16, "blaker", (0.10, 0.05), grid)

    def test_meta(self, cp16):
        assert cp16.meta["method"] == "cp"
        assert cp16.meta["n"] == 16
        assert list(cp16.to_frame().columns) == ["x", "lower", "upper"]


class TestBaselines:
    def test_wald_keeps_negative_lower(self):
        table = prop_service.baseline_limits(16, 0.05, "wald")
        lo, hi = table.rounded().interval_at(3)
        assert lo == pytest.approx(-0.0038, abs=1e-12)
        assert hi == pytest.approx(0.3788, abs=1e-12)
        assert table.interval_at(0) == (0.0, 0.0)

    def test_wald_total_length(self):
        assert prop_service.baseline_limits(16, 0.05, "wald").til() == pytest.approx(6.0559, abs=1e-3)

    def test_wilson_at_zero(self):
        lo, hi = prop_service.baseline_limits(16, 0.05, "wilson").rounded().interval_at(0)
        assert lo == pytest.approx(0.0, abs=1e-12)
        assert hi == pytest.approx(0.1937, abs=1e-12)

    def test_sample_proportion(self):
        table = prop_service.baseline_limits(16, 0.05, "sample_prop")
        assert table.interval_at(8) == (0.5, 0.5)
        assert table.til() == 0.0

    def test_custom_point_length_checked(self):
        with pytest.raises(InputError):
            prop_service.baseline_limits(4, 0.05, "custom_point", values=[0.0, 0.5, 1.0])

    def test_unknown_method(self):
        with pytest.raises(InputError):
            prop_service.prop_limits(4, 0.05, "agresti")


class TestSymmetry:
    def test_zero_lower_gives_unit_upper(self):
        table = prop_service.baseline_limits(6, 0.05, "custom_point", values=[0.0] * 7)
        completed = prop_service.complete_by_symmetry(table)
        np.testing.assert_array_equal(completed.upper, np.ones(7))

    def test_reconstructs_clopper_pearson_upper(self, cp16):
        completed = prop_service.complete_by_symmetry(cp16)
        np.testing.assert_allclose(completed.upper, cp16.upper, atol=2e-6)

    def test_idempotent(self, cp16):
        once = prop_service.complete_by_symmetry(cp16)
        twice = prop_service.complete_by_symmetry(once)
        np.testing.assert_array_equal(once.lower, twice.lower)
        np.testing.assert_array_equal(once.upper, twice.upper)
