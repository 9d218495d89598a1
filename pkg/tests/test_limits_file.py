import numpy as np
import pandas as pd
import pytest

from classifier.method_classifier import classify_method
from engine.errors import InputError, UsageError
from extractor.limits_file import format_limits, load_limits, read_limits, write_limits
from services import diff_service, prop_service
from services.validate_service import validate_limits


class TestLimitsFile:
    def test_round_trip_is_exact(self, tmp_path, cp16):
        path = tmp_path / "cp.csv"
        write_limits(path, cp16)
        loaded = load_limits(path, prop_service.build_prop_model(16))
        np.testing.assert_array_equal(loaded.lower, cp16.lower)
        np.testing.assert_array_equal(loaded.upper, cp16.upper)
        assert loaded.meta["method"] == "cp"
        assert loaded.meta["alpha"] == 0.05

    def test_header(self, cp16):
        text = format_limits(cp16)
        assert text.startswith("# design: prop\n# n: 16\n# alpha: 0.05\n# method: cp\nx,lower,upper\n")

    def test_two_dimensional_round_trip(self, tmp_path):
        table = diff_service.baseline_limits_d(3, 4, 0.05, "wald")
        path = tmp_path / "wald.csv"
        write_limits(path, table)
        header, frame = read_limits(path)
        assert header["design"] == "diff"
        assert list(frame.columns) == ["x", "y", "lower", "upper"]
        loaded = load_limits(path, diff_service.build_diff_model(3, 4))
        np.testing.assert_array_equal(loaded.lower, table.lower)

    def test_missing_row_is_named(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("# design: prop\n# n: 2\nx,lower,upper\n0,0,0.5\n1,0.1,0.9\n")
        with pytest.raises(InputError, match=r"Missing row for sample point \(2,\)"):
            load_limits(path, prop_service.build_prop_model(2))

    def test_unreadable(self, tmp_path):
        with pytest.raises(InputError):
            read_limits(tmp_path / "absent.csv")

    def test_no_rows(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("# design: prop\n")
        with pytest.raises(InputError):
            read_limits(path)


class TestValidation:
    @pytest.fixture
    def model(self):
        return prop_service.build_prop_model(2)

    def test_clean_frame(self, model):
        frame = pd.DataFrame({"x": [0, 1, 2], "lower": [0.0, 0.1, 0.4], "upper": [0.6, 0.9, 1.0]})
        assert validate_limits(frame, model) == []

    def test_every_issue_reported(self, model):
        frame = pd.DataFrame({"x": [0, 1, 1, 5], "lower": [0.7, 0.1, 0.1, 0.2], "upper": [0.6, 0.9, 0.9, 0.3]})
        issues = validate_limits(frame, model, {"design": "prop", "n": "3"})
        text = "\n".join(issues)
        assert "Header n=3 does not match model n=2" in text
        assert "lower > upper at (0)" in text
        assert "Duplicate row for sample point (1,)" in text
        assert "Missing row for sample point (2,)" in text
        assert "Row (5,) is not a sample point" in text

    def test_missing_column(self, model):
        frame = pd.DataFrame({"x": [0, 1, 2], "lower": [0.0, 0.1, 0.4]})
        assert validate_limits(frame, model) == ["Missing column(s): upper"]

    def test_non_numeric(self, model):
        frame = pd.DataFrame({"x": [0, 1, 2], "lower": ["0", "abc", "0.4"], "upper": [0.6, 0.9, 1.0]})
        assert validate_limits(frame, model) == ["lower not numeric at (1)"]

    def test_design_mismatch(self, model):
        frame = pd.DataFrame({"x": [0, 1, 2], "lower": [0.0, 0.1, 0.4], "upper": [0.6, 0.9, 1.0]})
        issues = validate_limits(frame, model, {"design": "diff"})
        assert issues == ["Header design 'diff' does not match model 'prop'"]

    def test_header_mismatch_keeps_row_checks(self, model):
        frame = pd.DataFrame({"x": [0, 1], "lower": [0.0, 0.1], "upper": [0.6, 0.9]})
        issues = validate_limits(frame, model, {"design": "prop", "n": "4"})
        assert issues == ["Header n=4 does not match model n=2", "Missing row for sample point (2,)"]


class TestMethodNames:
    @pytest.mark.parametrize("text, family, tag", [
        ("Clopper-Pearson", "prop", "cp"),
        ("CP2", "prop", "blaker"),
        ("score", "prop", "wilson"),
        ("score", "diff", "score"),
        ("likelihood", "diff", "lrt"),
        ("M", "refine", "M"),
        ("fixed-point", "refine", "Minf"),
        ("none", "refine", "none"),
    ])
    def test_aliases(self, text, family, tag):
        assert classify_method(text, family) == tag

    def test_unknown(self):
        with pytest.raises(UsageError, match="expected one of"):
            classify_method("agresti-coull", "prop")
