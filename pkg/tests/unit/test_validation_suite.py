"""
Unit tests for the validation suite: selected checks, failure recording and
the sensitivity of the checks to a deliberately broken density.
"""
import pytest
import sys
import os

import numpy as np

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.error_handler import DomainError, ValidationFailure
from services.spectral_core import eval_rho
from services.validation_suite import (
    STABLE_ZEROS,
    ValidationSuite,
    run_validation,
    stable_configuration,
)

FAST_CHECKS = [
    "plemelj_jump",
    "F_positive_increasing",
    "characteristic_identity",
    "constraint_residuals",
    "cosmology_mass",
]


class TestStableConfiguration:
    """Test the synthetic stable coefficients."""

    def test_offset_only_in_b0(self):
        full, local = stable_configuration(1.0, offset=1e-6)
        assert full.b0 - local.b0 == pytest.approx(1e-6)
        assert (full.a1, full.a2, full.b1, full.b2) == (local.a1, local.a2, local.b1, local.b2)

    def test_zeros_in_gap(self):
        assert all(0.0 < g < 4.0 for g in STABLE_ZEROS)


class TestSuite:
    """Test check selection and reporting."""

    def test_fast_checks_pass(self):
        report = ValidationSuite(quick=True).run(FAST_CHECKS)
        assert report.passed, report.to_dict()
        assert [c.name for c in report.checks] == FAST_CHECKS
        assert all(c.elapsed >= 0.0 for c in report.checks)

    def test_stieltjes_oracle(self):
        result = ValidationSuite(quick=True).run(["stieltjes_oracle"]).get("stieltjes_oracle")
        assert result.passed
        assert result.details["points"] == 40

    def test_tensor_checks(self):
        report = ValidationSuite(quick=True).run(["tensor_decomposition", "de_donder", "projectors"])
        assert report.passed, report.to_dict()

    def test_tensor_grid_reaches_coarse_steps(self):
        """The decomposition runs where the highest mode has k·dt near 0.7."""
        result = ValidationSuite(quick=True).run(["tensor_decomposition"]).get("tensor_decomposition")
        assert result.passed, result.details
        assert result.details["max_kh"] >= 0.65

    def test_zero_set_figure(self):
        """The b₂ sweep shows the pair-to-two-real split and crossings match the zeros."""
        result = ValidationSuite(quick=True).run(["zero_set_figure"]).get("zero_set_figure")
        assert result.passed, result.details
        assert result.details["panels"] == 8
        assert result.details["topology_defects"] == {}

    def test_unknown_check(self):
        with pytest.raises(KeyError):
            ValidationSuite().run(["no_such_check"])

    def test_unknown_tolerances_ignored(self):
        suite = ValidationSuite({"dual_route": 5e-3, "colour": 1.0})
        assert suite.tol["dual_route"] == 5e-3
        assert "colour" not in suite.tol

    def test_tight_tolerance_fails(self):
        """The measured value is reported against the tolerance it missed."""
        report = ValidationSuite({"mass_rel": 1e-9}).run(["cosmology_mass"])
        result = report.get("cosmology_mass")
        assert not result.passed
        assert result.value > 1e-9
        assert report.failed == ["cosmology_mass"]

    def test_raising_check_is_recorded(self, mocker):
        """A check that raises is recorded as failed with the error."""
        mocker.patch("services.validation_suite.invert_mass", side_effect=DomainError("broken"))
        result = ValidationSuite().run(["cosmology_mass"]).get("cosmology_mass")
        assert not result.passed
        assert np.isnan(result.value)
        assert result.details["error"] == "DomainError"


class TestSensitivity:
    """Broken inputs must be caught."""

    def test_sign_flipped_density_breaks_jump(self, mocker):
        """Flipping the sign of ρ makes the boundary-jump check fail."""
        mocker.patch("services.validation_suite.eval_rho", side_effect=lambda x, m: -eval_rho(x, m))
        with pytest.raises(ValidationFailure) as exc:
            run_validation(names=["plemelj_jump"])
        assert exc.value.report["failed"] == ["plemelj_jump"]

    def test_no_raise_returns_report(self, mocker):
        mocker.patch("services.validation_suite.eval_rho", side_effect=lambda x, m: -eval_rho(x, m))
        report = run_validation(names=["plemelj_jump"], raise_on_failure=False)
        assert not report.passed
