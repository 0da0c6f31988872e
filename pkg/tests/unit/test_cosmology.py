"""
Unit tests for renormalisation constants and the cosmological mass inversion.
"""
import logging

import pytest
import sys
import os

import numpy as np

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.cosmology import (
    ALPHA1_S_FIXED,
    CosmologyInputs,
    RenormalisationConstants,
    background_constants,
    fixed_linear_constants,
    hierarchy_ratio,
    hubble_and_lambda,
    invert_mass,
    planck_params,
    unstable_root_estimate,
)
from services.error_handler import DomainError
from services.mode_algebra import PrototypeCoefficients
from services.spectral_core import PhysicalParams


class TestConstants:
    """Test the renormalisation constants."""

    def test_fixed_values(self):
        """α̃₁ˢ = 1/(64π²) and α̃₁ᵀᵀ = 0."""
        assert fixed_linear_constants() == (pytest.approx(1.0 / (64.0 * np.pi ** 2)), 0.0)

    def test_background_relation(self):
        """α₁ + c₁ = 1/(64π²) whatever the renormalisation scale."""
        for mu in (0.3, 1.0, 7.0):
            params = PhysicalParams(m=1.0, xi=1.0, G=1e-4, mu=mu)
            alpha1, _, c1 = background_constants(params)
            assert alpha1 + c1 == pytest.approx(1.0 / (64.0 * np.pi ** 2), rel=1e-10)

    def test_for_params_keeps_free_knobs(self, physical_params):
        """Free constants pass through next to the background ones."""
        consts = RenormalisationConstants.for_params(physical_params, alpha3_S=0.5)
        assert consts.alpha3_S == 0.5
        assert consts.alpha1 == pytest.approx(background_constants(physical_params)[0])


class TestInstabilityRate:
    """Test the unstable root estimate."""

    def test_estimate(self, physical_params):
        """γ̃ = −16πG·α̃₁ˢ·m⁴."""
        expected = -16.0 * np.pi * 1e-4 * ALPHA1_S_FIXED
        assert unstable_root_estimate(physical_params) == pytest.approx(expected)

    def test_hierarchy_warning(self, physical_params, caplog):
        """A large b₂ breaks the hierarchy and logs a warning."""
        coeffs = PrototypeCoefficients(0.0, 0.0, 0.0, 1e-12, 1.0)
        with caplog.at_level(logging.WARNING, logger="services.cosmology"):
            unstable_root_estimate(physical_params, coeffs)
        assert "hierarchy ratio" in caplog.text

    def test_small_ratio_for_dominant_b1(self, physical_params):
        """With b₁ = 1 and b₂ = 0 the subleading terms are negligible."""
        gamma = unstable_root_estimate(physical_params)
        ratio = hierarchy_ratio(gamma, PrototypeCoefficients(0.0, 0.0, 0.0, 1.0, 0.0), 1.0)
        assert ratio < 1e-3


class TestMassInversion:
    """Test the inversion from observed Λ to the field mass."""

    def test_observed_mass(self):
        """Observed values give m ≈ 7.8e-3 eV."""
        assert invert_mass(CosmologyInputs()) == pytest.approx(7.8e-3, rel=0.03)

    def test_round_trip(self):
        """The inverted mass reproduces the input Λ."""
        inputs = CosmologyInputs()
        params = planck_params(invert_mass(inputs), inputs)
        _, Lambda = hubble_and_lambda(params, inputs)
        assert Lambda == pytest.approx(inputs.Lambda, rel=1e-10)

    @pytest.mark.parametrize("kwargs", [
        {"Omega_Lambda": 0.0},
        {"Omega_Lambda": 1.0},
        {"Lambda": -1.0},
        {"M_P": 0.0},
    ])
    def test_invalid_inputs(self, kwargs):
        """Ω_Λ outside (0, 1) and non-positive scales are rejected."""
        with pytest.raises(DomainError):
            CosmologyInputs(**kwargs)

    def test_zero_alpha_has_no_rate(self, physical_params):
        """Without α̃₁ˢ there is no instability to read Λ from."""
        with pytest.raises(DomainError):
            hubble_and_lambda(physical_params, CosmologyInputs(), alpha1_S=0.0)
