"""
Unit tests for the characteristic function, zero finding and the auxiliary-field algebra.
"""
import pytest
import sys
import os

import numpy as np

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.error_handler import DomainError, HypothesisError, RootFindingError
from services.mode_algebra import (
    PrototypeCoefficients,
    SearchBox,
    Zero,
    ZeroSet,
    auxiliary_profiles,
    betas_from_gammas,
    characteristic_F,
    check_constraint,
    coefficients_from_zeros,
    convexity_probe,
    find_zeros,
    normal_form_split,
    partial_fractions,
    s_mode_b2_thresholds,
    s_mode_coefficients,
    tt_mode_coefficients,
    varsigma_profile,
)
from services.spectral_core import PhysicalParams


def _nearest(values, target):
    values = np.asarray(values, dtype=complex)
    return float(np.min(np.abs(values - target)))


class TestPrototypeCoefficients:
    """Test the coefficient record."""

    def setup_method(self):
        self.coeffs = PrototypeCoefficients(0.1, 0.2, 1.0, -2.0, 3.0)

    def test_with_b_keeps_a(self):
        """with_b replaces the b's only."""
        other = self.coeffs.with_b(4.0, 5.0, 6.0)
        assert (other.a1, other.a2) == (0.1, 0.2)
        assert (other.b0, other.b1, other.b2) == (4.0, 5.0, 6.0)

    def test_scaled_b(self):
        """scaled_b multiplies every b."""
        other = self.coeffs.scaled_b(2.0)
        assert other.as_dict() == {"a1": 0.1, "a2": 0.2, "b0": 2.0, "b1": -4.0, "b2": 6.0}


class TestCoefficientsFromZeros:
    """Test the inverse map from three zeros to (b₀, b₁, b₂)."""

    def test_characteristic_vanishes_at_zeros(self, m):
        """F_char vanishes at the prescribed zeros."""
        zeros = [0.25, 1.0, 2.25]
        coeffs = coefficients_from_zeros(zeros, 0.0, 0.0, m)
        for g in zeros:
            value = abs(characteristic_F(g, coeffs, m))
            assert value < 1e-13 * max(1.0, abs(coeffs.b0), abs(coeffs.b1), abs(coeffs.b2))

    def test_complex_pair_gives_real_coefficients(self, m):
        """A conjugate pair plus a real zero yields real b's."""
        coeffs = coefficients_from_zeros([-0.5, 1.0 + 2.0j, 1.0 - 2.0j], 0.3, 0.3, m)
        assert isinstance(coeffs.b1, float)
        assert abs(characteristic_F(1.0 + 2.0j, coeffs, m)) < 1e-12

    def test_unpaired_complex_zero_rejected(self, m):
        """A complex zero without its conjugate cannot give real coefficients."""
        with pytest.raises(DomainError):
            coefficients_from_zeros([-0.5, 1.0 + 2.0j, 3.0], 0.0, 0.0, m)

    def test_wrong_count_rejected(self, m):
        """Exactly three zeros are needed."""
        with pytest.raises(DomainError):
            coefficients_from_zeros([0.5, 1.0], 0.0, 0.0, m)

    def test_coincident_zeros_rejected(self, m):
        """Zeros closer than the separation tolerance are rejected."""
        with pytest.raises(RootFindingError):
            coefficients_from_zeros([0.5, 0.5, 1.0], 0.0, 0.0, m)


class TestFindZeros:
    """Test zero location on the cut plane."""

    def test_recovers_stable_zeros(self, stable_local, m):
        """The three prescribed zeros in (0, 4m²) are found to high accuracy."""
        zs = find_zeros(stable_local, m)
        inside = np.sort(zs.real_gammas[(zs.real_gammas > 0) & (zs.real_gammas < 4.0 * m * m)])
        np.testing.assert_allclose(inside, [0.25, 1.0, 2.25], atol=1e-9)

    def test_recovers_negative_zero(self, unstable_coefficients, m):
        """A prescribed negative zero is classified real_negative."""
        zs = find_zeros(unstable_coefficients, m)
        negative = [z for z in zs.zeros if z.cls == "real_negative"]
        assert negative
        assert _nearest([z.gamma for z in negative], -0.25) < 1e-9

    def test_complex_pair_found(self, m):
        """A prescribed conjugate pair is found by the argument principle."""
        coeffs = coefficients_from_zeros([-0.5, 1.0 + 2.0j, 1.0 - 2.0j], 0.3, 0.3, m)
        zs = find_zeros(coeffs, m)
        assert zs.winding_count >= 1
        assert _nearest(zs.gammas, 1.0 + 2.0j) < 1e-8
        assert _nearest(zs.gammas, 1.0 - 2.0j) < 1e-8

    def test_b0_zero_includes_origin(self, m):
        """b₀ = 0 puts a zero at γ = 0."""
        coeffs = PrototypeCoefficients(0.0, 0.0, 0.0, -1.0, 0.5)
        zs = find_zeros(coeffs, m)
        assert _nearest(zs.gammas, 0.0) == 0.0

    def test_residuals_are_recorded(self, stable_local, m):
        """Every zero carries its residual and the set serialises."""
        payload = find_zeros(stable_local, m).to_dict()
        assert payload["count"] == len(payload["zeros"])
        assert all(z["residual"] >= 0 for z in payload["zeros"])
        assert {"re", "im", "residual", "class"} <= set(payload["zeros"][0])

    def test_default_search_box(self):
        """The real segment stops just below the threshold."""
        box = SearchBox.default(1.0)
        assert box.real_lo == -100.0
        assert box.real_hi < 4.0
        assert box.im_lo > 0


class TestBetasAndFractions:
    """Test β-coefficients and the partial-fraction expansion."""

    def test_betas_are_symmetric_functions(self):
        """P(M) = (M − 1)(M − 2)(M − 3)."""
        b = betas_from_gammas([1.0, 2.0, 3.0])
        assert (b.beta2, b.beta1, b.beta0) == pytest.approx((-6.0, 11.0, -6.0))
        np.testing.assert_allclose(np.sort(b.roots().real), [1.0, 2.0, 3.0])

    def test_betas_need_three_zeros(self):
        """Two zeros are not enough."""
        with pytest.raises(RootFindingError):
            betas_from_gammas([1.0, 2.0])

    def test_partial_fractions_reproduce_ratio(self):
        """Σ Aᵢ/(M − γᵢ) equals (M − a₁)(M − a₂)/P(M)."""
        gammas = [0.5, 1.5 + 1.0j, 1.5 - 1.0j]
        fractions = partial_fractions(gammas, 0.2, 0.7)
        for M in (5.0, 40.0, 3.0 + 2.0j):
            lhs = sum(A / (M - g) for g, A in fractions)
            rhs = (M - 0.2) * (M - 0.7) / np.prod([M - g for g in gammas])
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestConvexityAndNormalForm:
    """Test the convexity probe and the tangent-line split."""

    def test_probe_derivatives(self, m):
        """A′ and A″ agree with centred differences."""
        a1, a2, g, h = 0.3, -0.4, -1.2, 1e-4
        A, A1, A2 = convexity_probe(a1, a2, m, g)
        Ap, A1p, _ = convexity_probe(a1, a2, m, g + h)
        Am, A1m, _ = convexity_probe(a1, a2, m, g - h)
        assert A1 == pytest.approx((Ap - Am) / (2 * h), rel=1e-6)
        assert A2 == pytest.approx((A1p - A1m) / (2 * h), rel=1e-5)

    def test_probe_is_convex(self, m):
        """A″ > 0 below threshold when a₁, a₂ < 4m²."""
        for g in (-50.0, -1.0, 0.0, 3.0):
            assert convexity_probe(0.0, 0.5, m, g)[2] > 0

    def test_probe_rejects_cut(self, m):
        """γ on the cut is outside the probe's domain."""
        with pytest.raises(DomainError):
            convexity_probe(0.0, 0.0, m, 5.0)

    def test_split_produces_three_real_zeros(self, m):
        """The tangent split with small offsets has three real zeros."""
        nf = normal_form_split((0.0, 0.0, -0.01), 0.0, 0.0, m, (1e-3, 1e-3))
        assert nf.zeros.count == 3
        assert len(nf.zeros.real_gammas) == 3
        slope = convexity_probe(0.0, 0.0, m, nf.gamma_tilde)[1]
        assert slope == pytest.approx(-0.01, rel=1e-6)
        assert nf.coeffs.b1 == pytest.approx(nf.q + nf.eps[1])

    def test_split_rejects_nonpositive_offsets(self, m):
        """Offsets must be strictly positive."""
        with pytest.raises(DomainError):
            normal_form_split((0.0, 0.0, -0.01), 0.0, 0.0, m, (0.0, 1e-3))


class TestAuxiliaryProfiles:
    """Test the auxiliary-field profiles and their constraint."""

    def setup_method(self):
        self.m = 1.0
        self.nf = normal_form_split((0.0, 0.0, -0.01), 0.0, 0.0, self.m, (1e-3, 1e-3))

    def test_constraint_residuals(self):
        """∫ĥⱼ dM/√(M − 4m²) = 1 for every profile."""
        profiles = auxiliary_profiles(self.nf.coeffs, betas_from_gammas(self.nf.zeros), self.m)
        residuals = check_constraint(profiles)
        assert set(residuals) == {0, 1, 2}
        assert max(residuals.values()) < 1e-6
        assert profiles.constraint_residuals == residuals

    def test_decay_constants_recorded(self):
        """Each profile obeys a 1/M bound with a finite constant."""
        profiles = auxiliary_profiles(self.nf.coeffs, betas_from_gammas(self.nf.zeros), self.m)
        assert all(np.isfinite(C) and C > 0 for C in profiles.decay_constants.values())

    def test_absent_profile(self):
        """ĥ₀ is absent when b₀ = 0."""
        coeffs = self.nf.coeffs.with_b(0.0, self.nf.coeffs.b1, self.nf.coeffs.b2)
        profiles = auxiliary_profiles(coeffs, betas_from_gammas(self.nf.zeros), self.m)
        assert profiles.indices == (1, 2)
        with pytest.raises(DomainError):
            profiles.h(0, np.array([5.0]))


class TestVarsigma:
    """Test the modified spectral density ς."""

    def test_mr_factor_tends_to_one(self, stable_local, m):
        """M·R(M) → 1 at large M."""
        sigma = varsigma_profile(stable_local, [0.25, 1.0, 2.25], m)
        assert sigma.kind == "varsigma"
        assert sigma.mr_factor(np.array([1e12]))[0] == pytest.approx(1.0, rel=1e-9)

    def test_a_above_threshold_rejected(self, m):
        """a above 4m² violates the positivity hypothesis."""
        coeffs = PrototypeCoefficients(5.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(HypothesisError):
            varsigma_profile(coeffs, [0.25, 1.0, 2.25], m)

    def test_zero_on_cut_rejected(self, m):
        """A zero on the cut is rejected."""
        coeffs = PrototypeCoefficients(0.0, 0.0, 1.0, 1.0, 1.0)
        with pytest.raises(HypothesisError):
            varsigma_profile(coeffs, [0.25, 1.0, 9.0], m)


class TestPhysicalMaps:
    """Test the S and TT sector coefficient maps."""

    def setup_method(self):
        self.params = PhysicalParams(m=1.0, xi=1.0, G=1e-4, mu=1.0)

    def test_s_mode(self):
        """a = 2m²/(6ξ − 1) in both slots, b₂ as given."""
        coeffs = s_mode_coefficients(self.params, b2=-0.5)
        assert coeffs.a1 == coeffs.a2 == pytest.approx(0.4)
        assert coeffs.b2 == -0.5
        assert coeffs.b0 < 0

    def test_tt_mode(self):
        """a = 4m², b₀ = 0, b₁ = 60/κ."""
        coeffs = tt_mode_coefficients(self.params, b2=1.0)
        assert coeffs.a1 == pytest.approx(4.0)
        assert coeffs.b0 == 0.0
        assert coeffs.b1 == pytest.approx(60.0 / self.params.kappa)

    def test_b2_required(self):
        """Without b₂ or its constant the map is undetermined."""
        with pytest.raises(DomainError):
            s_mode_coefficients(self.params)
        with pytest.raises(DomainError):
            tt_mode_coefficients(self.params)


def _scripted_zeros(q1, q2):
    """Stand-in zero finder: a pair above q₁, three real zeros in (q₂, q₁), two real at or below q₂"""
    def find(coeffs, m, search=None):
        b2 = coeffs.b2
        if b2 <= q2:
            zeros = (Zero(-0.01, 0.0, "real_negative"), Zero(2.5, 0.0, "real_nonneg"))
        elif b2 < q1:
            zeros = (Zero(-0.01, 0.0, "real_negative"), Zero(2.5, 0.0, "real_nonneg"),
                     Zero(3.5, 0.0, "real_nonneg"))
        else:
            zeros = (Zero(-0.01, 0.0, "real_negative"), Zero(3.0 + 1.0j, 0.0, "complex_pair_member"),
                     Zero(3.0 - 1.0j, 0.0, "complex_pair_member"))
        return ZeroSet(zeros)
    return find


class TestB2Thresholds:
    """Test the scan for the S-mode b₂ thresholds."""

    def setup_method(self):
        self.params = PhysicalParams(m=1.0, xi=1.0, G=1e-4, mu=1.0)

    def test_both_thresholds_located(self, mocker):
        """The pair landing on the real line and the zero leaving through the cut are both found."""
        mocker.patch("services.mode_algebra.find_zeros", side_effect=_scripted_zeros(-2.0, -20.0))
        found = s_mode_b2_thresholds(self.params)
        assert len(found) == 2
        q2, q1 = found[0]["b2"], found[1]["b2"]
        assert q2 < q1 < 0
        assert q2 == pytest.approx(-20.0, rel=1e-9)
        assert q1 == pytest.approx(-2.0, rel=1e-9)

    def test_topology_changes_across_each(self, mocker):
        """Zero count drops at q₂; the real count changes at q₁ with the count kept."""
        mocker.patch("services.mode_algebra.find_zeros", side_effect=_scripted_zeros(-2.0, -20.0))
        q2, q1 = s_mode_b2_thresholds(self.params)
        assert (q2["count_below"], q2["count_above"]) == (2, 3)
        assert (q2["real_below"], q2["real_above"]) == (2, 3)
        assert q1["count_below"] == q1["count_above"] == 3
        assert (q1["real_below"], q1["real_above"]) == (3, 1)

    def test_failed_scan_points_skipped(self, mocker):
        """Intervals touching a failed zero search are not bisected."""
        finder = _scripted_zeros(-2.0, -20.0)

        def flaky(coeffs, m, search=None):
            if coeffs.b2 > -3.0:
                raise RootFindingError("no convergence")
            return finder(coeffs, m, search)

        mocker.patch("services.mode_algebra.find_zeros", side_effect=flaky)
        found = s_mode_b2_thresholds(self.params)
        assert [t["count_below"] for t in found] == [2]

    def test_physical_scan_well_formed(self):
        """On the real characteristic function every reported threshold separates two topologies."""
        found = s_mode_b2_thresholds(self.params, b2_min=-100.0, b2_max=-1e-3, n_scan=10)
        values = [t["b2"] for t in found]
        assert values == sorted(values)
        for t in found:
            assert -100.0 <= t["b2"] <= -1e-3
            assert (t["count_below"], t["real_below"]) != (t["count_above"], t["real_above"])
