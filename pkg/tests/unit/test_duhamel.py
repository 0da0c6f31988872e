"""
Unit tests for the Duhamel product-integration weights and the time-domain helpers.
"""
import pytest
import sys
import os

import numpy as np
from scipy.linalg import toeplitz

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.duhamel import (
    compose_weights,
    duhamel_apply,
    duhamel_weights,
    gronwall_envelope,
    retarded_apply,
    stencil_weights,
    toeplitz_apply,
    volterra_march,
    wave_stencil,
)
from services.error_handler import DomainError


class TestDuhamelWeights:
    """Linear sources are integrated exactly by the product rule."""

    def setup_method(self):
        self.h = 0.05
        self.t = np.arange(401) * self.h

    def test_critical_mode(self):
        """D₀ t = t³/6."""
        u = duhamel_apply(0.0, self.t, self.h)
        expected = self.t ** 3 / 6.0
        np.testing.assert_allclose(u, expected, rtol=0, atol=1e-11 * expected.max())

    def test_oscillating_mode(self):
        """D_{ω²} t = (ωt − sin ωt)/ω³."""
        w = 1.7
        u = duhamel_apply(w * w, self.t, self.h)
        expected = (w * self.t - np.sin(w * self.t)) / w ** 3
        np.testing.assert_allclose(u, expected, rtol=0, atol=1e-11 * np.abs(expected).max())

    def test_growing_mode(self):
        """D_{−κ²} t = (sinh κt − κt)/κ³."""
        k = 0.6
        u = duhamel_apply(-k * k, self.t, self.h)
        expected = (np.sinh(k * self.t) - k * self.t) / k ** 3
        np.testing.assert_allclose(u, expected, rtol=0, atol=1e-11 * np.abs(expected).max())

    def test_small_argument_series_is_continuous(self):
        """The first weight has no jump where the series hands over."""
        below = duhamel_weights(0.0999999 / self.h ** 2, self.h, 3)
        above = duhamel_weights(0.1000001 / self.h ** 2, self.h, 3)
        np.testing.assert_allclose(below, above, rtol=1e-5)

    def test_real_and_complex_inputs(self):
        """Real x gives real weights; complex x keeps the imaginary part."""
        assert not np.iscomplexobj(duhamel_weights(2.0, self.h, 10))
        W = duhamel_weights(2.0 + 1.0j, self.h, 10)
        assert np.iscomplexobj(W)
        assert np.any(W.imag != 0.0)

    def test_array_of_modes(self):
        """One row per value of x."""
        W = duhamel_weights(np.array([0.0, 1.0, -1.0]), self.h, 20)
        assert W.shape == (3, 20)
        np.testing.assert_allclose(W[1], duhamel_weights(1.0, self.h, 20))

    def test_rejects_nonpositive_step(self):
        """The time step must be positive."""
        with pytest.raises(DomainError):
            duhamel_weights(1.0, 0.0, 10)

    def test_retarded_is_negated(self):
        """The retarded inverse is −D_x."""
        f = np.sin(self.t) * self.t
        np.testing.assert_allclose(retarded_apply(0.5, f, self.h), -duhamel_apply(0.5, f, self.h))


class TestConvolutions:
    """Test Toeplitz convolution helpers."""

    def setup_method(self):
        rng = np.random.default_rng(11)
        self.a = rng.normal(size=64)
        self.b = rng.normal(size=64)
        self.f = rng.normal(size=64)

    def test_toeplitz_matches_matrix(self):
        """Causal convolution equals the lower-triangular Toeplitz product."""
        T = np.tril(toeplitz(self.a))
        np.testing.assert_allclose(toeplitz_apply(self.a, self.f), T @ self.f, atol=1e-12)

    def test_composition(self):
        """Composed weights act like applying both operators in turn."""
        lhs = toeplitz_apply(compose_weights(self.a, self.b), self.f)
        rhs = toeplitz_apply(self.a, toeplitz_apply(self.b, self.f))
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)


class TestWaveStencil:
    """Test the sinc-corrected (mass + ∂²) stencil."""

    def test_stencil_weights_second_derivative(self):
        """Three centred points give the classical second difference."""
        a = stencil_weights([-1, 0, 1], [0.0, 0.0, 1.0], 0.5)
        np.testing.assert_allclose(a, np.array([1.0, -2.0, 1.0]) / 0.25, atol=1e-12)

    def test_cubic_with_hat_correction(self):
        """On t³ the operator gives m·(t³ − h²t) + 6t, last samples included."""
        h, mass = 0.1, 2.0
        t = 1.0 + np.arange(30) * h
        out = wave_stencil(np.concatenate([np.zeros(3), t ** 3]), h, mass)
        expected = mass * (t ** 3 - h * h * t) + 6.0 * t
        np.testing.assert_allclose(out[6:], expected[3:], rtol=1e-6)

    def test_massless_quadratic(self):
        """Without mass a quadratic maps to its second derivative."""
        h = 0.05
        t = np.arange(40) * h
        out = wave_stencil(np.concatenate([np.zeros(4), (t + 1.0) ** 2]), h, 0.0)
        np.testing.assert_allclose(out[7:], 2.0, atol=1e-6)

    def test_sinc_symbol(self):
        """Interior response to a slow cosine is (m − ν²)/sinc⁴(νh/2)."""
        h, mass, nu = 0.05, 1.5, 2.0
        t = np.arange(400) * h
        out = wave_stencil(np.cos(nu * t), h, mass)
        symbol = (mass - nu ** 2) / np.sinc(nu * h / (2.0 * np.pi)) ** 4
        np.testing.assert_allclose(out[10:-10], symbol * np.cos(nu * t[10:-10]), atol=1e-6)

    def test_too_short(self):
        """Seven samples are needed."""
        with pytest.raises(DomainError):
            wave_stencil(np.zeros(6), 0.1, 1.0)


class TestVolterraMarch:
    """Test the step-by-step Volterra solver."""

    def test_matches_dense_solve(self):
        """Marching agrees with solving (I + W)φ = rhs directly."""
        rng = np.random.default_rng(5)
        w = 0.1 * rng.normal(size=50)
        rhs = rng.normal(size=50)
        dense = np.eye(50) + np.tril(toeplitz(w))
        np.testing.assert_allclose(volterra_march(w, rhs), np.linalg.solve(dense, rhs), atol=1e-12)

    def test_singular_diagonal(self):
        """1 + w[0] = 0 cannot be marched."""
        with pytest.raises(DomainError):
            volterra_march(np.array([-1.0, 0.1]), np.ones(2))


class TestGronwallEnvelope:
    """Test the geometric envelope."""

    def test_closed_form(self):
        """E(n) = α·S₀(n)·(1 − α)^{−(n+1)}."""
        E = gronwall_envelope(np.array([0.5, 0.1]), np.ones(5))
        n = np.arange(5)
        np.testing.assert_allclose(E, 0.5 * (n + 1) * 2.0 ** (n + 1))

    def test_infinite_when_alpha_reaches_one(self):
        """No finite envelope once α ≥ 1."""
        E = gronwall_envelope(np.array([1.0]), np.ones(3))
        assert np.all(np.isinf(E))
