"""
Renormalisation constants, instability rate and the cosmological mass inversion.

All formulas are closed-form arithmetic. In reduced-Planck units (G = 1/(8π),
masses in M_P) the instability rate reads H² = 2α̃₁ˢm⁴ and Λ = 3Ω_ΛH².
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from services.error_handler import DomainError
from services.spectral_core import PhysicalParams, stieltjes_J

logger = logging.getLogger(__name__)

ALPHA1_S_FIXED = 1.0 / (64.0 * np.pi ** 2)
ALPHA1_TT_FIXED = 0.0
REDUCED_PLANCK_MASS_EV = 2.435e27
HIERARCHY_THRESHOLD = 1e-3


@dataclass(frozen=True)
class RenormalisationConstants:
    """Finite renormalisation ambiguities; α̃₃ˢ and α̃₄ᵀᵀ are free knobs entering b₂"""
    alpha1_S: float = ALPHA1_S_FIXED
    alpha1_TT: float = ALPHA1_TT_FIXED
    alpha2_S: float = 0.0
    alpha2_TT: float = 0.0
    alpha3_S: Optional[float] = None
    alpha4_TT: Optional[float] = None
    alpha1: Optional[float] = None
    d1: Optional[float] = None
    c1: Optional[float] = None

    @classmethod
    def for_params(cls, params: PhysicalParams, **free) -> "RenormalisationConstants":
        alpha1, d1, c1 = background_constants(params)
        return cls(alpha1=alpha1, d1=d1, c1=c1, **free)


@dataclass(frozen=True)
class CosmologyInputs:
    Omega_Lambda: float = 0.685
    Lambda: float = 7.15e-121
    M_P: float = REDUCED_PLANCK_MASS_EV

    def __post_init__(self):
        if not 0.0 < self.Omega_Lambda < 1.0:
            raise DomainError(f"Omega_Lambda must lie in (0, 1), got {self.Omega_Lambda}", field="Omega_Lambda")
        if not self.Lambda > 0.0:
            raise DomainError("Lambda must be positive", field="Lambda")
        if not self.M_P > 0.0:
            raise DomainError("M_P must be positive", field="M_P")


def background_constants(params: PhysicalParams) -> Tuple[float, float, float]:
    """(α₁, d₁, c₁) making the Minkowski background a solution"""
    log_term = 2.0 * np.euler_gamma + np.log(params.m ** 2 / (2.0 * params.mu ** 2))
    alpha1 = (-1.5 + log_term) / (64.0 * np.pi ** 2)
    d1 = -(-1.0 + log_term) / (16.0 * np.pi ** 2)
    c1 = -(-2.5 + log_term) / (64.0 * np.pi ** 2)
    return alpha1, d1, c1


def fixed_linear_constants() -> Tuple[float, float]:
    return ALPHA1_S_FIXED, ALPHA1_TT_FIXED


def unstable_root_estimate(params: PhysicalParams, coeffs=None,
                           alpha1_S: float = ALPHA1_S_FIXED) -> float:
    """
    γ̃ ≈ −b₀/b₁ = −16πG·α̃₁ˢ·m⁴.

    When coefficients are given, the subleading terms b₂γ̃² and γ̃(a − γ̃)²J(γ̃)
    are compared against b₁γ̃ and a warning is logged if either is not below
    the hierarchy threshold.
    """
    gamma_tilde = -16.0 * np.pi * params.G * alpha1_S * params.m ** 4
    if coeffs is not None:
        ratio = hierarchy_ratio(gamma_tilde, coeffs, params.m)
        if ratio > HIERARCHY_THRESHOLD:
            logger.warning(f"hierarchy ratio {ratio:.3e} exceeds {HIERARCHY_THRESHOLD}; γ̃ is only indicative")
    return gamma_tilde


def hierarchy_ratio(gamma_tilde: float, coeffs, m: float) -> float:
    leading = abs(coeffs.b1 * gamma_tilde)
    J = float(np.real(stieltjes_J(gamma_tilde, m)))
    sub = max(
        abs(coeffs.b2 * gamma_tilde ** 2),
        abs(gamma_tilde * (coeffs.a1 - gamma_tilde) * (coeffs.a2 - gamma_tilde) * J),
    )
    return sub / max(leading, 1e-300)


def hubble_and_lambda(params: PhysicalParams, inputs: CosmologyInputs,
                      alpha1_S: float = ALPHA1_S_FIXED) -> Tuple[float, float]:
    """H = √(−γ̃) and Λ = 3Ω_ΛH², in the units of params"""
    gamma_tilde = unstable_root_estimate(params, alpha1_S=alpha1_S)
    if not gamma_tilde < 0:
        raise DomainError("instability estimate must be negative", field="gamma_tilde")
    H = float(np.sqrt(-gamma_tilde))
    return H, 3.0 * inputs.Omega_Lambda * H ** 2


def planck_params(m_eV: float, inputs: CosmologyInputs, xi: float = 1.0) -> PhysicalParams:
    """Reduced-Planck units: masses in M_P and G = 1/(8π)"""
    return PhysicalParams(m=m_eV / inputs.M_P, xi=xi, G=1.0 / (8.0 * np.pi), mu=m_eV / inputs.M_P)


def invert_mass(inputs: CosmologyInputs, alpha1_S: float = ALPHA1_S_FIXED) -> float:
    """m = M_P·(Λ/(6Ω_Λα̃₁ˢ))^{1/4} in eV, Λ in M_P² units"""
    m_planck = (inputs.Lambda / (6.0 * inputs.Omega_Lambda * alpha1_S)) ** 0.25
    return float(m_planck * inputs.M_P)
