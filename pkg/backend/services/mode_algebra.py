"""
Mode Algebra: characteristic zeros, β-coefficients and auxiliary profiles
=========================================================================

Locates the zeros of the characteristic function
    F_char(γ) = γ(a₁ − γ)(a₂ − γ)J(γ) − (b₀ + b₁γ + b₂γ²)
on the cut plane, builds the β-coefficients and partial fractions of the local
factor, constructs the auxiliary Fourier profiles and their normalisation
constraint, realises the normal-form split and maps the physical S and TT
parameters onto prototype coefficients.

Key Features:
- Real zeros by log-spaced sign-change bracketing and Brent refinement
- Complex zeros by argument-principle subdivision and secant refinement
- Cut-absorption detection at the threshold and by winding mismatch
- Inverse map from three zeros to (b₀, b₁, b₂)
- ε-shrinking retries for the normal-form split
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize

from services.cosmology import RenormalisationConstants
from services.error_handler import (
    DomainError,
    HypothesisError,
    QuadratureError,
    RootFindingError,
    retrying_attempts,
)
from services.spectral_core import (
    PhysicalParams,
    SIXTEEN_PI2,
    SpectralDensity,
    eval_rho,
    stieltjes_J,
)
from utils.config import settings

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrototypeCoefficients:
    """Coefficients a₁, a₂, b₀, b₁, b₂ of the prototypical nonlocal equation"""
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float

    def with_b(self, b0: float, b1: float, b2: float) -> "PrototypeCoefficients":
        return replace(self, b0=b0, b1=b1, b2=b2)

    def scaled_b(self, factor: float) -> "PrototypeCoefficients":
        """Same a's, b's multiplied by factor (unit-normalised density readings)"""
        return replace(self, b0=self.b0 * factor, b1=self.b1 * factor, b2=self.b2 * factor)

    def as_dict(self) -> Dict[str, float]:
        return {"a1": self.a1, "a2": self.a2, "b0": self.b0, "b1": self.b1, "b2": self.b2}


@dataclass(frozen=True)
class Zero:
    """One zero γ of F_char with its residual and class"""
    gamma: complex
    residual: float
    cls: str  # real_negative | real_nonneg | complex_pair_member

    @property
    def is_real(self) -> bool:
        return self.cls != "complex_pair_member"


@dataclass(frozen=True)
class ZeroSet:
    """Zeros found inside a SearchBox"""
    zeros: Tuple[Zero, ...]
    absorbed_into_cut: bool = False
    winding_count: int = 0

    @property
    def count(self) -> int:
        return len(self.zeros)

    @property
    def gammas(self) -> np.ndarray:
        return np.array([z.gamma for z in self.zeros], dtype=complex)

    @property
    def real_gammas(self) -> np.ndarray:
        return np.array([z.gamma.real for z in self.zeros if z.is_real], dtype=float)

    def to_dict(self) -> Dict:
        return {
            "count": self.count,
            "absorbed_into_cut": self.absorbed_into_cut,
            "winding_count": self.winding_count,
            "zeros": [
                {"re": z.gamma.real, "im": z.gamma.imag, "residual": z.residual, "class": z.cls}
                for z in self.zeros
            ],
        }


@dataclass(frozen=True)
class SearchBox:
    """Real segment plus an upper-half-plane rectangle mirrored by conjugation"""
    real_lo: float
    real_hi: float
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    @classmethod
    def default(cls, m: float) -> "SearchBox":
        m2 = m * m
        return cls(-100.0 * m2, 4.0 * m2 - 1e-6, -100.0 * m2, 100.0 * m2, 1e-6, 100.0 * m2)


@dataclass(frozen=True)
class BetaCoefficients:
    """P(M) = M³ + β₂M² + β₁M + β₀ = ∏(M − γᵢ)"""
    beta0: float
    beta1: float
    beta2: float

    def P(self, M):
        M = np.asarray(M, dtype=complex)
        return M ** 3 + self.beta2 * M ** 2 + self.beta1 * M + self.beta0

    def roots(self) -> np.ndarray:
        return np.roots([1.0, self.beta2, self.beta1, self.beta0])


# ---------------------------------------------------------------------------
# Characteristic function
# ---------------------------------------------------------------------------

def characteristic_F(gamma, coeffs: PrototypeCoefficients, m: float):
    """γ(a₁ − γ)(a₂ − γ)J(γ) − (b₀ + b₁γ + b₂γ²); real below threshold"""
    g = np.asarray(gamma, dtype=complex)
    J = np.asarray(stieltjes_J(g, m), dtype=complex)
    out = g * (coeffs.a1 - g) * (coeffs.a2 - g) * J - (coeffs.b0 + coeffs.b1 * g + coeffs.b2 * g ** 2)
    if np.ndim(gamma) == 0:
        return complex(out)
    return out


def _reduced_F(gamma, coeffs: PrototypeCoefficients, m: float):
    """F_char(γ)/γ for b₀ = 0"""
    g = np.asarray(gamma, dtype=complex)
    J = np.asarray(stieltjes_J(g, m), dtype=complex)
    return (coeffs.a1 - g) * (coeffs.a2 - g) * J - (coeffs.b1 + coeffs.b2 * g)


def residual_scale(gamma: complex, coeffs: PrototypeCoefficients, m: float) -> float:
    J = complex(stieltjes_J(gamma, m))
    terms = [
        abs(coeffs.b0), abs(coeffs.b1 * gamma), abs(coeffs.b2 * gamma ** 2),
        abs(gamma * (coeffs.a1 - gamma) * (coeffs.a2 - gamma) * J),
    ]
    return max(max(terms), 1e-300)


def coefficients_from_zeros(zeros: Sequence[complex], a1: float, a2: float,
                            m: float) -> PrototypeCoefficients:
    """
    Unique (b₀, b₁, b₂) whose characteristic function vanishes at three given
    zeros: the quadratic interpolating γ(a₁ − γ)(a₂ − γ)J(γ) through them.
    """
    g = np.asarray(zeros, dtype=complex)
    if g.shape != (3,):
        raise DomainError("exactly three zeros are required", field="zeros")
    _check_separation(g)
    N = g * (a1 - g) * (a2 - g) * np.asarray(stieltjes_J(g, m), dtype=complex)
    b = np.zeros(3, dtype=complex)
    for k in range(3):
        others = np.delete(g, k)
        den = np.prod(g[k] - others)
        # np.poly(others) = [1, −(sum), prod]
        b += N[k] / den * np.poly(others)[::-1]
    if np.max(np.abs(b.imag)) > 1e-10 * max(1.0, np.max(np.abs(b))):
        raise DomainError("zeros do not produce real coefficients", field="zeros")
    return PrototypeCoefficients(a1=a1, a2=a2, b0=b[0].real, b1=b[1].real, b2=b[2].real)


def _check_separation(g: np.ndarray, tol: Optional[float] = None):
    tol = settings.ZERO_SEPARATION_TOL if tol is None else tol
    for i in range(len(g)):
        for j in range(i + 1, len(g)):
            if abs(g[i] - g[j]) < tol * max(1.0, abs(g[i])):
                raise RootFindingError(
                    f"zeros {g[i]} and {g[j]} are not separated",
                    details={"separation": abs(g[i] - g[j])},
                )


# ---------------------------------------------------------------------------
# Argument principle
# ---------------------------------------------------------------------------

def _rectangle_boundary(x0: float, x1: float, y0: float, y1: float, n: int) -> np.ndarray:
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1), complex(x0, y0)]
    t = np.linspace(0.0, 1.0, n, endpoint=False)
    pieces = [a + (b - a) * t for a, b in zip(corners[:-1], corners[1:])]
    pieces.append(np.array([corners[0]]))
    return np.concatenate(pieces)


def winding_number(f: Callable, rect: Tuple[float, float, float, float],
                   n_initial: int = 64, max_refine: int = 16, max_step: float = 0.5) -> int:
    """Zeros of an analytic f inside rect = (x0, x1, y0, y1), by phase unwrapping"""
    z = _rectangle_boundary(*rect, n_initial)
    v = np.asarray(f(z), dtype=complex)
    for _ in range(max_refine):
        d = np.angle(v[1:] / v[:-1])
        bad = np.abs(d) > max_step
        if not np.any(bad):
            break
        mids = 0.5 * (z[:-1][bad] + z[1:][bad])
        idx = np.nonzero(bad)[0] + 1
        z = np.insert(z, idx, mids)
        v = np.insert(v, idx, np.asarray(f(mids), dtype=complex))
    d = np.angle(v[1:] / v[:-1])
    return int(np.rint(d.sum() / (2.0 * np.pi)))


def _secant_refine(f: Callable, z0: complex, rect) -> Optional[complex]:
    x0, x1, y0, y1 = rect
    try:
        root = optimize.newton(lambda z: complex(f(z)), z0, tol=1e-14, rtol=1e-13, maxiter=200)
    except (RuntimeError, DomainError, ZeroDivisionError, OverflowError):
        return None
    root = complex(root)
    if not np.isfinite(root):
        return None
    if x0 <= root.real <= x1 and y0 <= root.imag <= y1:
        return root
    return None


def _complex_zeros(f: Callable, rect, depth: int, max_depth: int, found: List[complex]):
    n = winding_number(f, rect)
    if n <= 0:
        return
    x0, x1, y0, y1 = rect
    centre = complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))
    if n == 1 or depth >= max_depth:
        root = _secant_refine(f, centre, rect)
        if root is not None:
            found.append(root)
            return
        if depth >= max_depth:
            logger.warning(f"complex zero in {rect} not refined at maximal depth")
            return
    xm, ym = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    for sub in ((x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)):
        _complex_zeros(f, sub, depth + 1, max_depth, found)


# ---------------------------------------------------------------------------
# Zero search
# ---------------------------------------------------------------------------

def _real_abscissae(lo: float, hi: float, n: int = 600) -> np.ndarray:
    pts = []
    if lo < 0:
        pts.append(-np.geomspace(-lo, 1e-14, n))
    if hi > 0:
        half = 0.5 * hi
        pts.append(np.geomspace(1e-14, half, n // 2))
        pts.append(hi - np.geomspace(half, 1e-9 * max(1.0, hi), n // 2))
    pts.append([lo, hi])
    x = np.unique(np.concatenate(pts))
    return x[(x >= lo) & (x <= hi) & (x != 0.0)]


def _real_zeros(f_real: Callable, lo: float, hi: float) -> List[float]:
    x = _real_abscissae(lo, hi)
    y = f_real(x)
    roots = list(x[y == 0.0])
    change = np.nonzero(np.sign(y[:-1]) * np.sign(y[1:]) < 0)[0]
    for i in change:
        root = optimize.brentq(lambda s: float(f_real(np.array([s]))[0]), x[i], x[i + 1],
                               xtol=1e-300, rtol=1e-15, maxiter=400)
        roots.append(root)
    return sorted(roots)


def find_zeros(coeffs: PrototypeCoefficients, m: float,
               search: Optional[SearchBox] = None, max_depth: int = 12) -> ZeroSet:
    """
    All zeros of F_char inside the search box.

    Real zeros: sign changes at log-spaced abscissae, refined by Brent. With
    b₀ = 0 the zero γ = 0 is factored out first. Complex zeros: argument-principle
    subdivision of the upper rectangle, mirrored by conjugation.
    """
    box = SearchBox.default(m) if search is None else search
    four_m2 = 4.0 * m * m
    reduced = coeffs.b0 == 0.0

    if reduced:
        def f_real(x):
            return _reduced_F(x, coeffs, m).real
    else:
        def f_real(x):
            return characteristic_F(np.asarray(x, dtype=float), coeffs, m).real

    real_roots = _real_zeros(f_real, box.real_lo, box.real_hi)
    if reduced:
        real_roots = sorted(real_roots + [0.0])

    # threshold limit: J(4m²) = 1/(32π²m²) is finite
    absorbed = False
    J_thr = 1.0 / (32.0 * np.pi ** 2 * m * m)
    if box.real_hi < four_m2:
        F_thr = four_m2 * (coeffs.a1 - four_m2) * (coeffs.a2 - four_m2) * J_thr - (
            coeffs.b0 + coeffs.b1 * four_m2 + coeffs.b2 * four_m2 ** 2)
        if reduced:
            F_thr /= four_m2
        F_hi = float(f_real(np.array([box.real_hi]))[0])
        if F_thr != 0.0 and np.sign(F_thr) != np.sign(F_hi):
            absorbed = True
            logger.info("real zero between the search segment and the threshold: absorbed into cut")

    def f_complex(z):
        return characteristic_F(z, coeffs, m)

    rect = (box.re_lo, box.re_hi, box.im_lo, box.im_hi)
    winding = winding_number(f_complex, rect)
    complex_roots: List[complex] = []
    if winding > 0:
        _complex_zeros(f_complex, rect, 0, max_depth, complex_roots)

    # deduplicate
    unique: List[complex] = []
    for r in complex_roots:
        if all(abs(r - u) > settings.ZERO_SEPARATION_TOL * max(1.0, abs(u)) for u in unique):
            unique.append(r)
    if len(unique) != winding:
        logger.warning(f"winding count {winding} but {len(unique)} complex zeros refined")
        absorbed = True

    zeros: List[Zero] = []
    for r in real_roots:
        res = abs(characteristic_F(complex(r), coeffs, m)) if r != 0.0 else abs(coeffs.b0)
        zeros.append(Zero(complex(r, 0.0), res, "real_negative" if r < 0 else "real_nonneg"))
    for r in unique:
        res = abs(characteristic_F(r, coeffs, m))
        zeros.append(Zero(r, res, "complex_pair_member"))
        zeros.append(Zero(r.conjugate(), res, "complex_pair_member"))

    for z in zeros:
        near_cut = z.gamma.real >= four_m2 - 1e-6 * max(1.0, four_m2) and abs(z.gamma.imag) < 1e-6
        if near_cut:
            absorbed = True
        if z.gamma != 0 and z.residual > settings.ZERO_RESIDUAL_TOL * residual_scale(z.gamma, coeffs, m):
            raise RootFindingError(
                f"zero {z.gamma} has residual {z.residual:.3e}",
                details={"gamma": str(z.gamma), "residual": z.residual},
            )

    logger.debug(f"find_zeros: {len(zeros)} zeros, winding {winding}, absorbed={absorbed}")
    return ZeroSet(tuple(zeros), absorbed_into_cut=absorbed, winding_count=winding)


# ---------------------------------------------------------------------------
# β-coefficients, partial fractions, profiles
# ---------------------------------------------------------------------------

def betas_from_gammas(zs) -> BetaCoefficients:
    """Elementary symmetric functions of three zeros"""
    g = zs.gammas if isinstance(zs, ZeroSet) else np.asarray(zs, dtype=complex)
    if len(g) != 3:
        raise RootFindingError(
            f"β-coefficients need three zeros, got {len(g)}; use the normal-form split",
            details={"count": len(g)},
        )
    beta = np.poly(g)
    if np.max(np.abs(beta.imag)) > 1e-10 * max(1.0, np.max(np.abs(beta))):
        raise RootFindingError("zeros are not closed under conjugation")
    return BetaCoefficients(beta0=beta[3].real, beta1=beta[2].real, beta2=beta[1].real)


def partial_fractions(zs, a1: float, a2: float) -> List[Tuple[complex, complex]]:
    """(M − a₁)(M − a₂)/P(M) = Σ Aᵢ/(M − γᵢ)"""
    g = zs.gammas if isinstance(zs, ZeroSet) else np.asarray(zs, dtype=complex)
    if len(g) != 3:
        raise RootFindingError(f"partial fractions need three zeros, got {len(g)}")
    _check_separation(g)
    out = []
    for i in range(3):
        others = np.delete(g, i)
        A = (g[i] - a1) * (g[i] - a2) / np.prod(g[i] - others)
        out.append((complex(g[i]), complex(A)))
    return out


@dataclass
class AuxiliaryProfiles:
    """
    Fourier profiles ĥⱼ of the auxiliary fields, j ∈ {0, 1, 2}; j = 0 is
    absent when b₀ = 0. Each profile carries the factor ρ(M)√(M − 4m²).
    """
    coeffs: PrototypeCoefficients
    betas: BetaCoefficients
    m: float
    fractions: List[Tuple[complex, complex]]
    decay_constants: Dict[int, float] = field(default_factory=dict)
    constraint_residuals: Dict[int, float] = field(default_factory=dict)

    @property
    def indices(self) -> Tuple[int, ...]:
        return (1, 2) if self.coeffs.b0 == 0.0 else (0, 1, 2)

    def _rho_check(self, M: np.ndarray) -> np.ndarray:
        return np.asarray(eval_rho(M, self.m)) * np.sqrt(np.maximum(M - 4.0 * self.m ** 2, 0.0))

    def _mr(self, M: np.ndarray) -> np.ndarray:
        out = np.ones_like(M, dtype=complex)
        for gamma, A in self.fractions:
            out = out + gamma * A / (M - gamma)
        return out.real

    def scaled(self, j: int, M) -> np.ndarray:
        """bⱼĥⱼ(M)"""
        M = np.asarray(M, dtype=float)
        rc = self._rho_check(M)
        mr = self._mr(M)
        b = self.betas
        if j == 2:
            return (mr - 1.0) * rc
        if j == 1:
            return -((M * b.beta1 + b.beta0) / M ** 2) * mr * rc + (self.coeffs.a1 * self.coeffs.a2 / M) * rc
        if j == 0:
            return -(b.beta0 / M) * mr * rc
        raise DomainError(f"no profile with index {j}", field="j")

    def h(self, j: int, M) -> np.ndarray:
        if j not in self.indices:
            raise DomainError(f"profile {j} is absent", field="j")
        b = {0: self.coeffs.b0, 1: self.coeffs.b1, 2: self.coeffs.b2}[j]
        return self.scaled(j, M) / b


def auxiliary_profiles(coeffs: PrototypeCoefficients, betas: BetaCoefficients,
                       m: float) -> AuxiliaryProfiles:
    """Closed-form profiles from the β-coefficients, with a 1/M decay check"""
    four_m2 = 4.0 * m * m
    roots = betas.roots()
    on_ray = [r for r in roots if abs(r.imag) < 1e-10 * max(1.0, abs(r)) and r.real >= four_m2]
    if on_ray:
        raise HypothesisError(f"P(M) vanishes on the cut at {on_ray[0].real}", offending=on_ray[0].real)
    fractions = partial_fractions(roots, coeffs.a1, coeffs.a2)
    profiles = AuxiliaryProfiles(coeffs, betas, m, fractions)

    M = four_m2 * np.geomspace(1.0 + 1e-6, 1e12, 400)
    rc = profiles._rho_check(M)
    for j in profiles.indices:
        ratio = np.abs(profiles.scaled(j, M)) * M / np.maximum(rc, 1e-300)
        C = float(np.max(ratio))
        tail_growth = ratio[-1] / max(ratio[len(ratio) // 2], 1e-300)
        if not np.isfinite(C) or tail_growth > 10.0:
            raise HypothesisError(f"profile {j} fails the 1/M decay bound", offending=float(M[-1]))
        profiles.decay_constants[j] = C
    return profiles


def check_constraint(profiles: AuxiliaryProfiles) -> Dict[int, float]:
    """|∫ĥⱼ dM/√(M − 4m²) − 1| with M = 4m² + u²"""
    four_m2 = 4.0 * profiles.m ** 2
    out: Dict[int, float] = {}
    for j in profiles.indices:
        def integrand(u, j=j):
            return 2.0 * float(profiles.h(j, np.array([four_m2 + u * u]))[0])

        value, err = integrate.quad(integrand, 0.0, np.inf, limit=500, epsabs=1e-13, epsrel=1e-11)
        if err > 1e-8:
            raise QuadratureError(f"constraint quadrature for profile {j} failed", estimate=err)
        out[j] = abs(value - 1.0)
    profiles.constraint_residuals = out
    return out


def varsigma_profile(coeffs: PrototypeCoefficients, zs, m: float,
                     enforce_gate: bool = True) -> SpectralDensity:
    """ς(M) = M·R(M)·ρ(M), with positivity and boundedness of M·R(M) checked by scan"""
    four_m2 = 4.0 * m * m
    if enforce_gate:
        for a in (coeffs.a1, coeffs.a2):
            if a > four_m2:
                raise HypothesisError(f"a = {a} exceeds the threshold 4m² = {four_m2}", offending=a)
    g = zs.gammas if isinstance(zs, ZeroSet) else np.asarray(zs, dtype=complex)
    for gamma in g:
        if abs(gamma.imag) < 1e-12 and gamma.real >= four_m2:
            raise HypothesisError(f"zero {gamma} lies on the cut", offending=gamma.real)
    fractions = partial_fractions(g, coeffs.a1, coeffs.a2)
    sigma = SpectralDensity(m=m, kind="varsigma", poles=tuple(fractions))

    M = four_m2 * np.concatenate([1.0 + np.geomspace(1e-9, 1.0, 500), np.geomspace(2.0, 1e12, 1500)])
    mr = sigma.mr_factor(M)
    bad = np.nonzero(mr < -1e-12)[0]
    if len(bad):
        raise HypothesisError(f"M·R(M) < 0 at M = {M[bad[0]]}", offending=float(M[bad[0]]))
    if not np.all(np.isfinite(mr)) or np.max(mr) > 1e12:
        raise HypothesisError("M·R(M) is unbounded on the cut")
    return sigma


# ---------------------------------------------------------------------------
# Convexity and the normal form
# ---------------------------------------------------------------------------

def _rho_moment(f: Callable, m: float) -> float:
    """∫ρ(M)·f(M) dM with M = 4m²/(1 − v²), f given in v"""
    value, err = integrate.quad(f, 0.0, 1.0, limit=500, epsabs=1e-16, epsrel=1e-12)
    if not np.isfinite(value):
        raise QuadratureError("ρ-moment quadrature failed", estimate=err)
    return value / SIXTEEN_PI2


def convexity_probe(a1: float, a2: float, m: float, gamma: float) -> Tuple[float, float, float]:
    """(A, A′, A″) for A(γ) = (a₁ − γ)(a₂ − γ)J(γ)"""
    four_m2 = 4.0 * m * m
    if not gamma < four_m2:
        raise DomainError("convexity probe needs γ below threshold", field="gamma")

    def D(v):
        return four_m2 - gamma + gamma * v * v

    J = float(np.real(stieltjes_J(gamma, m)))
    J1 = _rho_moment(lambda v: 2 * v * v * (1 - v * v) / D(v) ** 2, m)
    A = (a1 - gamma) * (a2 - gamma) * J
    A1 = (gamma - a1) * (gamma - a2) * J1 + (2 * gamma - a1 - a2) * J
    A2 = _rho_moment(
        lambda v: 2 * 2 * v * v * (four_m2 - a1 * (1 - v * v)) * (four_m2 - a2 * (1 - v * v)) / D(v) ** 3,
        m,
    )
    return A, A1, A2


@dataclass(frozen=True)
class NormalFormSplit:
    coeffs: PrototypeCoefficients
    gamma_tilde: float
    q: float
    zeros: ZeroSet
    eps: Tuple[float, float]


def normal_form_split(b_tilde: Sequence[float], a1: float, a2: float, m: float,
                      eps: Tuple[float, float], retry_budget: int = 6,
                      search: Optional[SearchBox] = None) -> NormalFormSplit:
    """
    Tangent-line split b = (ε₁, q + ε₂, b̃₂) with A′(γ̃) = b̃₂ and q = A(γ̃) − b̃₂γ̃.
    The ε's are halved on each retry until three real zeros are found.
    """
    eps1, eps2 = eps
    if not (eps1 > 0 and eps2 > 0):
        raise DomainError("normal-form offsets must be strictly positive", field="eps")
    four_m2 = 4.0 * m * m
    if not (a1 < four_m2 and a2 < four_m2):
        raise HypothesisError("normal form needs a₁, a₂ below threshold", offending=max(a1, a2))
    b2 = float(b_tilde[2])

    def slope_gap(g):
        return convexity_probe(a1, a2, m, g)[1] - b2

    lo = -1.0
    while slope_gap(lo) > 0:
        lo *= 4.0
        if lo < -1e30:
            raise RootFindingError("no tangent point: A′ stays above b̃₂")
    hi, k = four_m2 * (1 - 1e-2), 2
    while slope_gap(hi) < 0:
        k += 1
        hi = four_m2 * (1 - 10.0 ** (-k))
        if k > 14:
            raise RootFindingError("no tangent point: A′ stays below b̃₂")
    gamma_t = optimize.bisect(slope_gap, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=400)
    A_t = convexity_probe(a1, a2, m, gamma_t)[0]
    q = A_t - b2 * gamma_t
    logger.info(f"normal form: tangent point {gamma_t:.6g}, q = {q:.6g}")

    last: Dict = {}
    try:
        for attempt in retrying_attempts(retry_budget):
            with attempt:
                scale = 0.5 ** (attempt.retry_state.attempt_number - 1)
                e1, e2 = eps1 * scale, eps2 * scale
                coeffs = PrototypeCoefficients(a1, a2, e1, q + e2, b2)
                zs = find_zeros(coeffs, m, search)
                last = {"eps": (e1, e2), "coeffs": coeffs.as_dict(), "count": zs.count}
                if zs.count != 3 or len(zs.real_gammas) != 3:
                    logger.warning(f"normal form with eps={e1:.3g},{e2:.3g} gave {zs.count} zeros; shrinking")
                    raise RootFindingError("normal form did not produce three real zeros", details=last)
    except RootFindingError as exc:
        raise RootFindingError("normal-form retry budget exhausted", details=last) from exc
    return NormalFormSplit(coeffs, gamma_t, q, zs, (e1, e2))


# ---------------------------------------------------------------------------
# Physical maps
# ---------------------------------------------------------------------------

def s_mode_coefficients(params: PhysicalParams, b2: Optional[float] = None,
                        constants: Optional[RenormalisationConstants] = None) -> PrototypeCoefficients:
    """Scalar sector: a = 2m²/(6ξ − 1), b₀ and b₁ fixed, b₂ free (∝ α̃₃ˢ)"""
    consts = RenormalisationConstants() if constants is None else constants
    a = params.s_mode_a()
    X = 6.0 * (1.0 / 6.0 - params.xi) ** 2
    m2 = params.m ** 2
    b0 = -consts.alpha1_S * 4.0 * m2 * m2 / X
    b1 = -2.0 * (1.0 / params.kappa - consts.alpha2_S * m2) / X
    if b2 is None:
        if consts.alpha3_S is None:
            raise DomainError("b2 or alpha3_S must be supplied for the S mode", field="b2")
        b2 = -4.0 * consts.alpha3_S / X
    return PrototypeCoefficients(a, a, b0, b1, float(b2))


def tt_mode_coefficients(params: PhysicalParams, b2: Optional[float] = None,
                         constants: Optional[RenormalisationConstants] = None) -> PrototypeCoefficients:
    """Tensor sector: a = 4m², b₀ = 120α̃₁ᵀᵀm⁴ = 0, b₁ = 60/κ, b₂ free (∝ α̃₄ᵀᵀ)"""
    consts = RenormalisationConstants() if constants is None else constants
    m2 = params.m ** 2
    a = 4.0 * m2
    b0 = 120.0 * consts.alpha1_TT * m2 * m2
    b1 = 60.0 * (1.0 / params.kappa - consts.alpha2_TT * m2)
    if b2 is None:
        if consts.alpha4_TT is None:
            raise DomainError("b2 or alpha4_TT must be supplied for the TT mode", field="b2")
        b2 = 120.0 * consts.alpha4_TT
    return PrototypeCoefficients(a, a, b0, b1, float(b2))


def s_mode_b2_thresholds(params: PhysicalParams, b2_min: float = -1e3, b2_max: float = -1e-6,
                         n_scan: int = 40, search: Optional[SearchBox] = None) -> List[Dict]:
    """
    Values of b₂ < 0 at which the S-mode zero topology changes, by bisection.

    The topology is (number of zeros, number of real zeros): a complex pair
    landing on the real line keeps the count and changes the real count, a
    zero leaving through the cut changes both. Scan points where find_zeros
    fails are skipped.
    """
    def topology(b2):
        try:
            zs = find_zeros(s_mode_coefficients(params, b2=b2), params.m, search)
        except RootFindingError:
            return None
        return zs.count, len(zs.real_gammas)

    grid = -np.geomspace(-b2_min, -b2_max, n_scan)
    shapes = [topology(b) for b in grid]
    thresholds = []
    for i in range(len(grid) - 1):
        below, above = shapes[i], shapes[i + 1]
        if below is None or above is None or below == above:
            continue
        lo, hi = grid[i], grid[i + 1]
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if topology(mid) == below:
                lo = mid
            else:
                hi = mid
        thresholds.append({
            "b2": 0.5 * (lo + hi),
            "count_below": below[0], "count_above": above[0],
            "real_below": below[1], "real_above": above[1],
        })
    logger.info(f"S-mode b2 thresholds: {[round(t['b2'], 8) for t in thresholds]}")
    return thresholds
