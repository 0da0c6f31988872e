"""
Spectral Core: densities, Stieltjes transforms and Perron measures
===================================================================

Evaluates the two-particle spectral density ρ(M), its Stieltjes transform J(z),
the inversion function F(w²), the characteristic function Q(w²) and the
Stieltjes–Perron measures of 1/F and 1/Q. Every closed form has a quadrature
oracle next to it.

Key Features:
- Closed-form J(z) on the cut plane with a small-|z| series branch
- Boundary values J(x ± i0) on the cut and Hölder-regularised principal values
- Adaptive quadrature oracles with certified error estimates
- Perron measures tabulated on composite Gauss panels in s = √log(M/4m²)
- Analytic leading-log tails for slowly decaying continuous parts
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from services.error_handler import DomainError, QuadratureError
from utils.config import settings

logger = logging.getLogger(__name__)

SIXTEEN_PI2 = 16.0 * np.pi ** 2
EIGHT_PI2 = 8.0 * np.pi ** 2
LOG_DELTA_RHO = 2.0 * np.log(2.0) - 2.0

ArrayLike = Union[float, complex, np.ndarray]


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, curvature coupling, Newton constant and Hadamard scale"""
    m: float = 1.0
    xi: float = 1.0
    G: float = 1.0
    mu: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"mass must be positive, got {self.m}", field="m")
        if not self.mu > 0:
            raise DomainError(f"Hadamard scale must be positive, got {self.mu}", field="mu")
        if not self.G > 0:
            raise DomainError(f"Newton constant must be positive, got {self.G}", field="G")

    @property
    def kappa(self) -> float:
        return 8.0 * np.pi * self.G

    @property
    def threshold(self) -> float:
        return 4.0 * self.m ** 2

    def s_mode_a(self) -> float:
        """a = 2m²/(6ξ−1), rejected at ξ = 1/6 and at or above threshold"""
        denom = 6.0 * self.xi - 1.0
        if abs(denom) < 1e-14:
            raise DomainError("xi = 1/6 makes the S-mode coefficients singular", field="xi")
        a = 2.0 * self.m ** 2 / denom
        if not a < self.threshold:
            raise DomainError(
                f"S-mode parameter a = {a} is not below threshold 4m² = {self.threshold}",
                field="xi",
            )
        return a


@dataclass(frozen=True)
class CutDomainPoint:
    """Point of the complex plane tested against the cut [4m², ∞)"""
    z: complex
    threshold: float

    @property
    def in_domain(self) -> bool:
        return bool(self.z.imag != 0.0 or self.z.real < self.threshold)


def in_cut_domain(z: ArrayLike, m: float) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return (z.imag != 0.0) | (z.real < 4.0 * m ** 2)


def _check_mass(m: float):
    if not m > 0:
        raise DomainError(f"mass must be positive, got {m}", field="m")


def _scalar_or_array(value: np.ndarray, like) -> ArrayLike:
    if np.ndim(like) == 0:
        return value.item()
    return value


# ---------------------------------------------------------------------------
# ρ and J
# ---------------------------------------------------------------------------

def eval_rho(M: ArrayLike, m: float) -> ArrayLike:
    """ρ(M) = (1/16π²)·√(1 − 4m²/M)/M above threshold, 0 below"""
    _check_mass(m)
    M_arr = np.asarray(M, dtype=float)
    if np.any(M_arr < 0):
        raise DomainError("spectral parameter M must be non-negative", field="M")
    out = np.zeros_like(M_arr)
    above = M_arr > 4.0 * m ** 2
    Ma = M_arr[above]
    out[above] = np.sqrt(1.0 - 4.0 * m ** 2 / Ma) / Ma / SIXTEEN_PI2
    return _scalar_or_array(out, M)


def stieltjes_J(z: ArrayLike, m: float) -> ArrayLike:
    """
    J(z) = ∫ρ(M)/(M − z) dM in closed form.

    Uses J = (1 − s·arctan(1/s))/(8π²z) with s = √((4m² − z)/z), which is even in s
    and therefore branch-free on the cut plane; the log form on the negative axis;
    and the series Σ(−x)^k/(2k+3)/(8π²(4m² − z)), x = z/(4m² − z), for |x| < 1/4.
    """
    _check_mass(m)
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    four_m2 = 4.0 * m ** 2
    if np.any(~in_cut_domain(z_arr, m)):
        raise DomainError("J evaluated on the cut [4m², ∞)", field="z")

    out = np.empty_like(z_arr)
    x = z_arr / (four_m2 - z_arr)
    small = np.abs(x) < 0.25
    if np.any(small):
        xs = x[small]
        k = np.arange(40)
        terms = (-xs[:, None]) ** k[None, :] / (2 * k[None, :] + 3)
        out[small] = terms.sum(axis=1) / (EIGHT_PI2 * (four_m2 - z_arr[small]))

    negative = (~small) & (z_arr.imag == 0.0) & (z_arr.real < 0.0)
    if np.any(negative):
        zn = z_arr[negative].real
        a = np.sqrt(1.0 - four_m2 / zn)
        log_ratio = np.log((a + 1.0) ** 2 * (-zn) / four_m2)
        out[negative] = (1.0 - 0.5 * a * log_ratio) / (EIGHT_PI2 * zn)

    rest = (~small) & (~negative)
    if np.any(rest):
        zr = z_arr[rest]
        s = np.sqrt((four_m2 - zr) / zr)
        out[rest] = (1.0 - s * np.arctan(1.0 / s)) / (EIGHT_PI2 * zr)

    real_axis = z_arr.imag == 0.0
    out[real_axis] = out[real_axis].real
    if np.ndim(z) == 0:
        return complex(out[0])
    return out.reshape(np.shape(z))


def stieltjes_J_boundary(x: ArrayLike, m: float, side: int = 1) -> ArrayLike:
    """J(x ± i0) for x ≥ 4m²: principal value ± iπρ(x)"""
    _check_mass(m)
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    four_m2 = 4.0 * m ** 2
    if np.any(x_arr < four_m2):
        raise DomainError("boundary values exist only on the cut", field="x")
    v = np.sqrt(1.0 - four_m2 / x_arr)
    log_ratio = np.log((1.0 + v) ** 2 * x_arr / four_m2)
    pv = (1.0 - 0.5 * v * log_ratio) / (EIGHT_PI2 * x_arr)
    im = np.sign(side) * np.pi * v / (SIXTEEN_PI2 * x_arr)
    out = pv + 1j * im
    if np.ndim(x) == 0:
        return complex(out[0])
    return out


def stieltjes_J_derivative(z: ArrayLike, m: float) -> ArrayLike:
    """J′(z) = ∫ρ/(M − z)² by a 16-point circle average around z"""
    z_arr = np.atleast_1d(np.asarray(z, dtype=complex))
    dist = np.where(
        z_arr.real < 4.0 * m ** 2,
        np.abs(z_arr - 4.0 * m ** 2),
        np.abs(z_arr.imag),
    )
    r = np.minimum(1e-2 * np.maximum(1.0, np.abs(z_arr)), 0.25 * dist)
    n = 16
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    vals = stieltjes_J(z_arr[:, None] + r[:, None] * roots[None, :], m)
    deriv = (vals * np.conj(roots)[None, :]).mean(axis=1) / r
    if np.ndim(z) == 0:
        return complex(deriv[0])
    return deriv


def quadrature_J(z: complex, m: float, tol: Optional[float] = None,
                 rtol: Optional[float] = None) -> complex:
    """
    Quadrature oracle for J(z).

    Substitutes M = 4m²/(1 − v²), which maps the ray onto [0, 1) and turns the
    integrand into 2v²/(4m² − z + z v²)/(16π²). Certified error max(tol, rtol·|J|).
    """
    _check_mass(m)
    tol = settings.QUAD_ABS_TOL if tol is None else tol
    rtol = settings.QUAD_REL_TOL if rtol is None else rtol
    if not tol > 0:
        raise DomainError("tolerance must be positive", field="tol")
    z = complex(z)
    if not CutDomainPoint(z, 4.0 * m ** 2).in_domain:
        raise DomainError("J evaluated on the cut [4m², ∞)", field="z")
    four_m2 = 4.0 * m ** 2

    def integrand(v):
        return 2.0 * v * v / (four_m2 - z + z * v * v) / SIXTEEN_PI2

    points = None
    if z.real > four_m2:
        points = [float(np.sqrt(1.0 - four_m2 / z.real))]
    elif z.real < -100.0 * four_m2:
        points = [float(np.sqrt(1.0 + four_m2 / z.real))]

    kwargs = dict(epsabs=0.1 * tol, epsrel=0.1 * rtol, limit=500, points=points)
    re, err_re = integrate.quad(lambda v: integrand(v).real, 0.0, 1.0, **kwargs)
    im, err_im = integrate.quad(lambda v: integrand(v).imag, 0.0, 1.0, **kwargs)
    value = complex(re, im)
    err = float(np.hypot(err_re, err_im))
    if err > max(tol, rtol * abs(value)):
        logger.error(f"quadrature_J({z}) missed tolerance: estimate {err:.3e}")
        raise QuadratureError(f"J quadrature did not reach tolerance at z={z}", estimate=err)
    return value


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDensity:
    """
    Positive density on [4m², ∞).

    kind "rho" is ρ itself; kind "varsigma" is M·R(M)·ρ(M) with
    M·R(M) = 1 + Σ γᵢAᵢ/(M − γᵢ), stored as the (γᵢ, Aᵢ) pairs.
    """
    m: float
    kind: str = "rho"
    poles: Tuple[Tuple[complex, complex], ...] = field(default_factory=tuple)

    @property
    def threshold(self) -> float:
        return 4.0 * self.m ** 2

    def mr_factor(self, M: ArrayLike) -> np.ndarray:
        M_arr = np.asarray(M, dtype=complex)
        out = np.ones_like(M_arr)
        for gamma, A in self.poles:
            out = out + gamma * A / (M_arr - gamma)
        return out.real

    def density(self, M: ArrayLike) -> ArrayLike:
        rho = np.asarray(eval_rho(M, self.m), dtype=float)
        if self.kind == "rho":
            return _scalar_or_array(rho, M)
        return _scalar_or_array(rho * self.mr_factor(M), M)

    def __call__(self, M: ArrayLike) -> ArrayLike:
        return self.density(M)

    def stieltjes(self, z: ArrayLike) -> ArrayLike:
        """g(z) = ∫ς(M)/(M − z) dM in closed form"""
        J = np.asarray(stieltjes_J(z, self.m), dtype=complex)
        if self.kind == "rho":
            return _scalar_or_array(J, z)
        z_arr = np.asarray(z, dtype=complex)
        out = J.copy()
        for gamma, A in self.poles:
            Jg = complex(stieltjes_J(complex(gamma), self.m))
            diff = z_arr - gamma
            near = np.abs(diff) < 1e-9 * max(1.0, abs(gamma))
            term = (J - Jg) / np.where(near, 1.0, diff)
            if np.any(near):
                term = np.where(near, stieltjes_J_derivative(complex(gamma), self.m), term)
            out = out + gamma * A * term
        return _scalar_or_array(out, z)

    def boundary(self, M: ArrayLike, side: int = 1) -> ArrayLike:
        """g(M ± i0) on the cut"""
        Jb = np.asarray(stieltjes_J_boundary(M, self.m, side), dtype=complex)
        if self.kind == "rho":
            return _scalar_or_array(Jb, M)
        M_arr = np.asarray(M, dtype=float)
        out = Jb.copy()
        for gamma, A in self.poles:
            Jg = complex(stieltjes_J(complex(gamma), self.m))
            out = out + gamma * A * (Jb - Jg) / (M_arr - gamma)
        return _scalar_or_array(out, M)


def rho_density(m: float) -> SpectralDensity:
    _check_mass(m)
    return SpectralDensity(m=m, kind="rho")


def stieltjes_quadrature(sigma: SpectralDensity, z: complex,
                         u_max: Optional[float] = None) -> Tuple[complex, float]:
    """
    g(z) by quadrature in s with M = 4m²·exp(s²); the remainder beyond
    u_max = s_max² is bounded by the 1/(16π²M) tail.
    """
    u_max = settings.TAIL_U_MAX if u_max is None else u_max
    z = complex(z)
    four_m2 = sigma.threshold
    if not CutDomainPoint(z, four_m2).in_domain:
        raise DomainError("Stieltjes transform evaluated on the cut", field="z")
    s_max = np.sqrt(u_max)

    def integrand(s):
        M = four_m2 * np.exp(s * s)
        return sigma.density(M) * 2.0 * s * M / (M - z)

    points = None
    if z.real > four_m2:
        points = [float(np.sqrt(np.log(z.real / four_m2)))]
    kwargs = dict(epsabs=1e-14, epsrel=1e-11, limit=500, points=points)
    re, e1 = integrate.quad(lambda s: integrand(s).real, 0.0, s_max, **kwargs)
    im, e2 = integrate.quad(lambda s: integrand(s).imag, 0.0, s_max, **kwargs)
    M_max = four_m2 * np.exp(u_max)
    tail = 1.0 / (SIXTEEN_PI2 * M_max)
    return complex(re + tail, im), float(np.hypot(e1, e2) + tail)


def principal_value_stieltjes(sigma: SpectralDensity, M: float,
                              u_max: Optional[float] = None) -> float:
    """
    Re g(M + i0) = PV∫ς(y)/(y − M) dy.

    Subtracts ς(M)/(y − M) on the interval symmetric about M, where its principal
    value vanishes, and integrates the remainder of the ray directly.
    """
    u_max = settings.TAIL_U_MAX if u_max is None else u_max
    four_m2 = sigma.threshold
    if not M > four_m2:
        raise DomainError("principal value requested off the cut", field="M")
    sM = float(sigma.density(M))
    h = 1e-6 * M

    def hoelder(y):
        if abs(y - M) < 1e-9 * M:
            return (float(sigma.density(M + h)) - float(sigma.density(M - h))) / (2 * h)
        return (float(sigma.density(y)) - sM) / (y - M)

    y_mid = 2.0 * M - four_m2
    inner, e1 = integrate.quad(hoelder, four_m2, y_mid, limit=500, epsabs=1e-15, epsrel=1e-11)

    def outer_integrand(u):
        y = y_mid * np.exp(u)
        return float(sigma.density(y)) * y / (y - M)

    outer, e2 = integrate.quad(outer_integrand, 0.0, u_max, limit=500, epsabs=1e-15, epsrel=1e-11)
    tail = 1.0 / (SIXTEEN_PI2 * y_mid * np.exp(u_max))
    err = e1 + e2 + tail
    if not np.isfinite(inner + outer):
        raise QuadratureError(f"principal value failed at M={M}", estimate=err)
    return inner + outer + tail


# ---------------------------------------------------------------------------
# F and Q
# ---------------------------------------------------------------------------

def F_of(w2: ArrayLike, c: float, sigma: SpectralDensity) -> ArrayLike:
    """F(w²) = (w² + c)·g(−w²); real for real w² ≥ 0"""
    if not (0.0 < c < sigma.threshold):
        raise DomainError(f"c must lie in (0, 4m²), got {c}", field="c")
    w2_arr = np.asarray(w2)
    g = np.asarray(sigma.stieltjes(-w2_arr.astype(complex)), dtype=complex)
    out = (w2_arr + c) * g
    if not np.iscomplexobj(w2_arr):
        out = out.real
    return _scalar_or_array(np.asarray(out), w2)


def Q_of(w2: ArrayLike, coeffs, m: float) -> ArrayLike:
    """Q(w²) = w²(w² + a₁)(w² + a₂)J(−w²) + b₀ − b₁w² + b₂w⁴"""
    w2_arr = np.asarray(w2, dtype=complex)
    J = np.asarray(stieltjes_J(-w2_arr, m), dtype=complex)
    out = (w2_arr * (w2_arr + coeffs.a1) * (w2_arr + coeffs.a2) * J
           + coeffs.b0 - coeffs.b1 * w2_arr + coeffs.b2 * w2_arr ** 2)
    return _scalar_or_array(np.asarray(out), w2)


def Q_on_cut(M: ArrayLike, coeffs, m: float) -> ArrayLike:
    """Q(−M + i0) for M ≥ 4m²; −w² approaches the cut from below"""
    M_arr = np.asarray(M, dtype=float)
    w2 = -M_arr
    J = np.asarray(stieltjes_J_boundary(M_arr, m, side=-1), dtype=complex)
    out = (w2 * (w2 + coeffs.a1) * (w2 + coeffs.a2) * J
           + coeffs.b0 - coeffs.b1 * w2 + coeffs.b2 * w2 ** 2)
    return _scalar_or_array(np.asarray(out), M)


def Q_prime(gamma: complex, coeffs, m: float) -> complex:
    """
    dQ/dw² at w² = −γ.

    Complex step for real γ below threshold; otherwise an 8-point circle
    average, exact to O(r⁸) for the analytic Q.
    """
    gamma = complex(gamma)
    four_m2 = 4.0 * m ** 2
    x = -gamma
    if gamma.imag == 0.0 and gamma.real < four_m2:
        h = 1e-20 * max(1.0, abs(gamma))
        return complex(np.imag(Q_of(x.real + 1j * h, coeffs, m)) / h)
    dist = abs(gamma.imag) if gamma.real >= four_m2 else abs(gamma - four_m2)
    r = min(1e-3 * max(1.0, abs(gamma)), 0.25 * dist)
    n = 8
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    vals = np.asarray(Q_of(x + r * roots, coeffs, m), dtype=complex)
    return complex((vals * np.conj(roots)).mean() / r)


# ---------------------------------------------------------------------------
# Leading-log asymptotics
# ---------------------------------------------------------------------------

def log_delta(sigma: SpectralDensity, u_max: Optional[float] = None) -> float:
    """log δ = ∫(16π²ς(y) − 1/y) dy over the cut; 2 log 2 − 2 for ρ"""
    if sigma.kind == "rho":
        return LOG_DELTA_RHO
    u_max = settings.TAIL_U_MAX if u_max is None else u_max
    four_m2 = sigma.threshold

    def integrand(s):
        y = four_m2 * np.exp(s * s)
        return (SIXTEEN_PI2 * float(sigma.density(y)) * y - 1.0) * 2.0 * s

    value, _ = integrate.quad(integrand, 0.0, np.sqrt(u_max), limit=500, epsabs=1e-13)
    return value


def phi_lead(M: ArrayLike, m: float, log_d: float) -> ArrayLike:
    """16π²/((log(M/4m²) + log δ)² + π²)"""
    L = np.log(np.asarray(M, dtype=float) / (4.0 * m ** 2)) + log_d
    return SIXTEEN_PI2 / (L ** 2 + np.pi ** 2)


def phi_lead_derivative(M: ArrayLike, m: float, log_d: float) -> ArrayLike:
    M = np.asarray(M, dtype=float)
    L = np.log(M / (4.0 * m ** 2)) + log_d
    return -2.0 * SIXTEEN_PI2 * L / (M * (L ** 2 + np.pi ** 2) ** 2)


def lead_tail_integral(Lam: float, m: float, log_d: float) -> float:
    """∫_Λ^∞ φ_lead(M) dM/M in closed form"""
    X = np.log(Lam / (4.0 * m ** 2)) + log_d
    return 16.0 * np.pi * (0.5 * np.pi - np.arctan(X / np.pi))


# ---------------------------------------------------------------------------
# Perron measures
# ---------------------------------------------------------------------------

def _s_panels(s_max: float, n_nodes: int, n_panels: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    per = max(4, n_nodes // n_panels)
    x, w = np.polynomial.legendre.leggauss(per)
    edges = np.linspace(0.0, s_max, n_panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(lo + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class SpectralMeasure:
    """
    Atoms plus a continuous density on [4m², ∞).

    The continuous part is tabulated at composite Gauss nodes in
    s = √log(M/4m²) and splined in s. Beyond the table it follows φ_lead when
    log_delta is set and vanishes otherwise.
    """
    kind: str
    m: float
    atoms: Tuple[Tuple[complex, complex], ...]
    s_nodes: np.ndarray
    s_weights: np.ndarray
    values: np.ndarray
    s_max: float
    log_delta: Optional[float] = None

    @property
    def threshold(self) -> float:
        return 4.0 * self.m ** 2

    @property
    def M_max(self) -> float:
        return self.threshold * np.exp(self.s_max ** 2)

    @property
    def M_nodes(self) -> np.ndarray:
        return self.threshold * np.exp(self.s_nodes ** 2)

    @property
    def M_weights(self) -> np.ndarray:
        """Quadrature weights for dM at M_nodes"""
        return self.s_weights * 2.0 * self.s_nodes * self.M_nodes

    @cached_property
    def _spline(self) -> CubicSpline:
        s = np.concatenate([[0.0], self.s_nodes])
        v = np.concatenate([[0.0], self.values])
        return CubicSpline(s, v, extrapolate=True)

    def continuous(self, M: ArrayLike) -> ArrayLike:
        M_arr = np.atleast_1d(np.asarray(M, dtype=float))
        out = np.zeros_like(M_arr)
        inside = (M_arr >= self.threshold) & (M_arr <= self.M_max)
        if np.any(inside):
            s = np.sqrt(np.log(M_arr[inside] / self.threshold))
            out[inside] = self._spline(s)
        beyond = M_arr > self.M_max
        if np.any(beyond) and self.log_delta is not None:
            out[beyond] = phi_lead(M_arr[beyond], self.m, self.log_delta)
        if np.ndim(M) == 0:
            return float(out[0])
        return out

    def tail_moment(self, Lam: float, shift: float = 0.0, power: int = 1) -> float:
        """∫_Λ^∞ continuous(M)/(M + shift)^power dM"""
        if Lam >= self.M_max:
            lo_part = 0.0
        else:
            s_lo = np.sqrt(max(np.log(Lam / self.threshold), 0.0))
            spline = self._spline

            def integrand(s):
                M = self.threshold * np.exp(s * s)
                return spline(s) * 2.0 * s * M / (M + shift) ** power

            lo_part, _ = integrate.quad(integrand, s_lo, self.s_max, limit=400, epsabs=1e-15)
        if self.log_delta is None:
            return lo_part
        start = max(Lam, self.M_max)
        if power == 1:
            hi_part = lead_tail_integral(start, self.m, self.log_delta)
        else:
            hi_part = float(phi_lead(start, self.m, self.log_delta)) / ((power - 1) * start ** (power - 1))
        return lo_part + hi_part

    def reconstruct(self, w2: ArrayLike) -> ArrayLike:
        """Σ weight/(loc + w²) + ∫ continuous/(M + w²) dM"""
        w2_arr = np.atleast_1d(np.asarray(w2, dtype=complex))
        out = np.zeros_like(w2_arr)
        for loc, weight in self.atoms:
            out += weight / (loc + w2_arr)
        Mk, qk = self.M_nodes, self.M_weights * self.values
        out += (qk[None, :] / (Mk[None, :] + w2_arr[:, None])).sum(axis=1)
        if self.log_delta is not None:
            out += lead_tail_integral(self.M_max, self.m, self.log_delta)
        if np.ndim(w2) == 0:
            return complex(out[0])
        return out


def perron_measure(kind: str, c: Optional[float] = None, sigma: Optional[SpectralDensity] = None,
                   coeffs=None, m: Optional[float] = None, zeros=None,
                   n_nodes: Optional[int] = None, u_max: Optional[float] = None) -> SpectralMeasure:
    """
    Stieltjes–Perron measure of 1/F (kind 'inverse_F') or 1/Q (kind 'inverse_Q').

    inverse_F: atom (c, 1/g(c)) and φ_con = ς/((M − c)(Re g² + π²ς²)).
    inverse_Q: atoms (γ, 1/Q′(−γ)) at the supplied zeros and
               ϑ = −Im[1/Q(−M + i0)]/π.
    """
    n_nodes = settings.PERRON_NODES if n_nodes is None else n_nodes
    u_max = settings.TAIL_U_MAX if u_max is None else u_max
    s_max = float(np.sqrt(u_max))
    s_nodes, s_weights = _s_panels(s_max, n_nodes)

    if kind == "inverse_F":
        if sigma is None or c is None:
            raise DomainError("inverse_F needs c and a spectral density", field="sigma")
        if not (0.0 < c < sigma.threshold):
            raise DomainError(f"c must lie in (0, 4m²), got {c}", field="c")
        M = sigma.threshold * np.exp(s_nodes ** 2)
        dens = np.asarray(sigma.density(M), dtype=float)
        try:
            re_g = np.asarray(sigma.boundary(M, side=1), dtype=complex).real
        except DomainError:
            re_g = np.array([principal_value_stieltjes(sigma, float(x), u_max) for x in M])
        values = dens / ((M - c) * (re_g ** 2 + np.pi ** 2 * dens ** 2))
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise QuadratureError("continuous Perron density is not finite and positive")
        g_c = float(np.real(sigma.stieltjes(complex(c))))
        atoms = ((complex(c), complex(1.0 / g_c)),)
        ld = log_delta(sigma, u_max)
        logger.debug(f"inverse_F measure: atom weight {1.0 / g_c:.6g}, log_delta {ld:.6g}")
        return SpectralMeasure("inverse_F", sigma.m, atoms, s_nodes, s_weights, values, s_max, ld)

    if kind == "inverse_Q":
        if coeffs is None or m is None or zeros is None:
            raise DomainError("inverse_Q needs coefficients, m and located zeros", field="zeros")
        four_m2 = 4.0 * m ** 2
        M = four_m2 * np.exp(s_nodes ** 2)
        Qc = np.asarray(Q_on_cut(M, coeffs, m), dtype=complex)
        values = (Qc.imag / np.abs(Qc) ** 2) / np.pi
        atoms = tuple((complex(g), 1.0 / Q_prime(g, coeffs, m)) for g in zeros)
        return SpectralMeasure("inverse_Q", m, atoms, s_nodes, s_weights, values, s_max, None)

    raise DomainError(f"unknown Perron measure kind '{kind}'", field="kind")
