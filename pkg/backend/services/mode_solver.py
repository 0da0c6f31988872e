"""
Mode Solver: per-mode solutions of the prototypical nonlocal equation
======================================================================

Solves Q(−□)φ = S for one spatial momentum p on a uniform time grid, by two
independent routes:

- Dyson/Volterra: invert the nonlocal operator with the kernel K, factor the
  local part through three roots γᵢ, and iterate φ + W_ret φ = 𝖲 (or march it
  directly as a second-kind Volterra equation);
- pole plus cut: φ = Σ (1/Q′(−γ))·D_γ S + ∫ϑ(M)·D_M S dM.

Every operator is a causal Toeplitz convolution whose weights come from the
product-integration rule of the duhamel module, summed over Gauss panels of the
spectral variable.

Key Features:
- Spectral weights on Gauss panels in σ = √(ω − ω₀) with half-period spacing
- Closed-form ψ/ω² − ψ″/ω⁴ tail beyond the frequency cutoff
- Pointwise kernel table with the leading-log part integrated by parts
- Grönwall envelope recorded for every Dyson partial sum
- Three sources of local roots: exact, supplied, or normal-form split
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from services.duhamel import (
    compose_weights,
    duhamel_weights,
    gronwall_envelope,
    toeplitz_apply,
    volterra_march,
    wave_stencil,
)
from services.error_handler import (
    ConvergenceError,
    DomainError,
    HypothesisError,
    QuadratureError,
    RootFindingError,
    RouteInvalidError,
)
from services.mode_algebra import (
    PrototypeCoefficients,
    ZeroSet,
    find_zeros,
    normal_form_split,
    varsigma_profile,
)
from services.spectral_core import (
    SIXTEEN_PI2,
    Q_on_cut,
    SpectralDensity,
    SpectralMeasure,
    perron_measure,
    phi_lead,
    phi_lead_derivative,
)
from utils.config import settings

logger = logging.getLogger(__name__)

Tail = Callable[[float], Tuple[float, float]]


# ---------------------------------------------------------------------------
# Grids, sources, solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeGrid:
    """Uniform time grid for one spatial momentum p"""
    p: float
    t0: float
    T: float
    dt: float

    def __post_init__(self):
        if self.p < 0:
            raise DomainError("momentum must be non-negative", field="p")
        if not self.dt > 0:
            raise DomainError("time step must be positive", field="dt")
        if not self.T > self.t0:
            raise DomainError("T must exceed t0", field="T")
        if self.n_steps < 2:
            raise DomainError("grid needs at least two steps", field="dt")

    @property
    def n_steps(self) -> int:
        return int(round((self.T - self.t0) / self.dt)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps)

    @classmethod
    def default(cls, p: float, m: float, t0: float = 0.0, T: float = 50.0) -> "ModeGrid":
        dt = min(0.01 / max(1.0, p), 0.01 / np.sqrt(4.0 * m * m + p * p))
        return cls(p, t0, T, dt)


@dataclass
class ModeSource:
    """Past-compact source samples Ŝ(t, p)"""
    grid: ModeGrid
    samples: np.ndarray
    support_start: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (self.grid.n_steps,):
            raise DomainError("source length does not match the grid", field="samples")
        if not np.all(np.isfinite(self.samples)):
            raise DomainError("source has non-finite samples", field="samples")
        if not self.support_start > self.grid.t0:
            raise DomainError("source support must start after the first grid point",
                              field="support_start")
        peak = float(np.max(np.abs(self.samples))) if self.samples.size else 0.0
        before = self.grid.times < self.support_start
        if np.any(np.abs(self.samples[before]) > 1e-12 * max(peak, 1e-300)):
            raise DomainError("source does not vanish before its support", field="samples")

    def scaled(self, factor: float) -> "ModeSource":
        return ModeSource(self.grid, factor * self.samples, self.support_start)


@dataclass
class ModeSolution:
    grid: ModeGrid
    samples: np.ndarray
    route: str
    support_start: float
    residual_report: Dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))


def smooth_cutoff(t, eps: float):
    """C^∞ step: 0 for t ≤ −eps, 1 for t ≥ 0"""
    if not eps > 0:
        raise DomainError("cutoff width must be positive", field="eps")
    u = (np.asarray(t, dtype=float) + eps) / eps

    def psi(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    u = np.atleast_1d(u)
    a, b = psi(u), psi(1.0 - u)
    out = a / (a + b)
    if np.ndim(t) == 0:
        return float(out[0])
    return out


def bump_source(grid: ModeGrid, t_on: float, width: float, amplitude: float = 1.0) -> ModeSource:
    """Smooth bump supported on [t_on, t_on + width]"""
    if not width > 0:
        raise DomainError("bump width must be positive", field="width")
    t = grid.times
    half = 0.5 * width
    rise = smooth_cutoff(t - (t_on + half), half)
    fall = smooth_cutoff((t_on + half) - t, half)
    return ModeSource(grid, amplitude * rise * fall, t_on)


# ---------------------------------------------------------------------------
# Spectral weights
# ---------------------------------------------------------------------------

def _cutoff_frequency(grid: ModeGrid, m: float, omega_cutoff: Optional[float]) -> Tuple[float, float]:
    omega0 = float(np.sqrt(grid.p ** 2 + 4.0 * m * m))
    cut = settings.KERNEL_OMEGA_CUTOFF * m if omega_cutoff is None else omega_cutoff
    return omega0, max(cut, 4.0 * omega0)


def spectral_weights(density: Callable, grid: ModeGrid, m: float,
                     atoms: Sequence[Tuple[complex, complex]] = (),
                     tail: Optional[Tail] = None,
                     omega_cutoff: Optional[float] = None,
                     panel_nodes: Optional[int] = None,
                     chunk: int = 128) -> np.ndarray:
    """
    Toeplitz weights of Σ weight·D_{p²+loc} + ∫_{4m²}^∞ density(M)·D_{p²+M} dM.

    The M-integral runs over panels uniform in ω = √(p² + M), each spanning at
    most half a period at the final time, with Gauss nodes in σ = √(ω − ω₀).
    Beyond the cutoff D_x ψ ≈ ψ/x − ψ″/x², with tail(M_Λ) = (∫ρ/x, ∫ρ/x²);
    the tail carries the same sinc² smoothing as the panel weights to O(h²).
    """
    n, h, p2 = grid.n_steps, grid.dt, grid.p ** 2
    panel_nodes = settings.KERNEL_PANEL_NODES if panel_nodes is None else panel_nodes
    omega0, omega_cut = _cutoff_frequency(grid, m, omega_cutoff)
    span = grid.T - grid.t0
    n_panels = int(np.ceil((omega_cut - omega0) * span / np.pi)) + 4

    edges = np.sqrt(np.linspace(0.0, omega_cut - omega0, n_panels + 1))
    x, w = np.polynomial.legendre.leggauss(panel_nodes)
    half = 0.5 * (edges[1:] - edges[:-1])
    sig = (edges[:-1, None] + half[:, None] * (x[None, :] + 1.0)).ravel()
    wsig = (half[:, None] * w[None, :]).ravel()
    omega = omega0 + sig ** 2
    M = omega ** 2 - p2
    q = wsig * 4.0 * omega * sig * np.asarray(density(M), dtype=float)

    out = np.zeros(n, dtype=complex if any(np.iscomplexobj(np.asarray(a)) for _, a in atoms) else float)
    for start in range(0, len(q), chunk):
        stop = start + chunk
        out += q[start:stop] @ duhamel_weights(omega[start:stop] ** 2, h, n)
    for loc, weight in atoms:
        loc, weight = complex(loc), complex(weight)
        if loc.imag == 0.0 and weight.imag == 0.0:
            out = out + weight.real * duhamel_weights(p2 + loc.real, h, n)
        else:
            out = out.astype(complex) + weight * duhamel_weights(p2 + loc, h, n)

    if tail is not None and n >= 3:
        T0, T1 = tail(omega_cut ** 2 - p2)
        T1 = T1 - T0 * h * h / 12.0
        out[0] += T0 - T1 / h ** 2
        out[1] += 2.0 * T1 / h ** 2
        out[2] += -T1 / h ** 2
    logger.debug(f"spectral weights: {n_panels} panels, {len(q)} nodes, cutoff ω={omega_cut:.4g}")
    return out


def inverse_F_density(sigma: SpectralDensity, c: float) -> Callable:
    """φ_con(M) = ς/((M − c)(Re g² + π²ς²)) evaluated in closed form"""
    def density(M):
        M = np.asarray(M, dtype=float)
        dens = np.asarray(sigma.density(M), dtype=float)
        re_g = np.asarray(sigma.boundary(M, side=1), dtype=complex).real
        return dens / ((M - c) * (re_g ** 2 + np.pi ** 2 * dens ** 2))
    return density


def inverse_Q_density(coeffs: PrototypeCoefficients, m: float) -> Callable:
    """ϑ(M) = −Im[1/Q(−M + i0)]/π"""
    def density(M):
        Qc = np.asarray(Q_on_cut(np.asarray(M, dtype=float), coeffs, m), dtype=complex)
        return Qc.imag / (np.pi * np.abs(Qc) ** 2)
    return density


def _measure_tail(measure: SpectralMeasure, p2: float) -> Tail:
    def tail(M_lam: float) -> Tuple[float, float]:
        return (measure.tail_moment(M_lam, shift=p2, power=1),
                measure.tail_moment(M_lam, shift=p2, power=2))
    return tail


def _density_tail(sigma: SpectralDensity, p2: float, u_max: Optional[float] = None) -> Tail:
    """Tail moments of ς, with ς ≈ 1/(16π²M) past M = 4m²·e^{u_max}"""
    u_max = settings.TAIL_U_MAX if u_max is None else u_max
    four_m2 = sigma.threshold

    def moment(M_lam: float, power: int) -> float:
        s_lo, s_hi = np.sqrt(np.log(M_lam / four_m2)), np.sqrt(u_max)

        def integrand(s):
            M = four_m2 * np.exp(s * s)
            return float(sigma.density(M)) * 2.0 * s * M / (M + p2) ** power

        body, _ = integrate.quad(integrand, s_lo, s_hi, limit=400, epsabs=1e-15)
        M_max = four_m2 * np.exp(u_max)
        return body + 1.0 / (SIXTEEN_PI2 * power * M_max ** power)

    def tail(M_lam: float) -> Tuple[float, float]:
        return moment(M_lam, 1), moment(M_lam, 2)
    return tail


# ---------------------------------------------------------------------------
# Kernel K
# ---------------------------------------------------------------------------

@dataclass
class KernelTable:
    """
    K(t, p) sampled on a table refined near t = 0, plus the Toeplitz weights
    used by the solvers. K = −(φ_disc·D_c + ∫φ_con·D_M dM).
    """
    grid: ModeGrid
    c: float
    measure: SpectralMeasure
    t: np.ndarray
    values: np.ndarray
    continuous_values: np.ndarray
    weights: np.ndarray
    C_fit: float
    atom_bound: float
    integral_near_zero: float
    delta: float = 0.1

    @property
    def phi_disc(self) -> float:
        return float(np.real(self.measure.atoms[0][1]))


class KernelEvaluator:
    """Pointwise K_con(t) and its antiderivative for one momentum"""

    def __init__(self, sigma: SpectralDensity, c: float, p: float, measure: SpectralMeasure):
        self.sigma = sigma
        self.c = c
        self.p = p
        self.measure = measure
        self.m = sigma.m
        self.omega0 = float(np.sqrt(p * p + 4.0 * self.m ** 2))
        self.log_d = measure.log_delta if measure.log_delta is not None else 0.0
        self._phi = inverse_F_density(sigma, c)

    def _M(self, omega: float) -> float:
        return omega * omega - self.p * self.p

    def phi_con(self, omega: float) -> float:
        M = self._M(omega)
        if M <= 4.0 * self.m ** 2:
            return 0.0
        return float(self._phi(np.array([M]))[0])

    def _remainder(self, omega: float) -> float:
        M = self._M(omega)
        return 2.0 * (self.phi_con(omega) - float(phi_lead(max(M, 4.0 * self.m ** 2), self.m, self.log_d)))

    def continuous(self, t: float) -> float:
        """K_con(t) = −∫_{ω₀}^∞ 2φ_con(ω² − p²)·sin(ωt) dω"""
        if t <= 0.0:
            return 0.0
        thr = 4.0 * self.m ** 2
        lead_edge = 2.0 * float(phi_lead(thr, self.m, self.log_d)) * np.cos(self.omega0 * t) / t

        def lead_slope(omega):
            M = self._M(omega)
            return float(phi_lead_derivative(M, self.m, self.log_d)) * 2.0 * omega

        lead_int, e1 = integrate.quad(lead_slope, self.omega0, np.inf, weight="cos", wvar=t, limlst=200)
        rem, e2 = integrate.quad(self._remainder, self.omega0, np.inf, weight="sin", wvar=t, limlst=200)
        lead = lead_edge + 2.0 * lead_int / t
        if not np.isfinite(lead + rem):
            raise QuadratureError(f"kernel quadrature failed at t={t}", estimate=e1 + e2)
        return -(lead + rem)

    def antiderivative(self, t: float) -> float:
        """∫₀ᵗ K_con = −∫_{ω₀}^∞ 2φ_con·(1 − cos ωt)/ω dω"""
        if t <= 0.0:
            return 0.0
        big = max(4.0 * self.omega0, 200.0 / t)

        def body(omega):
            return 2.0 * self.phi_con(omega) * (1.0 - np.cos(omega * t)) / omega

        near, e1 = integrate.quad(body, self.omega0, big, limit=2000, epsabs=1e-12, epsrel=1e-10)
        far_flat = self.measure.tail_moment(self._M(big), shift=self.p ** 2, power=1)
        far_osc, e2 = integrate.quad(lambda w: 2.0 * self.phi_con(w) / w, big, np.inf,
                                     weight="cos", wvar=t, limlst=200)
        total = near + far_flat - far_osc
        if not np.isfinite(total):
            raise QuadratureError(f"kernel antiderivative failed at t={t}", estimate=e1 + e2)
        return -total


def _kernel_table_times(grid: ModeGrid, n_table: int) -> np.ndarray:
    span = grid.T - grid.t0
    near = np.geomspace(1e-3 * grid.dt, grid.dt, 12)
    body = np.geomspace(grid.dt, span, n_table)
    return np.unique(np.concatenate([near, body]))


def kernel_K(grid: ModeGrid, c: float, sigma: SpectralDensity,
             omega_cutoff: Optional[float] = None, panel_nodes: Optional[int] = None,
             n_table: int = 48, delta: float = 0.1, fit_from: float = 1.0) -> KernelTable:
    """Kernel table, C/t fit, ∫₀^δ|K_con| and Toeplitz weights for one momentum"""
    m = sigma.m
    measure = perron_measure("inverse_F", c=c, sigma=sigma)
    phi_disc = float(np.real(measure.atoms[0][1]))
    p2 = grid.p ** 2
    weights = -spectral_weights(
        inverse_F_density(sigma, c), grid, m,
        atoms=((c, phi_disc),), tail=_measure_tail(measure, p2),
        omega_cutoff=omega_cutoff, panel_nodes=panel_nodes,
    )

    evaluator = KernelEvaluator(sigma, c, grid.p, measure)
    t = _kernel_table_times(grid, n_table)
    K_con = np.array([evaluator.continuous(float(s)) for s in t])
    omega_c = np.sqrt(p2 + c)
    K = K_con - phi_disc * np.sin(omega_c * t) / omega_c

    late = t >= fit_from
    C_fit = float(np.max(np.abs(K_con[late]) * t[late])) if np.any(late) else float("nan")
    near_int = _abs_integral(evaluator, t, K_con, delta)
    logger.info(f"kernel p={grid.p:g}: C={C_fit:.4g}, ∫|K_con| on [0,{delta}]={near_int:.4g}")
    return KernelTable(grid, c, measure, t, K, K_con, weights, C_fit,
                       phi_disc / omega_c, near_int, delta)


def _abs_integral(evaluator: KernelEvaluator, t: np.ndarray, K_con: np.ndarray, delta: float) -> float:
    """∫₀^δ|K_con| from the antiderivative between sign changes"""
    inside = t <= delta
    ts, ks = t[inside], K_con[inside]
    breaks = [0.0]
    for i in np.nonzero(np.sign(ks[:-1]) * np.sign(ks[1:]) < 0)[0]:
        breaks.append(float(ts[i] - ks[i] * (ts[i + 1] - ts[i]) / (ks[i + 1] - ks[i])))
    breaks.append(delta)
    F = [evaluator.antiderivative(b) for b in breaks]
    return float(sum(abs(b - a) for a, b in zip(F[:-1], F[1:])))


# ---------------------------------------------------------------------------
# Forward and inverse nonlocal operator
# ---------------------------------------------------------------------------

def forward_G_weights(sigma: SpectralDensity, grid: ModeGrid,
                      omega_cutoff: Optional[float] = None,
                      panel_nodes: Optional[int] = None) -> np.ndarray:
    return -spectral_weights(sigma.density, grid, sigma.m, tail=_density_tail(sigma, grid.p ** 2),
                             omega_cutoff=omega_cutoff, panel_nodes=panel_nodes)


def apply_forward_G(phi: np.ndarray, sigma: SpectralDensity, grid: ModeGrid,
                    weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Φ = −∫ς(M)·D_{p²+M}φ dM"""
    w = forward_G_weights(sigma, grid) if weights is None else weights
    return toeplitz_apply(w, np.asarray(phi, dtype=float))


def invert_G(Phi: np.ndarray, kernel: KernelTable, grid: ModeGrid, c: float) -> np.ndarray:
    """
    φ = K ∗ ((c + ∂²_t + p²)Φ), the inverse of apply_forward_G.

    Both K and 𝖦 are product-integration weights and each carries a sinc²
    smoothing; wave_stencil divides both out, so the round trip is exact up to
    the spectral quadrature.
    """
    Phi = np.asarray(Phi, dtype=float)
    rhs = wave_stencil(Phi, grid.dt, c + grid.p ** 2)
    return toeplitz_apply(kernel.weights, rhs)


def W_ret_apply(phi: np.ndarray, gammas: Sequence[complex], d: Sequence[complex],
                kernel: KernelTable, grid: ModeGrid) -> np.ndarray:
    """Σ dᵢ·G_ret^{γᵢ}(K ∗ φ) with G_ret^γ = −D_{p²+γ}"""
    Kphi = toeplitz_apply(kernel.weights, np.asarray(phi, dtype=float))
    out = np.zeros(grid.n_steps, dtype=complex)
    for g, di in zip(gammas, d):
        out -= complex(di) * toeplitz_apply(duhamel_weights(grid.p ** 2 + complex(g), grid.dt, grid.n_steps), Kphi)
    return out.real


# ---------------------------------------------------------------------------
# Local factorisation and the Dyson route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeProblem:
    """Full coefficients b̃ plus the numerical choices of the Dyson route"""
    coeffs: PrototypeCoefficients
    m: float
    c: Optional[float] = None
    local_coefficients: Optional[PrototypeCoefficients] = None
    eps: Tuple[float, float] = (1e-3, 1e-3)
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    omega_cutoff: Optional[float] = None
    panel_nodes: Optional[int] = None

    @property
    def c_value(self) -> float:
        c = 2.0 * self.m ** 2 if self.c is None else self.c
        if not 0.0 < c < 4.0 * self.m ** 2:
            raise DomainError(f"c must lie in (0, 4m²), got {c}", field="c")
        return c


@dataclass
class LocalFactor:
    coeffs: PrototypeCoefficients
    gammas: np.ndarray
    e: np.ndarray
    d: np.ndarray
    residues: np.ndarray  # 1/∏_{j≠i}(γⱼ − γᵢ), summing to zero
    sigma: SpectralDensity
    origin: str  # exact | supplied | normal_form


def _factor_weights(gammas: np.ndarray, c: float, delta0: float,
                    delta1: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    e, d, residues = [], [], []
    for i, g in enumerate(gammas):
        others = np.delete(gammas, i)
        den = np.prod(others - g)
        residues.append(1.0 / den)
        e.append((c - g) / den)
        d.append((c - g) * (delta0 + delta1 * g) / den)
    return np.array(e, dtype=complex), np.array(d, dtype=complex), np.array(residues, dtype=complex)


def local_factor(problem: ModeProblem) -> LocalFactor:
    """Local coefficients b with three roots, and the factor weights eᵢ, dᵢ"""
    full, m = problem.coeffs, problem.m
    if problem.local_coefficients is not None:
        local = problem.local_coefficients
        if (local.a1, local.a2, local.b2) != (full.a1, full.a2, full.b2):
            raise DomainError("local coefficients may differ from the full ones only in b0 and b1",
                              field="local_coefficients")
        origin = "supplied"
        zs = find_zeros(local, m)
    else:
        origin, local, zs = "exact", full, find_zeros(full, m)
        if zs.count != 3 or zs.absorbed_into_cut:
            nf = normal_form_split((full.b0, full.b1, full.b2), full.a1, full.a2, m, problem.eps)
            origin, local, zs = "normal_form", nf.coeffs, nf.zeros
    if zs.count != 3 or zs.absorbed_into_cut:
        raise RootFindingError(f"local factor needs three zeros off the cut, got {zs.count}",
                               details={"origin": origin, "absorbed": zs.absorbed_into_cut})
    gammas = zs.gammas
    try:
        sigma = varsigma_profile(local, gammas, m)
    except HypothesisError:
        if origin != "exact":
            raise
        nf = normal_form_split((full.b0, full.b1, full.b2), full.a1, full.a2, m, problem.eps)
        origin, local, gammas = "normal_form", nf.coeffs, nf.zeros.gammas
        sigma = varsigma_profile(local, gammas, m)
    e, d, residues = _factor_weights(gammas, problem.c_value, full.b0 - local.b0, full.b1 - local.b1)
    logger.info(f"local factor ({origin}): roots {np.round(gammas, 8).tolist()}")
    return LocalFactor(local, gammas, e, d, residues, sigma, origin)


@dataclass
class DysonOperators:
    """
    Toeplitz weights of the local inverse w_L = −Σ rᵢ·D_{p²+γᵢ} and of
    W_ret = w_W ∗ ·. The Dyson source is 𝖲 = w_L ∗ 𝖦⁻¹S.
    """
    factor: LocalFactor
    kernel: KernelTable
    local_weights: np.ndarray
    w_W: np.ndarray


def build_dyson_operators(problem: ModeProblem, grid: ModeGrid,
                          kernel: Optional[KernelTable] = None,
                          factor: Optional[LocalFactor] = None) -> DysonOperators:
    factor = local_factor(problem) if factor is None else factor
    if kernel is None:
        kernel = kernel_K(grid, problem.c_value, factor.sigma,
                          omega_cutoff=problem.omega_cutoff, panel_nodes=problem.panel_nodes)
    n = grid.n_steps
    w_L = np.zeros(n, dtype=complex)
    w_W = np.zeros(n, dtype=complex)
    for g, r, d in zip(factor.gammas, factor.residues, factor.d):
        D = duhamel_weights(grid.p ** 2 + complex(g), grid.dt, n)
        w_L -= r * D
        w_W -= d * compose_weights(D, kernel.weights)
    return DysonOperators(factor, kernel, w_L.real, w_W.real)


def source_term(S: ModeSource, ops: DysonOperators) -> np.ndarray:
    """𝖲 = Σ rᵢ·G_ret^{γᵢ}(𝖦⁻¹S)"""
    return toeplitz_apply(ops.local_weights, invert_G(S.samples, ops.kernel, S.grid, ops.kernel.c))


def dyson_solve(S: ModeSource, problem: ModeProblem,
                operators: Optional[DysonOperators] = None) -> ModeSolution:
    """φ = Σ(−1)ⁿφₙ with φ₀ = 𝖲 and φₙ = W_ret φₙ₋₁"""
    grid = S.grid
    ops = build_dyson_operators(problem, grid) if operators is None else operators
    tol = settings.DYSON_TOL if problem.tol is None else problem.tol
    max_iter = settings.DYSON_MAX_ITER if problem.max_iter is None else problem.max_iter

    src = source_term(S, ops)
    scale = float(np.max(np.abs(src)))
    envelope = gronwall_envelope(ops.w_W, src)
    slack = 1e-12 * max(scale, 1e-300)
    total = src.copy()
    partial = np.zeros_like(src)
    increments: List[float] = []
    envelope_ok = True
    term = src
    converged = not np.any(ops.w_W) or scale == 0.0
    iterations = 0
    while not converged:
        if iterations >= max_iter:
            logger.error(f"Dyson series did not converge in {max_iter} iterations")
            raise ConvergenceError(
                f"Dyson series did not converge in {max_iter} iterations",
                increments=increments[-10:],
            )
        iterations += 1
        term = toeplitz_apply(ops.w_W, term)
        sign = -1.0 if iterations % 2 else 1.0
        partial += sign * term
        total += sign * term
        if np.any(np.abs(partial) > envelope * (1.0 + 1e-9) + slack):
            envelope_ok = False
        inc = float(np.max(np.abs(term)))
        increments.append(inc)
        logger.debug(f"Dyson iteration {iterations}: increment {inc:.3e}")
        converged = inc < tol * scale

    if not envelope_ok:
        logger.warning("Dyson partial sums left the Grönwall envelope")
    report = {
        "local_origin": ops.factor.origin,
        "local_zeros": [[complex(g).real, complex(g).imag] for g in ops.factor.gammas],
        "iterations": iterations,
        "increments": increments,
        "tol": tol,
        "alpha": float(np.max(np.abs(ops.w_W))),
        "envelope_ok": envelope_ok,
        "envelope_final": float(envelope[-1]),
        "kernel_C": ops.kernel.C_fit,
    }
    return ModeSolution(grid, total, "dyson", S.support_start, report)


def volterra_solve(S: ModeSource, problem: ModeProblem,
                   operators: Optional[DysonOperators] = None) -> ModeSolution:
    """Direct causal march of φ + W_ret φ = 𝖲"""
    grid = S.grid
    ops = build_dyson_operators(problem, grid) if operators is None else operators
    src = source_term(S, ops)
    phi = volterra_march(ops.w_W, src)
    report = {"local_origin": ops.factor.origin, "alpha": float(np.max(np.abs(ops.w_W)))}
    return ModeSolution(grid, phi, "volterra", S.support_start, report)


# ---------------------------------------------------------------------------
# Pole plus cut
# ---------------------------------------------------------------------------

def _check_pole_route(zs: ZeroSet, m: float):
    four_m2 = 4.0 * m * m
    if zs.absorbed_into_cut:
        raise RouteInvalidError("a zero is absorbed into the cut; use the Dyson route")
    for g in zs.gammas:
        if abs(g.imag) < 1e-6 * max(1.0, four_m2) and g.real >= four_m2 * (1.0 - 1e-6):
            raise RouteInvalidError(f"zero {g} sits on the cut; use the Dyson route")


def polecut_weights(coeffs: PrototypeCoefficients, m: float, grid: ModeGrid,
                    zeros: Optional[ZeroSet] = None, omega_cutoff: Optional[float] = None,
                    panel_nodes: Optional[int] = None) -> Tuple[np.ndarray, ZeroSet]:
    zs = find_zeros(coeffs, m) if zeros is None else zeros
    _check_pole_route(zs, m)
    measure = perron_measure("inverse_Q", coeffs=coeffs, m=m, zeros=zs.gammas)
    w = spectral_weights(inverse_Q_density(coeffs, m), grid, m, atoms=measure.atoms,
                         tail=_measure_tail(measure, grid.p ** 2),
                         omega_cutoff=omega_cutoff, panel_nodes=panel_nodes)
    return w, zs


def polecut_solve(S: ModeSource, coeffs: PrototypeCoefficients, m: float,
                  grid: Optional[ModeGrid] = None, zeros: Optional[ZeroSet] = None,
                  omega_cutoff: Optional[float] = None,
                  panel_nodes: Optional[int] = None) -> ModeSolution:
    """φ = Σ(1/Q′(−γ))·D_γ S + ∫ϑ(M)·D_M S dM"""
    grid = S.grid if grid is None else grid
    w, zs = polecut_weights(coeffs, m, grid, zeros, omega_cutoff, panel_nodes)
    phi = toeplitz_apply(w, S.samples)
    imag = float(np.max(np.abs(np.imag(phi)))) if np.iscomplexobj(phi) else 0.0
    report = {"zeros": zs.to_dict(), "imag_residue": imag}
    return ModeSolution(grid, np.real(phi), "polecut", S.support_start, report)


def cross_route_delta(a: ModeSolution, b: ModeSolution) -> float:
    """sup|a − b| / sup|b|"""
    ref = b.sup_norm()
    return float(np.max(np.abs(a.samples - b.samples)) / max(ref, 1e-300))
