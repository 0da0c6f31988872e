"""
Stability classification and late-time asymptotics of mode solutions.

The verdict follows from the zero set alone: a zero at negative or complex γ
gives exponential growth at rate max(√|γ|, |Im √γ|), a zero absorbed into the
cut blocks the pole-plus-cut representation, a zero at γ = 0 is marginal, and
three zeros in (0, 4m²) are stable. Numerical solutions are then fitted for a
power law or an exponential over a late-time window.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from services.error_handler import DomainError
from services.mode_algebra import PrototypeCoefficients, ZeroSet, find_zeros
from services.mode_solver import (
    ModeGrid,
    ModeProblem,
    ModeSolution,
    ModeSource,
    dyson_solve,
    polecut_solve,
    smooth_cutoff,
)

logger = logging.getLogger(__name__)

STABLE = "stable_decaying"
MARGINAL = "marginal"
UNSTABLE = "unstable"
MIXED = "mixed_cut_absorbed"

_ZERO_TOL = 1e-12


@dataclass
class StabilityVerdict:
    verdict: str
    zeros: ZeroSet
    L: Optional[float] = None
    rate: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "verdict": self.verdict,
            "L": self.L,
            "rate": self.rate,
            "zeros": self.zeros.to_dict(),
        }


def growth_rate(gamma: complex) -> float:
    """Exponential rate of D_γ at p = 0; zero for γ ≥ 0"""
    gamma = complex(gamma)
    if abs(gamma.imag) <= _ZERO_TOL * max(1.0, abs(gamma)):
        return float(np.sqrt(-gamma.real)) if gamma.real < 0 else 0.0
    return float(abs(np.sqrt(gamma).imag))


def classify_stability(coeffs: PrototypeCoefficients, m: float,
                       zeros: Optional[ZeroSet] = None) -> StabilityVerdict:
    """unstable > mixed_cut_absorbed > marginal > stable_decaying"""
    zs = find_zeros(coeffs, m) if zeros is None else zeros
    rates = [growth_rate(g) for g in zs.gammas]
    rate = max(rates, default=0.0)
    if rate > 0.0:
        verdict = StabilityVerdict(UNSTABLE, zs, L=rate ** 2, rate=rate)
    elif zs.absorbed_into_cut:
        verdict = StabilityVerdict(MIXED, zs)
    elif any(abs(g) <= _ZERO_TOL * max(1.0, m * m) for g in zs.gammas):
        verdict = StabilityVerdict(MARGINAL, zs, L=0.0, rate=0.0)
    else:
        verdict = StabilityVerdict(STABLE, zs)
    logger.info(f"stability: {verdict.verdict} (rate={verdict.rate})")
    return verdict


# ---------------------------------------------------------------------------
# Asymptotic fits
# ---------------------------------------------------------------------------

@dataclass
class AsymptoticFit:
    kind: str  # power | exponential
    exponent: float
    rate: float
    power_residual: float
    exp_residual: float
    window: Tuple[float, float]
    points: int

    @property
    def fit_error(self) -> float:
        return self.power_residual if self.kind == "power" else self.exp_residual

    def to_dict(self) -> Dict:
        return {
            "kind": self.kind,
            "exponent": self.exponent,
            "rate": self.rate,
            "fit_error": self.fit_error,
            "window": list(self.window),
            "points": self.points,
        }


def _envelope(t: np.ndarray, y: np.ndarray, block: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    a = np.abs(y)
    if block is not None:
        edges = np.arange(t[0], t[-1] + 1e-12, block)
        ts, vs = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            idx = np.nonzero((t >= lo) & (t < hi))[0]
            if len(idx):
                k = idx[np.argmax(a[idx])]
                ts.append(t[k])
                vs.append(a[k])
        return np.array(ts), np.array(vs)
    peaks, _ = find_peaks(a)
    if len(peaks) >= 8:
        return t[peaks], a[peaks]
    return t, a


def asymptotic_fit(t: np.ndarray, values: np.ndarray, window: Tuple[float, float],
                   block: Optional[float] = None) -> AsymptoticFit:
    """
    Fit |φ| ~ t^k and |φ| ~ e^{λt} over the window and keep the better one.

    The envelope is the local maxima of |φ| (or block maxima when block is
    given). The exponential fit wins only when its residual is under half the
    power-law residual.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    if not (hi > lo > 0):
        raise DomainError(f"fit window must satisfy 0 < lo < hi, got {window}", field="window")
    inside = (t >= lo) & (t <= hi)
    if np.count_nonzero(inside) < 16:
        raise DomainError("fit window holds fewer than 16 samples", field="window")
    te, ve = _envelope(t[inside], values[inside], block)
    keep = ve > 0
    te, ve = te[keep], ve[keep]
    if len(te) < 3:
        raise DomainError("fit window too short for an envelope", field="window")

    logv = np.log(ve)
    kp, cp = np.polyfit(np.log(te), logv, 1)
    ke, ce = np.polyfit(te, logv, 1)
    res_p = float(np.sqrt(np.mean((kp * np.log(te) + cp - logv) ** 2)))
    res_e = float(np.sqrt(np.mean((ke * te + ce - logv) ** 2)))
    kind = "exponential" if res_e < 0.5 * res_p else "power"
    return AsymptoticFit(kind, float(kp), float(ke), res_p, res_e, (lo, hi), len(te))


def conformal_bound(solution: ModeSolution, H: float) -> float:
    """sup_t e^{−Ht}|φ(t)|"""
    if H < 0:
        raise DomainError("H must be non-negative", field="H")
    t = solution.times
    return float(np.max(np.exp(-H * t) * np.abs(solution.samples)))


def rate_within_conformal(verdict: StabilityVerdict, H: float, rel_tol: float = 0.01) -> bool:
    rate = verdict.rate or 0.0
    return rate <= H * (1.0 + rel_tol)


# ---------------------------------------------------------------------------
# Wave packets
# ---------------------------------------------------------------------------

@dataclass
class PacketSolution:
    """φ(t, x = 0) = ∫p² φ̂(t, p) dp / (2π²) for a Gaussian spatial profile"""
    times: np.ndarray
    samples: np.ndarray
    p_nodes: np.ndarray
    p_weights: np.ndarray
    width: float
    mode_reports: List[Dict] = field(default_factory=list)


def _packet_mode(args) -> Tuple[np.ndarray, Dict]:
    coeffs, m, p, t0, T, dt, t_on, duration, route, problem_kw = args
    grid = ModeGrid(p, t0, T, dt)
    t = grid.times
    half = 0.5 * duration
    profile = smooth_cutoff(t - (t_on + half), half) * smooth_cutoff((t_on + half) - t, half)
    source = ModeSource(grid, profile, t_on)
    if route == "polecut":
        sol = polecut_solve(source, coeffs, m, omega_cutoff=problem_kw.get("omega_cutoff"),
                            panel_nodes=problem_kw.get("panel_nodes"))
    elif route == "dyson":
        sol = dyson_solve(source, ModeProblem(coeffs, m, **problem_kw))
    else:
        raise DomainError(f"unknown route '{route}'", field="route")
    return sol.samples, sol.residual_report


def packet_solve(coeffs: PrototypeCoefficients, m: float, T: float, dt: float,
                 t0: float = 0.0, t_on: float = 1.0, duration: float = 2.0,
                 width: Optional[float] = None, n_p: int = 64, route: str = "polecut",
                 problem_kw: Optional[Dict] = None,
                 map_fn: Callable[[Callable, Iterable], Iterable] = map) -> PacketSolution:
    """
    Superpose modes with Gaussian momentum profile e^{−p²/(2w²)}, w = m/2 by
    default, on Gauss–Legendre nodes in p ∈ [0, 6w].
    """
    width = 0.5 * m if width is None else width
    if not width > 0:
        raise DomainError("packet width must be positive", field="width")
    x, w = np.polynomial.legendre.leggauss(n_p)
    p_max = 6.0 * width
    p = 0.5 * p_max * (x + 1.0)
    wp = 0.5 * p_max * w
    kw = dict(problem_kw or {})
    jobs = [(coeffs, m, float(pk), t0, T, dt, t_on, duration, route, kw) for pk in p]

    grid = ModeGrid(0.0, t0, T, dt)
    total = np.zeros(grid.n_steps)
    reports = []
    for pk, wk, (samples, report) in zip(p, wp, map_fn(_packet_mode, jobs)):
        total += wk * pk * pk * np.exp(-pk * pk / (2.0 * width * width)) * samples
        reports.append(report)
    total /= 2.0 * np.pi ** 2
    logger.info(f"packet: {n_p} modes superposed, route {route}")
    return PacketSolution(grid.times, total, p, wp, width, reports)
