"""
Product-integration weights for Duhamel convolutions on a uniform time grid.

D_x f(t) = ∫₀ᵗ sin(√x(t − s))/√x · f(s) ds is entire in x, so one rule covers
oscillating (x > 0), critical (x = 0) and growing (x < 0) modes as well as
complex x. With f linearly interpolated between grid points the moments of
the kernel are exact and the operator becomes a causal Toeplitz convolution.
Inputs are expected to vanish at the first grid point.
"""
import logging
from math import factorial
from typing import Optional

import numpy as np
from numba import njit
from scipy.signal import fftconvolve

from services.error_handler import DomainError

logger = logging.getLogger(__name__)

_SERIES_SWITCH = 0.1
_SERIES_TERMS = 12

# sinc(νh/2)^{-4} = Σⱼ cⱼ (νh)^{2j}
_HAT_INVERSE_SQUARED = (1.0, 1.0 / 6.0, 11.0 / 720.0, 31.0 / 30240.0)
_STENCIL_POINTS = 7


def _first_weight(z: np.ndarray) -> np.ndarray:
    """(√z − sin √z)/z^{3/2}, by its series Σ(−z)^k/(2k+3)! for small |z|"""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < _SERIES_SWITCH
    if np.any(small):
        zs = z[small]
        term = np.full_like(zs, 1.0 / 6.0)
        acc = term.copy()
        for k in range(1, _SERIES_TERMS):
            term = term * (-zs) / ((2 * k + 2) * (2 * k + 3))
            acc = acc + term
        out[small] = acc
    big = ~small
    if np.any(big):
        th = np.sqrt(z[big])
        out[big] = (th - np.sin(th)) / th ** 3
    return out


def duhamel_weights(x, h: float, n: int) -> np.ndarray:
    """
    Toeplitz weights W[j], j = 0..n−1, with D_x f(t_k) ≈ Σⱼ W[j]·f(t_{k−j}).

    x may be a scalar or a 1-d array (one row per value). The result is real
    when x is real.
    """
    if not h > 0:
        raise DomainError("time step must be positive", field="dt")
    x_arr = np.atleast_1d(np.asarray(x))
    real_input = not np.iscomplexobj(x_arr)
    z = x_arr.astype(complex) * h * h
    th = np.sqrt(z)
    j = np.arange(n)
    # sinc²(θ/2)·sin(jθ)/θ, both factors even in θ
    hat = np.sinc(th / (2.0 * np.pi)) ** 2
    W = h * h * hat[:, None] * j[None, :] * np.sinc(j[None, :] * th[:, None] / np.pi)
    W[:, 0] = h * h * _first_weight(z)
    if real_input:
        W = W.real
    if np.ndim(x) == 0:
        return W[0]
    return W


def toeplitz_apply(weights: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Causal convolution Σⱼ weights[j]·f[k − j], truncated to len(f)"""
    n = len(f)
    return fftconvolve(weights[:n], f)[:n]


def duhamel_apply(x, f: np.ndarray, h: float) -> np.ndarray:
    return toeplitz_apply(duhamel_weights(x, h, len(f)), f)


def retarded_apply(x, f: np.ndarray, h: float) -> np.ndarray:
    """Retarded inverse of −∂²_t − x per mode: u = −D_x f"""
    return -duhamel_apply(x, f, h)


def compose_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = min(len(a), len(b))
    return fftconvolve(a[:n], b[:n])[:n]


def stencil_weights(offsets, derivatives, h: float) -> np.ndarray:
    """
    Weights a with Σᵢ aᵢ f(t + oᵢh) = Σₖ derivatives[k]·f⁽ᵏ⁾(t) for every
    polynomial f of degree below len(offsets).
    """
    o = np.asarray(offsets, dtype=float)
    k = np.arange(len(o))
    target = np.zeros(len(o))
    for j, coeff in enumerate(derivatives[:len(o)]):
        target[j] = coeff * factorial(j) / h ** j
    return np.linalg.solve(o[None, :] ** k[:, None], target)


def wave_stencil(f: np.ndarray, h: float, mass: float) -> np.ndarray:
    """
    (mass + ∂²_t)f with the linear-interpolation smoothing of two product-
    integration stages divided out: symbol (mass − ν²)/sinc⁴(νh/2), exact on
    polynomials of degree 6.

    Seven-point centred stencils in the interior, one-sided windows at the last
    three samples. f must vanish before its first sample; the left end is
    padded with zeros.
    """
    f = np.asarray(f)
    n = len(f)
    if n < _STENCIL_POINTS:
        raise DomainError(f"at least {_STENCIL_POINTS} samples are needed for the wave stencil",
                          field="grid")
    derivs = np.zeros(_STENCIL_POINTS)
    for j, coeff in enumerate(_HAT_INVERSE_SQUARED):
        scale = coeff * (-h * h) ** j
        derivs[2 * j] += mass * scale
        if 2 * j + 2 < _STENCIL_POINTS:
            derivs[2 * j + 2] += scale

    half = _STENCIL_POINTS // 2
    padded = np.concatenate([np.zeros(half, dtype=f.dtype), f])
    out = np.zeros(n, dtype=np.result_type(f, float))
    centre = stencil_weights(np.arange(-half, half + 1), derivs, h)
    for i, a in enumerate(centre):
        out[:n - half] += a * padded[i:i + n - half]
    tail = f[n - _STENCIL_POINTS:]
    for r in range(half):
        offsets = np.arange(_STENCIL_POINTS) - (_STENCIL_POINTS - 1) + r
        out[n - 1 - r] = stencil_weights(offsets, derivs, h) @ tail
    return out


@njit(cache=True)
def _volterra_march(weights: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = rhs.shape[0]
    phi = np.zeros(n)
    diag = 1.0 + weights[0]
    for k in range(n):
        acc = rhs[k]
        for j in range(k):
            acc -= weights[k - j] * phi[j]
        phi[k] = acc / diag
    return phi


def volterra_march(weights: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve φ + w∗φ = rhs step by step in time"""
    w = np.ascontiguousarray(np.real(weights), dtype=np.float64)
    r = np.ascontiguousarray(np.real(rhs), dtype=np.float64)
    if abs(1.0 + w[0]) < 1e-14:
        raise DomainError("Volterra march is singular: 1 + w[0] vanishes", field="weights")
    return _volterra_march(w, r)


def gronwall_envelope(weights: np.ndarray, source: np.ndarray,
                      alpha: Optional[float] = None) -> np.ndarray:
    """
    E(n) = α·Σ_{j≤n}|source_j|·(1 − α)^{−(n+1)} with α = max|w|;
    infinite once α ≥ 1.
    """
    a = float(np.max(np.abs(weights))) if alpha is None else alpha
    S0 = np.cumsum(np.abs(source))
    n = np.arange(len(source))
    if a >= 1.0:
        return np.full(len(source), np.inf)
    with np.errstate(over="ignore"):
        growth = np.exp(-(n + 1) * np.log1p(-a))
    return a * S0 * growth
