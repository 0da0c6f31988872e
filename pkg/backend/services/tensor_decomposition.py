"""
Tensor Decomposition: past-compact S/V/TT split of symmetric tensor fields
==========================================================================

Fields live on a periodic spatial box (plane waves e^{ik·x}) times a uniform
time grid. Spatial derivatives are exact (∂ⱼ → ikⱼ). The time derivative is the
causal second-order backward stencil D = (3 − 4z⁻¹ + z⁻²)/(2h), and 𝖦_ret is the
exact causal inverse of the resulting discrete □ = −D² − |k|², applied as an IIR
filter. D is A-stable: every pole of 𝖦 with k ≠ 0 lies strictly inside the unit
circle, so no mode grows, at the price of an O((kh)⁴) damping per step. Higher
causal stencils put poles outside the circle, and the trapezoidal derivative is
itself recursive and amplifies round-off in chained derivatives. Because one
operator algebra is used throughout, the identities of the decomposition
(trace, divergence, τ algebra, projector algebra) hold to round-off.

Key Features:
- Trace reversal in n dimensions, h̄ = h − (2/n)η·tr h
- Unique past-compact split h = hˢ + hⱽ + hᵀᵀ
- Complete de Donder gauge fixing
- τ operator with scalar and transverse-traceless projectors
- Linearised Einstein, I and J tensors in sector and closed forms
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import lfilter

from services.duhamel import retarded_apply
from services.error_handler import DomainError, HypothesisError
from services.mode_solver import smooth_cutoff

logger = logging.getLogger(__name__)

# f′(t_k) ≈ (3f_k − 4f_{k−1} + f_{k−2}) / (2h)
_BACKWARD_STENCIL = np.array([3.0, -4.0, 1.0]) / 2.0
DIVERGENCE_TOL = 1e-8


# ---------------------------------------------------------------------------
# Grids and fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldGrid:
    """Spacetime dimension n, box side ℓ, integer wave numbers and time grid"""
    n: int
    ell: float
    modes: np.ndarray
    t0: float
    dt: float
    steps: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"dimension must be at least 2, got {self.n}", field="n")
        modes = np.asarray(self.modes)
        if modes.ndim != 2 or modes.shape[1] != self.n - 1:
            raise DomainError(f"modes must have {self.n - 1} spatial components", field="modes")
        if not self.ell > 0 or not self.dt > 0:
            raise DomainError("box side and time step must be positive", field="ell")
        if self.steps < 5:
            raise DomainError("time grid needs at least five steps", field="steps")

    @classmethod
    def box(cls, n: int = 4, per_axis: int = 8, ell: float = 2.0 * np.pi,
            t0: float = 0.0, dt: float = 0.1, steps: int = 256) -> "FieldGrid":
        axis = np.rint(np.fft.fftfreq(per_axis) * per_axis).astype(int)
        mesh = np.meshgrid(*([axis] * (n - 1)), indexing="ij")
        modes = np.stack([g.ravel() for g in mesh], axis=1)
        return cls(n, ell, modes, t0, dt, steps)

    @property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi / self.ell * np.asarray(self.modes, dtype=float)

    @property
    def k2(self) -> np.ndarray:
        return np.sum(self.k ** 2, axis=1)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps)

    @property
    def eta(self) -> np.ndarray:
        return np.diag([-1.0] + [1.0] * (self.n - 1))

    def partner_index(self) -> np.ndarray:
        """Index of −k for each mode, −1 when −k is not on the grid"""
        lookup = {tuple(m): i for i, m in enumerate(np.asarray(self.modes))}
        return np.array([lookup.get(tuple(-m), -1) for m in np.asarray(self.modes)])


@dataclass
class ModeField:
    """Per-mode time series with rank 0, 1 or 2 trailing spacetime indices"""
    grid: FieldGrid
    data: np.ndarray
    support_start: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        K, T = len(self.grid.modes), self.grid.steps
        if self.data.shape[:2] != (K, T) or any(s != self.grid.n for s in self.data.shape[2:]):
            raise DomainError(f"field shape {self.data.shape} does not match the grid", field="data")
        if not self.support_start > self.grid.t0:
            raise DomainError("support must start after the first grid point", field="support_start")
        before = self.grid.times < self.support_start
        peak = float(np.max(np.abs(self.data))) if self.data.size else 0.0
        if np.any(np.abs(self.data[:, before]) > 1e-12 * max(peak, 1e-300)):
            raise DomainError("field does not vanish before its support", field="data")

    @property
    def rank(self) -> int:
        return self.data.ndim - 2

    def like(self, data: np.ndarray):
        return type(self)(self.grid, data, self.support_start)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def reality_defect(self) -> float:
        """max |h(−k) − conj h(k)| over paired modes"""
        partner = self.grid.partner_index()
        paired = partner >= 0
        if not np.any(paired):
            return 0.0
        return float(np.max(np.abs(self.data[partner[paired]] - np.conj(self.data[paired]))))


class SymmetricTensorField(ModeField):
    def __post_init__(self):
        super().__post_init__()
        if self.rank != 2:
            raise DomainError("tensor field needs two spacetime indices", field="data")
        asym = np.max(np.abs(self.data - np.swapaxes(self.data, 2, 3))) if self.data.size else 0.0
        if asym > 1e-12 * max(self.sup_norm(), 1e-300):
            raise DomainError(f"tensor field is not symmetric (defect {asym:.3e})", field="data")


# ---------------------------------------------------------------------------
# Operator algebra
# ---------------------------------------------------------------------------

class WaveAlgebra:
    """Causal derivatives, □ and its exact retarded inverse on one grid"""

    def __init__(self, grid: FieldGrid):
        self.grid = grid
        self.d = _BACKWARD_STENCIL / grid.dt
        self.eta = grid.eta
        self.eta_diag = np.diag(self.eta)
        d2 = np.convolve(self.d, self.d)
        self._groups = []
        for k2 in np.unique(grid.k2):
            a = -d2.copy()
            a[0] -= k2
            self._groups.append((np.nonzero(grid.k2 == k2)[0], a))

    def _expand(self, vec: np.ndarray, ndim: int) -> np.ndarray:
        return vec.reshape((-1, 1) + (1,) * (ndim - 2))

    def partial(self, f: np.ndarray, a: int) -> np.ndarray:
        """∂_a f, acting on the leading (mode, time) axes"""
        if a == 0:
            return lfilter(self.d, [1.0], f, axis=1)
        return 1j * self._expand(self.grid.k[:, a - 1], f.ndim) * f

    def grad(self, f: np.ndarray) -> np.ndarray:
        """(∂_a f)[..., a, ...] with the new index placed first"""
        return np.stack([self.partial(f, a) for a in range(self.grid.n)], axis=2)

    def div(self, f: np.ndarray) -> np.ndarray:
        """∂ᵃ f_{a...}, contracting the first spacetime index"""
        return sum(self.eta_diag[a] * self.partial(f[:, :, a], a) for a in range(self.grid.n))

    def box(self, f: np.ndarray) -> np.ndarray:
        return -self.partial(self.partial(f, 0), 0) - self._expand(self.grid.k2, f.ndim) * f

    def G(self, f: np.ndarray) -> np.ndarray:
        """Exact causal inverse of the discrete □"""
        out = np.empty_like(f, dtype=complex)
        for idx, a in self._groups:
            out[idx] = lfilter([1.0], a, f[idx], axis=1)
        return out

    def trace(self, h: np.ndarray) -> np.ndarray:
        return np.einsum("a,ktaa->kt", self.eta_diag, h)

    def eta_times(self, f: np.ndarray) -> np.ndarray:
        return f[:, :, None, None] * self.eta[None, None]

    def sym_grad(self, v: np.ndarray) -> np.ndarray:
        """∂_a v_b + ∂_b v_a"""
        g = self.grad(v)
        return g + np.swapaxes(g, 2, 3)

    def hessian(self, f: np.ndarray) -> np.ndarray:
        return self.grad(self.grad(f))

    def divdiv(self, h: np.ndarray) -> np.ndarray:
        """∂ᵃ∂ᵇ h_ab"""
        return self.div(np.stack([self.div(h[:, :, :, b]) for b in range(self.grid.n)], axis=2))

    def div_tensor(self, h: np.ndarray) -> np.ndarray:
        """(∂ᵃ h_ab)_b"""
        return np.stack([self.div(h[:, :, :, b]) for b in range(self.grid.n)], axis=2)


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def retarded_scalar(g: np.ndarray, k: float, dt: float, method: str = "duhamel",
                    algebra: Optional[WaveAlgebra] = None, mode: int = 0) -> np.ndarray:
    """
    Per-mode solution of □u = g with □ = −∂²_t − |k|².

    method "duhamel" integrates −sin(|k|(t−s))/|k| against the linearly
    interpolated source; method "discrete" applies the exact inverse of the
    discrete □ of the given algebra for the given mode index.
    """
    g = np.asarray(g)
    if method == "duhamel":
        return retarded_apply(k * k, g, dt)
    if method == "discrete":
        if algebra is None:
            raise DomainError("discrete retarded inverse needs a WaveAlgebra", field="algebra")
        full = np.zeros((len(algebra.grid.modes), len(g)), dtype=complex)
        full[mode] = g
        return algebra.G(full)[mode]
    raise DomainError(f"unknown method '{method}'", field="method")


def trace_reverse(h: SymmetricTensorField) -> SymmetricTensorField:
    """h̄ = h − (2/n)η·tr h; an involution in every dimension"""
    alg = WaveAlgebra(h.grid)
    return h.like(h.data - (2.0 / h.grid.n) * alg.eta_times(alg.trace(h.data)))


@dataclass
class DecompositionResult:
    w: ModeField
    vT: ModeField
    hS: SymmetricTensorField
    hV: SymmetricTensorField
    hTT: SymmetricTensorField
    residuals: Dict[str, float] = field(default_factory=dict)


def _scalar_w(alg: WaveAlgebra, h: np.ndarray) -> np.ndarray:
    """w = n/(n−1)·𝖦²(∂ᵃ∂ᵇh_ab − □h/n); the k = 0 modes use 𝖦∂²_t = −1 to drop one 𝖦"""
    n = alg.grid.n
    tr = alg.trace(h)
    w = (n / (n - 1.0)) * alg.G(alg.G(alg.divdiv(h) - alg.box(tr) / n))
    zero = alg.grid.k2 == 0.0
    if np.any(zero):
        y = h[zero][:, :, 0, 0] + tr[zero] / n
        full = np.zeros_like(tr)
        full[zero] = y
        w[zero] = -(n / (n - 1.0)) * alg.G(full)[zero]
    return w


def _split(alg: WaveAlgebra, h: np.ndarray) -> Tuple[np.ndarray, ...]:
    n = alg.grid.n
    tr = alg.trace(h)
    w = _scalar_w(alg, h)
    box_w = alg.box(w)
    src = alg.div_tensor(h) - alg.grad(tr) / n - ((n - 1.0) / n) * alg.grad(box_w)
    v = alg.G(src)
    hS = alg.hessian(w) - alg.eta_times(box_w) / n + alg.eta_times(tr) / n
    hV = alg.sym_grad(v)
    return w, v, hS, hV, h - hS - hV


def _relative(value: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(value)) / max(scale, 1e-300)) if value.size else 0.0


def decompose(h: SymmetricTensorField) -> DecompositionResult:
    """Unique past-compact (w, vᵀ, hᵀᵀ) with h = hˢ + hⱽ + hᵀᵀ"""
    alg = WaveAlgebra(h.grid)
    w, v, hS, hV, hTT = _split(alg, h.data)
    scale = h.sup_norm()
    grad_scale = float(np.max(np.abs(alg.grad(h.data)))) if h.data.size else 0.0
    residuals = {
        "reconstruction": _relative(h.data - hS - hV - hTT, scale),
        "trace_TT": _relative(alg.trace(hTT), scale),
        "divergence_TT": _relative(alg.div_tensor(hTT), grad_scale),
        "divergence_vT": _relative(alg.div(v), max(grad_scale, scale)),
    }
    logger.info(f"decomposition residuals: {residuals}")
    s = h.support_start
    return DecompositionResult(
        ModeField(h.grid, w, s), ModeField(h.grid, v, s),
        SymmetricTensorField(h.grid, hS, s), SymmetricTensorField(h.grid, hV, s),
        SymmetricTensorField(h.grid, hTT, s), residuals,
    )


def gauge_transform(h: SymmetricTensorField, X: ModeField) -> SymmetricTensorField:
    """h ↦ h + ∂_a X_b + ∂_b X_a"""
    alg = WaveAlgebra(h.grid)
    return h.like(h.data + alg.sym_grad(X.data))


def de_donder_fix(h: SymmetricTensorField) -> Tuple[SymmetricTensorField, ModeField]:
    """The unique past-compact X̃ making the trace reversal divergence-free"""
    n = h.grid.n
    if n == 2:
        raise DomainError("de Donder gauge fixing needs n > 2", field="n")
    alg = WaveAlgebra(h.grid)
    hbar = trace_reverse(h).data
    w_bar, v_bar, _, _, _ = _split(alg, hbar)
    tr_bar = alg.trace(hbar)
    Y = -alg.G(((n - 1.0) / (2.0 * (n - 2.0))) * alg.box(w_bar) + tr_bar / (2.0 * (n - 2.0)))
    X = -v_bar + alg.grad(Y)
    h_new = h.like(h.data + alg.sym_grad(X))
    residual = divergence_residual(trace_reverse(h_new))
    logger.info(f"de Donder fix: divergence residual {residual:.3e}")
    return h_new, ModeField(h.grid, X, h.support_start)


def divergence_residual(hbar: SymmetricTensorField) -> float:
    """max|∂ᵃh̄_ab| relative to max|∂_c h̄_ab|"""
    alg = WaveAlgebra(hbar.grid)
    scale = float(np.max(np.abs(alg.grad(hbar.data)))) if hbar.data.size else 0.0
    return _relative(alg.div_tensor(hbar.data), scale)


def _require_divergence_free(hbar: SymmetricTensorField, tol: float = DIVERGENCE_TOL):
    if hbar.sup_norm() == 0.0:
        return
    residual = divergence_residual(hbar)
    if residual > tol:
        raise HypothesisError(f"field is not divergence-free (residual {residual:.3e})", offending=residual)


def apply_tau(f: ModeField) -> SymmetricTensorField:
    """τ_ab f = η_ab f − ∂_a∂_b 𝖦f"""
    if f.rank != 0:
        raise DomainError("τ acts on scalar fields", field="f")
    alg = WaveAlgebra(f.grid)
    data = alg.eta_times(f.data) - alg.hessian(alg.G(f.data))
    return SymmetricTensorField(f.grid, data, f.support_start)


def tau_contract(h: SymmetricTensorField) -> ModeField:
    """τ^{cd} h_cd = tr h − 𝖦 ∂ᶜ∂ᵈh_cd"""
    alg = WaveAlgebra(h.grid)
    return ModeField(h.grid, alg.trace(h.data) - alg.G(alg.divdiv(h.data)), h.support_start)


def _tau_pair(alg: WaveAlgebra, h: np.ndarray) -> np.ndarray:
    """½(τ_aᶜτ_bᵈ + τ_aᵈτ_bᶜ)h_cd for symmetric h"""
    Gdiv = alg.G(alg.div_tensor(h))
    one = alg.grad(Gdiv)
    cross = one + np.swapaxes(one, 2, 3)
    return h - cross + alg.hessian(alg.G(alg.G(alg.divdiv(h))))


def apply_PS(hbar: SymmetricTensorField, check: bool = True) -> SymmetricTensorField:
    """P^S h̄ = τ_ab τ^{cd}h̄_cd / (n − 1)"""
    if check:
        _require_divergence_free(hbar)
    out = apply_tau(tau_contract(hbar))
    return hbar.like(out.data / (hbar.grid.n - 1.0))


def apply_PTT(hbar: SymmetricTensorField, check: bool = True) -> SymmetricTensorField:
    if check:
        _require_divergence_free(hbar)
    alg = WaveAlgebra(hbar.grid)
    pair = _tau_pair(alg, hbar.data)
    return hbar.like(pair - apply_PS(hbar, check=False).data)


@dataclass
class CurvatureResult:
    G1: SymmetricTensorField
    G1_S: SymmetricTensorField
    G1_TT: SymmetricTensorField
    I1: SymmetricTensorField
    J1: SymmetricTensorField


def linearised_curvature(hbar: SymmetricTensorField) -> CurvatureResult:
    """
    G¹ = −½□h̄ with sectors G¹ˢ = −τ□tr h̄ / (2(n−1)) and G¹ᵀᵀ = −½□h̄ᵀᵀ;
    I¹ = □□h̄ᵀᵀ and J¹ = 2(n−1)□G¹ˢ = −τ□□tr h̄.
    """
    _require_divergence_free(hbar)
    n = hbar.grid.n
    alg = WaveAlgebra(hbar.grid)
    box_h = alg.box(hbar.data)
    hS = apply_PS(hbar, check=False).data
    hTT = hbar.data - hS
    G1_S = -0.5 * alg.box(hS)
    G1_TT = -0.5 * alg.box(hTT)
    like = hbar.like
    return CurvatureResult(
        like(-0.5 * box_h), like(G1_S), like(G1_TT),
        like(alg.box(alg.box(hTT))), like(2.0 * (n - 1.0) * alg.box(G1_S)),
    )


def linearised_I_J(hbar: SymmetricTensorField) -> Tuple[SymmetricTensorField, SymmetricTensorField]:
    """Closed forms I = □□h̄ − τ□□tr h̄/(n−1) and J = −τ□□tr h̄"""
    n = hbar.grid.n
    alg = WaveAlgebra(hbar.grid)
    bb_tr = ModeField(hbar.grid, alg.box(alg.box(alg.trace(hbar.data))), hbar.support_start)
    tau_bb = apply_tau(bb_tr).data
    I = alg.box(alg.box(hbar.data)) - tau_bb / (n - 1.0)
    return hbar.like(I), hbar.like(-tau_bb)


# ---------------------------------------------------------------------------
# Synthetic fields
# ---------------------------------------------------------------------------

def _time_profile(times: np.ndarray, start: float, width: float, omega: float, phase: float) -> np.ndarray:
    half = 0.5 * width
    rise = smooth_cutoff(times - (start + half), half)
    fall = smooth_cutoff((start + width) - times, half)
    return rise * fall * np.cos(omega * times + phase)


def random_field(grid: FieldGrid, rank: int = 2, support_start: float = 0.5,
                 width: Optional[float] = None, max_omega: float = 2.0,
                 seed: int = 0) -> ModeField:
    """Smooth band-limited past-compact field obeying the reality condition"""
    rng = np.random.default_rng(seed)
    times = grid.times
    width = 0.5 * (times[-1] - support_start) if width is None else width
    K, T, n = len(grid.modes), grid.steps, grid.n
    shape = (K,) + (n,) * rank
    amp = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if rank == 2:
        amp = 0.5 * (amp + np.swapaxes(amp, 1, 2))
    omega = rng.uniform(0.0, max_omega, size=K)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=K)
    profiles = np.stack([_time_profile(times, support_start, width, om, ph) for om, ph in zip(omega, phase)])
    data = profiles.reshape((K, T) + (1,) * rank) * amp[:, None]

    partner = grid.partner_index()
    for i, j in enumerate(partner):
        if j < 0:
            data[i] = 0.0
        elif j == i:
            data[i] = data[i].real
        elif j > i:
            data[j] = np.conj(data[i])
    cls = SymmetricTensorField if rank == 2 else ModeField
    return cls(grid, data, support_start)


def tt_plane_wave(grid: FieldGrid, mode_index: int, support_start: float = 0.5,
                  width: Optional[float] = None, omega: float = 1.0) -> SymmetricTensorField:
    """Transverse-traceless polarisation ε ⊥ k on one mode and its partner"""
    n = grid.n
    if n < 4:
        raise DomainError("a transverse-traceless polarisation needs n ≥ 4", field="n")
    k = grid.k[mode_index]
    if not np.any(k):
        raise DomainError("TT plane wave needs k ≠ 0", field="mode_index")
    basis = np.linalg.svd(k[None, :])[2][1:3]  # two unit vectors orthogonal to k
    e1, e2 = basis
    eps = np.zeros((n, n))
    eps[1:, 1:] = np.outer(e1, e2) + np.outer(e2, e1)
    times = grid.times
    width = 0.5 * (times[-1] - support_start) if width is None else width
    profile = _time_profile(times, support_start, width, omega, 0.0)
    data = np.zeros((len(grid.modes), grid.steps, n, n), dtype=complex)
    data[mode_index] = profile[:, None, None] * eps
    partner = grid.partner_index()[mode_index]
    if partner >= 0 and partner != mode_index:
        data[partner] = np.conj(data[mode_index])
    return SymmetricTensorField(grid, data, support_start)
