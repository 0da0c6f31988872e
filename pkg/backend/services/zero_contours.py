"""
Zero Contours: Re F_char = 0 and Im F_char = 0 on a complex grid
================================================================

Traces the two zero sets of the characteristic function on a rectangle of the
cut plane by marching squares, stitches cell segments into polylines with a
graph walk, and reads off the crossings of the two families, which are the
zeros of F_char.

Key Features:
- Vectorised node evaluation; cells straddling the cut are masked out
- Saddle cells resolved by the cell-centre average
- Segments stitched into open or closed polylines through networkx
- Crossings intersected cell by cell and clustered within grid resolution
- Parameter sweeps with a (fixed, swept) coefficient pair
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from services.error_handler import DomainError
from services.mode_algebra import (
    PrototypeCoefficients,
    ZeroSet,
    characteristic_F,
    find_zeros,
)
from services.spectral_core import SIXTEEN_PI2

logger = logging.getLogger(__name__)

SWEEPABLE = ("a", "a1", "a2", "b0", "b1", "b2")

# edge key: (0, iy, ix) horizontal from node (iy, ix); (1, iy, ix) vertical from node (iy, ix)
EdgeKey = Tuple[int, int, int]


@dataclass(frozen=True)
class ContourGrid:
    """Node lattice on [re_lo, re_hi] × [im_lo, im_hi]"""
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    n_re: int = 241
    n_im: int = 160

    def __post_init__(self):
        if not (self.re_hi > self.re_lo and self.im_hi > self.im_lo):
            raise DomainError("contour grid bounds are inverted", field="grid")
        if self.n_re < 3 or self.n_im < 3:
            raise DomainError("contour grid needs at least 3 nodes per axis", field="grid")

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.re_lo, self.re_hi, self.n_re),
                np.linspace(self.im_lo, self.im_hi, self.n_im))

    @property
    def resolution(self) -> float:
        dx = (self.re_hi - self.re_lo) / (self.n_re - 1)
        dy = (self.im_hi - self.im_lo) / (self.n_im - 1)
        return float(np.hypot(dx, dy))


@dataclass
class Polyline:
    points: np.ndarray  # (k, 2) columns Re, Im
    closed: bool = False

    def to_list(self) -> List[List[float]]:
        return self.points.tolist()


@dataclass
class SweepSpec:
    """One coefficient held fixed, another stepped through a list"""
    fixed_name: Optional[str] = None
    fixed_value: Optional[float] = None
    swept_name: Optional[str] = None
    swept_values: Sequence[float] = field(default_factory=list)

    def __post_init__(self):
        for name in (self.fixed_name, self.swept_name):
            if name is not None and name not in SWEEPABLE:
                raise DomainError(f"cannot sweep coefficient '{name}'", field="sweep")

    def panels(self, base: PrototypeCoefficients) -> List[Tuple[Optional[float], PrototypeCoefficients]]:
        coeffs = base
        if self.fixed_name is not None:
            coeffs = _set_coefficient(coeffs, self.fixed_name, float(self.fixed_value))
        if self.swept_name is None or not len(self.swept_values):
            return [(None, coeffs)]
        return [(float(v), _set_coefficient(coeffs, self.swept_name, float(v))) for v in self.swept_values]


@dataclass
class ContourPanel:
    label: str
    swept_value: Optional[float]
    coeffs: PrototypeCoefficients
    real_part: List[Polyline]
    imag_part: List[Polyline]
    crossings: List[complex]
    zeros: Optional[ZeroSet] = None
    max_crossing_offset: Optional[float] = None

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "swept_value": self.swept_value,
            "coefficients": self.coeffs.as_dict(),
            "crossings": [{"re": c.real, "im": c.imag} for c in self.crossings],
            "zeros": self.zeros.to_dict() if self.zeros is not None else None,
            "max_crossing_offset": self.max_crossing_offset,
            "n_real_polylines": len(self.real_part),
            "n_imag_polylines": len(self.imag_part),
        }


def _set_coefficient(coeffs: PrototypeCoefficients, name: str, value: float) -> PrototypeCoefficients:
    if name == "a":
        return PrototypeCoefficients(value, value, coeffs.b0, coeffs.b1, coeffs.b2)
    values = coeffs.as_dict()
    values[name] = value
    return PrototypeCoefficients(**values)


# ---------------------------------------------------------------------------
# Marching squares
# ---------------------------------------------------------------------------

def _edge_points(values: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> Dict[EdgeKey, Tuple[float, float]]:
    inside = values > 0.0
    points: Dict[EdgeKey, Tuple[float, float]] = {}
    for iy, ix in zip(*np.nonzero(inside[:, :-1] != inside[:, 1:])):
        v0, v1 = values[iy, ix], values[iy, ix + 1]
        t = v0 / (v0 - v1)
        points[(0, iy, ix)] = (xs[ix] + t * (xs[ix + 1] - xs[ix]), ys[iy])
    for iy, ix in zip(*np.nonzero(inside[:-1, :] != inside[1:, :])):
        v0, v1 = values[iy, ix], values[iy + 1, ix]
        t = v0 / (v0 - v1)
        points[(1, iy, ix)] = (xs[ix], ys[iy] + t * (ys[iy + 1] - ys[iy]))
    return points


def _cell_segments(values: np.ndarray, mask: Optional[np.ndarray] = None
                   ) -> Dict[Tuple[int, int], List[Tuple[EdgeKey, EdgeKey]]]:
    """Segments per cell (iy, ix), as pairs of crossed edges"""
    inside = (values > 0.0).astype(np.int64)
    code = (inside[:-1, :-1] | inside[:-1, 1:] << 1
            | inside[1:, 1:] << 2 | inside[1:, :-1] << 3)
    active = (code != 0) & (code != 15)
    if mask is not None:
        active &= ~mask
    out: Dict[Tuple[int, int], List[Tuple[EdgeKey, EdgeKey]]] = {}
    for iy, ix in zip(*np.nonzero(active)):
        bottom, top = (0, iy, ix), (0, iy + 1, ix)
        left, right = (1, iy, ix), (1, iy, ix + 1)
        c = code[iy, ix]
        if c in (5, 10):
            centre_in = values[iy:iy + 2, ix:ix + 2].mean() > 0.0
            if (c == 5) == centre_in:
                out[(iy, ix)] = [(bottom, right), (top, left)]
            else:
                out[(iy, ix)] = [(left, bottom), (right, top)]
            continue
        crossed = []
        if bool(c & 1) != bool(c & 2):
            crossed.append(bottom)
        if bool(c & 2) != bool(c & 4):
            crossed.append(right)
        if bool(c & 4) != bool(c & 8):
            crossed.append(top)
        if bool(c & 8) != bool(c & 1):
            crossed.append(left)
        out[(iy, ix)] = [(crossed[0], crossed[1])]
    return out


def stitch_segments(segments: Sequence[Tuple[EdgeKey, EdgeKey]],
                    points: Dict[EdgeKey, Tuple[float, float]]) -> List[Polyline]:
    """Join segments sharing a crossed edge into polylines"""
    graph = nx.Graph()
    graph.add_edges_from(segments)
    lines: List[Polyline] = []
    for component in sorted(nx.connected_components(graph), key=min):
        sub = graph.subgraph(component)
        odd = sorted(n for n in sub.nodes if sub.degree(n) % 2)
        source = odd[0] if odd else min(sub.nodes)
        path = list(nx.eulerian_path(sub, source=source))
        chain = [path[0][0]] + [v for _, v in path]
        lines.append(Polyline(np.array([points[k] for k in chain]), closed=not odd))
    return lines


def marching_squares(values: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                     mask: Optional[np.ndarray] = None) -> List[Polyline]:
    """Zero level set of values[iy, ix] sampled at (xs[ix], ys[iy])"""
    points = _edge_points(values, xs, ys)
    cells = _cell_segments(values, mask)
    segments = [seg for key in sorted(cells) for seg in cells[key]]
    return stitch_segments(segments, points)


# ---------------------------------------------------------------------------
# Crossings
# ---------------------------------------------------------------------------

def _intersect(p, q, r, s) -> Optional[complex]:
    p, q, r, s = (np.asarray(v, dtype=float) for v in (p, q, r, s))
    d1, d2 = q - p, s - r
    den = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(den) < 1e-300:
        return None
    diff = r - p
    u = (diff[0] * d2[1] - diff[1] * d2[0]) / den
    v = (diff[0] * d1[1] - diff[1] * d1[0]) / den
    if -1e-12 <= u <= 1 + 1e-12 and -1e-12 <= v <= 1 + 1e-12:
        x = p + u * d1
        return complex(x[0], x[1])
    return None


def contour_crossings(re_values: np.ndarray, im_values: np.ndarray, xs: np.ndarray,
                      ys: np.ndarray, mask: Optional[np.ndarray] = None,
                      cluster_radius: Optional[float] = None) -> List[complex]:
    """Intersections of the two zero sets, one per cluster, sorted by (Re, Im)"""
    re_pts = _edge_points(re_values, xs, ys)
    im_pts = _edge_points(im_values, xs, ys)
    re_cells = _cell_segments(re_values, mask)
    im_cells = _cell_segments(im_values, mask)
    raw: List[complex] = []
    for key in sorted(set(re_cells) & set(im_cells)):
        for a, b in re_cells[key]:
            for c, d in im_cells[key]:
                hit = _intersect(re_pts[a], re_pts[b], im_pts[c], im_pts[d])
                if hit is not None:
                    raw.append(hit)
    if cluster_radius is None:
        cluster_radius = float(np.hypot(xs[1] - xs[0], ys[1] - ys[0]))
    clusters: List[List[complex]] = []
    for z in raw:
        for cl in clusters:
            if abs(z - cl[0]) <= cluster_radius:
                cl.append(z)
                break
        else:
            clusters.append([z])
    merged = [complex(np.mean(cl)) for cl in clusters]
    return sorted(merged, key=lambda z: (round(z.real, 12), round(z.imag, 12)))


def crossing_offset(crossings: Sequence[complex], zs: ZeroSet, grid: ContourGrid) -> float:
    """Largest distance from a zero inside the grid to its nearest crossing"""
    worst = 0.0
    for g in zs.gammas:
        if not (grid.re_lo <= g.real <= grid.re_hi and grid.im_lo <= g.imag <= grid.im_hi):
            continue
        if not crossings:
            return float("inf")
        worst = max(worst, min(abs(g - c) for c in crossings))
    return worst


# ---------------------------------------------------------------------------
# Panels and sweeps
# ---------------------------------------------------------------------------

def _cut_mask(xs: np.ndarray, ys: np.ndarray, m: float) -> np.ndarray:
    """Cells whose closure meets the cut [4m², ∞)"""
    four_m2 = 4.0 * m * m
    straddle = (ys[:-1] <= 0.0) & (ys[1:] >= 0.0)
    reaches = xs[1:] >= four_m2
    return straddle[:, None] & reaches[None, :]


def evaluate_on_grid(coeffs: PrototypeCoefficients, m: float, grid: ContourGrid
                     ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    xs, ys = grid.axes()
    Z = xs[None, :] + 1j * ys[:, None]
    on_cut = (Z.imag == 0.0) & (Z.real >= 4.0 * m * m)
    if np.any(on_cut):
        raise DomainError("contour grid has nodes on the cut; use an even number of Im nodes",
                          field="grid")
    return xs, ys, np.asarray(characteristic_F(Z, coeffs, m), dtype=complex)


def trace_panel(coeffs: PrototypeCoefficients, m: float, grid: ContourGrid,
                label: str = "", swept_value: Optional[float] = None,
                with_zeros: bool = True) -> ContourPanel:
    xs, ys, F = evaluate_on_grid(coeffs, m, grid)
    mask = _cut_mask(xs, ys, m)
    re_lines = marching_squares(F.real, xs, ys, mask)
    im_lines = marching_squares(F.imag, xs, ys, mask)
    crossings = contour_crossings(F.real, F.imag, xs, ys, mask)
    panel = ContourPanel(label, swept_value, coeffs, re_lines, im_lines, crossings)
    if with_zeros:
        panel.zeros = find_zeros(coeffs, m)
        panel.max_crossing_offset = crossing_offset(crossings, panel.zeros, grid)
    logger.debug(f"panel {label}: {len(re_lines)} Re lines, {len(im_lines)} Im lines, "
                 f"{len(crossings)} crossings")
    return panel


def plan_panels(coeffs: PrototypeCoefficients, sweep: Optional[SweepSpec] = None,
                unit_density: bool = False) -> List[Tuple[str, Optional[float], PrototypeCoefficients]]:
    """
    (label, swept value, coefficients) per panel. With unit_density the b's are
    divided by 16π², i.e. the density is taken with unit high-mass normalisation.
    """
    sweep = SweepSpec() if sweep is None else sweep
    out = []
    for value, c in sweep.panels(coeffs):
        if unit_density:
            c = c.scaled_b(1.0 / SIXTEEN_PI2)
        label = "base" if value is None else f"{sweep.swept_name}={value:g}"
        out.append((label, value, c))
    return out


def trace_zero_sets(coeffs: PrototypeCoefficients, m: float, grid: ContourGrid,
                    sweep: Optional[SweepSpec] = None, unit_density: bool = False,
                    with_zeros: bool = True) -> List[ContourPanel]:
    """Both zero sets per sweep value"""
    panels = [trace_panel(c, m, grid, label, value, with_zeros)
              for label, value, c in plan_panels(coeffs, sweep, unit_density)]
    logger.info(f"traced {len(panels)} contour panels")
    return panels


def figure_sweep(reading: str) -> Tuple[PrototypeCoefficients, SweepSpec]:
    """
    The two readings of the S-mode figure parameters, a = −1 and b₀ = −1:
    reading 'A' fixes b₁ = −10 and sweeps b₂; reading 'B' fixes b₂ = −10 and
    sweeps b₁. Both step through {3, 4, 5, 5.4}.
    """
    base = PrototypeCoefficients(-1.0, -1.0, -1.0, -10.0, -10.0)
    values = [3.0, 4.0, 5.0, 5.4]
    if reading == "A":
        return base, SweepSpec("b1", -10.0, "b2", values)
    if reading == "B":
        return base, SweepSpec("b2", -10.0, "b1", values)
    raise DomainError(f"unknown figure reading '{reading}'", field="reading")


def figure_grid(m: float = 1.0) -> ContourGrid:
    four_m2 = 4.0 * m * m
    return ContourGrid(-0.5 * four_m2, 2.0 * four_m2, -four_m2, four_m2, n_re=241, n_im=160)


# Reading A in the unit-density normalisation: a conjugate pair approaches the
# real axis and splits into two real zeros below threshold between b₂ = 4 and 5.
FIGURE_A_TOPOLOGY = {3.0: "pair", 4.0: "pair", 5.0: "two_real", 5.4: "two_real"}


def zero_topology(zeros: ZeroSet, m: float) -> str:
    """
    'pair' for one conjugate pair off the axis, 'two_real' for no pair and at
    least two real zeros in (0, 4m²), 'other' otherwise.
    """
    gammas = zeros.gammas
    off_axis = int(np.sum(np.abs(gammas.imag) > 0.0))
    gap = zeros.real_gammas
    in_gap = int(np.sum((gap > 0.0) & (gap < 4.0 * m * m)))
    if off_axis == 2:
        return "pair"
    if off_axis == 0 and in_gap >= 2:
        return "two_real"
    return "other"


def figure_topology_defects(panels: Sequence[ContourPanel], m: float) -> Dict[str, str]:
    """Reading-A panels whose zero topology differs from FIGURE_A_TOPOLOGY, label -> found"""
    defects = {}
    for panel in panels:
        expected = FIGURE_A_TOPOLOGY.get(panel.swept_value)
        if expected is None or panel.zeros is None:
            continue
        found = zero_topology(panel.zeros, m)
        if found != expected:
            defects[panel.label] = found
    return defects
