"""
Export and formatting of run artifacts.

JSON manifests, CSV time series and contour tables, SVG contour panels and the
columnar mode-field format. Every writer is deterministic: identical inputs
give byte-identical files.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from services.error_handler import ConfigValidationError  # noqa: E402
from services.tensor_decomposition import FieldGrid, ModeField, SymmetricTensorField  # noqa: E402

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FIELD_MAGIC = "# semistab mode field v1"
_HEADER_KEYS = ("rank", "n", "ell", "t0", "dt", "steps", "support_start", "modes")

# Panel layout for contour figures
CONTOUR_STYLE = {
    "figure.figsize": [7.0, 5.0],
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "font.family": "sans-serif",
    "lines.linewidth": 1.0,
    "svg.hashsalt": "semistab",
    "svg.fonttype": "none",
}


def _to_builtin(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": _to_builtin(float(value.real)), "im": _to_builtin(float(value.imag))}
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def _pair_indices(n: int, rank: int) -> List[tuple]:
    if rank == 0:
        return [()]
    if rank == 1:
        return [(a,) for a in range(n)]
    return [(a, b) for a in range(n) for b in range(a, n)]


class ExportFormatter:
    """
    Multi-format export for run results.

    Supports:
    - JSON manifests (sorted keys, repr floats)
    - CSV through pandas with 17 significant digits
    - SVG contour panels through matplotlib (Agg)
    - Columnar mode-field files (read and write)
    """

    def __init__(self, out_dir: PathLike = "."):
        self.out_dir = Path(out_dir)

    def _path(self, name: PathLike) -> Path:
        path = Path(name)
        if not path.is_absolute():
            path = self.out_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # JSON ----------------------------------------------------------------

    def export_json(self, payload: Dict[str, Any]) -> str:
        return json.dumps(_to_builtin(payload), indent=2, sort_keys=True) + "\n"

    def write_json(self, name: PathLike, payload: Dict[str, Any]) -> Path:
        path = self._path(name)
        path.write_text(self.export_json(payload), encoding="utf-8")
        logger.info(f"wrote {path}")
        return path

    # CSV -----------------------------------------------------------------

    def write_csv(self, name: PathLike, frame: pd.DataFrame) -> Path:
        path = self._path(name)
        frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
        logger.info(f"wrote {path} ({len(frame)} rows)")
        return path

    @staticmethod
    def solution_frame(times: np.ndarray, samples: np.ndarray) -> pd.DataFrame:
        samples = np.asarray(samples)
        return pd.DataFrame({
            "t": np.asarray(times, dtype=float),
            "re_phi": np.real(samples).astype(float),
            "im_phi": np.imag(samples).astype(float),
        })

    @staticmethod
    def contour_frame(panels: Sequence) -> pd.DataFrame:
        rows = []
        for p_idx, panel in enumerate(panels):
            for part, lines in (("re", panel.real_part), ("im", panel.imag_part)):
                for l_idx, line in enumerate(lines):
                    for v_idx, (x, y) in enumerate(np.asarray(line.points)):
                        rows.append((p_idx, panel.label, part, l_idx, v_idx, float(x), float(y)))
        return pd.DataFrame(rows, columns=["panel", "label", "part", "polyline", "vertex", "re", "im"])

    # SVG -----------------------------------------------------------------

    def render_contours_svg(self, name: PathLike, panels: Sequence, m: float = 1.0) -> Path:
        """One subplot per panel: Re F = 0 solid, Im F = 0 dashed, cut shaded"""
        path = self._path(name)
        with matplotlib.rc_context(CONTOUR_STYLE):
            cols = min(len(panels), 2) or 1
            rows = int(math.ceil(len(panels) / cols)) or 1
            fig, axes = plt.subplots(rows, cols, squeeze=False)
            for ax, panel in zip(axes.ravel(), panels):
                for line in panel.real_part:
                    pts = np.asarray(line.points)
                    ax.plot(pts[:, 0], pts[:, 1], color="tab:blue", linestyle="-")
                for line in panel.imag_part:
                    pts = np.asarray(line.points)
                    ax.plot(pts[:, 0], pts[:, 1], color="tab:red", linestyle="--")
                if panel.crossings:
                    cs = np.asarray(panel.crossings)
                    ax.plot(cs.real, cs.imag, "ko", markersize=3)
                ax.axvline(4.0 * m * m, color="0.6", linewidth=2.0)
                ax.set_title(panel.label, fontsize=9)
                ax.set_xlabel("Re γ")
                ax.set_ylabel("Im γ")
            for ax in axes.ravel()[len(panels):]:
                ax.set_visible(False)
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
            plt.close(fig)
        logger.info(f"wrote {path}")
        return path

    # Mode fields ---------------------------------------------------------

    def write_field(self, name: PathLike, field: ModeField) -> Path:
        grid = field.grid
        lines = [
            FIELD_MAGIC,
            f"rank {field.rank}",
            f"n {grid.n}",
            f"ell {grid.ell!r}",
            f"t0 {float(grid.t0)!r}",
            f"dt {float(grid.dt)!r}",
            f"steps {grid.steps}",
            f"support_start {float(field.support_start)!r}",
            f"modes {len(grid.modes)}",
        ]
        for i, mode in enumerate(np.asarray(grid.modes)):
            lines.append("mode " + " ".join(str(int(v)) for v in [i, *mode]))
        lines.append("data")
        comps = _pair_indices(grid.n, field.rank)
        for i in range(len(grid.modes)):
            for t in range(grid.steps):
                vals = [field.data[(i, t) + c] for c in comps]
                lines.append(f"{i} {t} " + " ".join(f"{v.real!r} {v.imag!r}" for v in vals))
        path = self._path(name)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"wrote {path}")
        return path

    def read_field(self, name: PathLike) -> ModeField:
        path = Path(name)
        try:
            text = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise ConfigValidationError(f"cannot read field file {path}: {exc}", field="path")
        return parse_field(text)


def _header_value(key: str, raw: str, lineno: int):
    try:
        if key in ("rank", "n", "steps", "modes"):
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigValidationError(f"line {lineno}: header field '{key}' has invalid value '{raw}'", field=key)


def parse_field(lines: Sequence[str]) -> ModeField:
    """Parse the columnar mode-field format; errors name the line and field"""
    if not lines or lines[0].strip() != FIELD_MAGIC:
        raise ConfigValidationError("line 1: missing mode-field header", field="header")
    header: Dict[str, Any] = {}
    pos = 1
    for key in _HEADER_KEYS:
        lineno = pos + 1
        if pos >= len(lines):
            raise ConfigValidationError(f"line {lineno}: missing header field '{key}'", field=key)
        parts = lines[pos].split()
        if len(parts) != 2 or parts[0] != key:
            raise ConfigValidationError(f"line {lineno}: expected header field '{key}'", field=key)
        header[key] = _header_value(key, parts[1], lineno)
        pos += 1

    rank, n, K = header["rank"], header["n"], header["modes"]
    if rank not in (0, 1, 2):
        raise ConfigValidationError(f"line 2: rank must be 0, 1 or 2, got {rank}", field="rank")
    modes = []
    for i in range(K):
        lineno = pos + 1
        parts = lines[pos].split() if pos < len(lines) else []
        if len(parts) != n + 1 or parts[0] != "mode":
            raise ConfigValidationError(f"line {lineno}: malformed mode line", field="mode")
        try:
            idx, *vec = (int(v) for v in parts[1:])
        except ValueError:
            raise ConfigValidationError(f"line {lineno}: mode entries must be integers", field="mode")
        if idx != i:
            raise ConfigValidationError(f"line {lineno}: expected mode {i}, got {idx}", field="mode")
        modes.append(vec)
        pos += 1
    if pos >= len(lines) or lines[pos].strip() != "data":
        raise ConfigValidationError(f"line {pos + 1}: expected 'data'", field="data")
    pos += 1

    try:
        grid = FieldGrid(n, header["ell"], np.array(modes, dtype=int).reshape(K, n - 1),
                         header["t0"], header["dt"], header["steps"])
    except Exception as exc:
        raise ConfigValidationError(f"invalid grid header: {exc}", field="header")
    comps = _pair_indices(n, rank)
    data = np.zeros((K, grid.steps) + (n,) * rank, dtype=complex)
    seen = np.zeros((K, grid.steps), dtype=bool)
    for offset, line in enumerate(lines[pos:]):
        lineno = pos + offset + 1
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2 + 2 * len(comps):
            raise ConfigValidationError(
                f"line {lineno}: expected {2 + 2 * len(comps)} columns, got {len(parts)}", field="data")
        try:
            i, t = int(parts[0]), int(parts[1])
            vals = np.array([float(v) for v in parts[2:]])
        except ValueError:
            raise ConfigValidationError(f"line {lineno}: non-numeric entry", field="data")
        if not (0 <= i < K and 0 <= t < grid.steps):
            raise ConfigValidationError(f"line {lineno}: index ({i}, {t}) out of range", field="data")
        z = vals[0::2] + 1j * vals[1::2]
        for c, v in zip(comps, z):
            data[(i, t) + c] = v
            if rank == 2:
                data[(i, t) + c[::-1]] = v
        seen[i, t] = True
    if not np.all(seen):
        missing = np.argwhere(~seen)[0]
        raise ConfigValidationError(f"data block is missing row for mode {missing[0]}, step {missing[1]}",
                                    field="data")
    cls = SymmetricTensorField if rank == 2 else ModeField
    return cls(grid, data, header["support_start"])
