"""
Command-line entry point for semistab.

    python main.py <zeros|solve|classify|decompose|cosmology|validate> --config run.json
        [--out DIR] [--threads N] [--tol-override KEY=VAL ...]
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from schemas.run_config import RunConfig, Tolerances, apply_overrides, load_run_config
from services.cosmology import (
    ALPHA1_S_FIXED,
    CosmologyInputs,
    hubble_and_lambda,
    invert_mass,
    planck_params,
    unstable_root_estimate,
)
from services.error_handler import (
    EXIT_OK,
    ConfigValidationError,
    SemistabError,
    ValidationFailure,
    exit_code_for,
)
from services.export_formatter import ExportFormatter
from services.mode_algebra import s_mode_b2_thresholds
from services.stability import classify_stability, packet_solve, rate_within_conformal
from services.tensor_decomposition import (
    SymmetricTensorField,
    de_donder_fix,
    decompose,
    divergence_residual,
    linearised_curvature,
    linearised_I_J,
    trace_reverse,
)
from services.validation_suite import run_validation
from services.zero_contours import ContourGrid, SweepSpec, figure_grid, figure_sweep
from tasks.sweep_pipeline import ModeJob, SweepPool, run_mode_sweep, run_zero_sweep
from utils.config import settings

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
COMMANDS = ("zeros", "solve", "classify", "decompose", "cosmology", "validate")

logger = logging.getLogger(__name__)


class JsonLogFormatter(logging.Formatter):
    """One JSON object per record"""

    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({
            "time": self.formatTime(record),
            "name": record.name,
            "level": record.levelname,
            "message": record.getMessage(),
        }, ensure_ascii=False)


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None):
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        force=True,
    )
    if (fmt or settings.LOG_FORMAT) == "json":
        for handler in logging.getLogger().handlers:
            handler.setFormatter(JsonLogFormatter())


def push_tolerances(tol: Tolerances):
    """Numerical tolerances read through settings follow the run's record"""
    settings.QUAD_ABS_TOL = tol.quad_abs
    settings.QUAD_REL_TOL = tol.quad_rel
    settings.ZERO_SEPARATION_TOL = tol.zero_separation
    settings.ZERO_RESIDUAL_TOL = tol.zero_residual
    settings.DYSON_TOL = tol.dyson


def _manifest(config: RunConfig, **payload) -> Dict:
    return {
        "schema_version": config.schema_version,
        "command": config.command,
        "tolerances": config.tolerances.model_dump(),
        **payload,
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_zeros(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.zeros
    targets = []
    if cfg.figure:
        m = 1.0
        for reading in cfg.figure:
            base, sweep = figure_sweep(reading)
            targets.append((reading, base, sweep))
    else:
        base, m = cfg.mode.build()
        s = cfg.sweep
        targets.append(("", base, SweepSpec(s.fixed, s.fixed_value, s.swept, s.values)))
    grid = ContourGrid(**cfg.grid.model_dump()) if cfg.grid is not None else figure_grid(m)

    panels, entries = [], []
    for reading, base, sweep in targets:
        for panel in run_zero_sweep(base, m, grid, sweep, cfg.unit_density, pool):
            if reading:
                panel.label = f"{reading}: {panel.label}"
            panels.append(panel)
            entries.append(dict(panel.to_dict(), reading=reading or None))

    written = [out.write_json("zeros.json", _manifest(
        config, m=m, unit_density=cfg.unit_density,
        grid=dict(asdict(grid), resolution=grid.resolution),
        panels=entries,
    ))]
    if cfg.contours:
        written.append(out.write_csv("contours.csv", out.contour_frame(panels)))
        written.append(out.render_contours_svg("contours.svg", panels, m))
    return written


def cmd_solve(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.solve
    coeffs, m = cfg.mode.build()
    problem_kw = {
        "c": cfg.c,
        "local_coefficients": cfg.local_coefficients.build() if cfg.local_coefficients else None,
        "omega_cutoff": cfg.omega_cutoff,
        "panel_nodes": cfg.panel_nodes,
        "tol": config.tolerances.dyson,
    }
    g, src = cfg.grid, cfg.source
    jobs = [
        ModeJob(coeffs, m, p, g.t0, g.T, g.dt, cfg.route, src.kind, src.t_on, src.width,
                src.amplitude, problem_kw, cfg.volterra_check, cfg.fit_window)
        for p in g.momenta
    ]
    results = run_mode_sweep(jobs, pool)

    written, modes = [], []
    for i, res in enumerate(results):
        files = {}
        for route, sol in res.solutions.items():
            path = out.write_csv(f"mode_{i:03d}_{route}.csv", out.solution_frame(sol.times, sol.samples))
            files[route] = path.name
            written.append(path)
        entry = res.to_dict()
        entry["files"] = files
        if res.delta is not None:
            entry["cross_route_ok"] = res.delta < config.tolerances.dual_route
        if res.volterra_delta is not None:
            entry["volterra_ok"] = res.volterra_delta < config.tolerances.volterra
        modes.append(entry)

    packet_entry = None
    if cfg.packet is not None:
        pk = cfg.packet
        packet = packet_solve(
            coeffs, m, T=g.T, dt=g.dt, t0=g.t0, t_on=src.t_on, duration=src.width,
            width=pk.width, n_p=pk.n_p, route=pk.route,
            problem_kw={"omega_cutoff": cfg.omega_cutoff, "panel_nodes": cfg.panel_nodes},
            map_fn=pool.map,
        )
        written.append(out.write_csv("packet.csv", out.solution_frame(packet.times, packet.samples)))
        packet_entry = {"n_p": pk.n_p, "width": packet.width, "route": pk.route, "file": "packet.csv"}

    written.insert(0, out.write_json("solve.json", _manifest(
        config, m=m, coefficients=coeffs.as_dict(), route=cfg.route,
        grid=g.model_dump(), source=src.model_dump(), modes=modes, packet=packet_entry,
    )))
    return written


def cmd_classify(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.classify
    coeffs, m = cfg.mode.build()
    verdict = classify_stability(coeffs, m)
    H_bound = None
    within = None
    if cfg.mode.physical is not None:
        cosmo = cfg.cosmology
        inputs = CosmologyInputs(cosmo.Omega_Lambda, cosmo.Lambda, cosmo.M_P) if cosmo else CosmologyInputs()
        alpha1 = cosmo.alpha1_S if cosmo and cosmo.alpha1_S else ALPHA1_S_FIXED
        H_bound, _ = hubble_and_lambda(cfg.mode.physical.params(), inputs, alpha1)
        within = rate_within_conformal(verdict, H_bound)
    payload = verdict.to_dict()
    if cfg.b2_thresholds:
        payload["b2_thresholds"] = s_mode_b2_thresholds(cfg.mode.physical.params())
    return [out.write_json("classify.json", _manifest(
        config, coefficients=coeffs.as_dict(), m=m, H_bound=H_bound, rate_within_H=within, **payload,
    ))]


def _resolve(path: str, config_dir: Path) -> Path:
    p = Path(path)
    if p.is_absolute() or p.exists():
        return p
    return config_dir / p


def cmd_decompose(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.decompose
    h = out.read_field(_resolve(cfg.field, config_dir))
    if not isinstance(h, SymmetricTensorField):
        raise ConfigValidationError("decompose needs a rank-2 field", field="rank")
    result = decompose(h)
    scale = max(h.sup_norm(), 1e-300)
    report = dict(result.residuals)
    report["w_relative"] = result.w.sup_norm() / scale
    report["vT_relative"] = result.vT.sup_norm() / scale
    written = [out.write_field(f"{name}.field", getattr(result, name)) for name in ("w", "vT", "hS", "hV", "hTT")]

    if cfg.de_donder:
        fixed, X = de_donder_fix(h)
        hbar = trace_reverse(fixed)
        report["de_donder_divergence"] = divergence_residual(hbar)
        written.append(out.write_field("X.field", X))
        if cfg.curvature:
            curv = linearised_curvature(hbar)
            I, J = linearised_I_J(hbar)
            report["I_sector_vs_closed"] = float(np.max(np.abs(curv.I1.data - I.data))
                                                 / max(I.sup_norm(), 1e-300))
            report["J_sector_vs_closed"] = float(np.max(np.abs(curv.J1.data - J.data))
                                                 / max(J.sup_norm(), 1e-300))
    written.insert(0, out.write_json("decompose.json", _manifest(
        config, n=h.grid.n, modes=len(h.grid.modes), steps=h.grid.steps, residuals=report,
        files=[p.name for p in written],
    )))
    return written


def cmd_cosmology(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.section()
    inputs = CosmologyInputs(cfg.Omega_Lambda, cfg.Lambda, cfg.M_P)
    alpha1 = cfg.alpha1_S or ALPHA1_S_FIXED
    m_eV = invert_mass(inputs, alpha1)
    params = planck_params(m_eV, inputs)
    gamma_tilde = unstable_root_estimate(params, alpha1_S=alpha1)
    H, Lambda_pred = hubble_and_lambda(params, inputs, alpha1)
    return [out.write_json("cosmology.json", _manifest(
        config,
        gamma_tilde=gamma_tilde, H=H, Lambda_pred=Lambda_pred, m_eV=m_eV,
        units="reduced Planck units; m_eV in eV",
        inputs={"Omega_Lambda": inputs.Omega_Lambda, "Lambda": inputs.Lambda, "M_P": inputs.M_P,
                "M_P_source": "external constant", "alpha1_S": alpha1},
        Lambda_relative_error=abs(Lambda_pred / inputs.Lambda - 1.0),
    ))]


def cmd_validate(config: RunConfig, out: ExportFormatter, pool: SweepPool, config_dir: Path) -> List[Path]:
    cfg = config.section()
    report = run_validation(config.tolerances.model_dump(), quick=cfg.quick, seed=cfg.seed,
                            map_fn=pool.map, raise_on_failure=False)
    path = out.write_json("validate.json", _manifest(config, quick=cfg.quick, seed=cfg.seed, **report.to_dict()))
    if not report.passed:
        raise ValidationFailure(f"validation failed: {', '.join(report.failed)}", report=report.to_dict())
    return [path]


HANDLERS = {
    "zeros": cmd_zeros,
    "solve": cmd_solve,
    "classify": cmd_classify,
    "decompose": cmd_decompose,
    "cosmology": cmd_cosmology,
    "validate": cmd_validate,
}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", default=None, help="output directory (default: OUTPUT_DIR)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: SEMISTAB_THREADS)")
    common.add_argument("--tol-override", action="append", default=[], metavar="KEY=VAL",
                        help="override one tolerance; repeatable")

    parser = argparse.ArgumentParser(prog="semistab", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=f"run the {name} pipeline")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging()
    try:
        config = load_run_config(args.config)
        if config.command != args.command:
            raise ConfigValidationError(
                f"config is for '{config.command}', not '{args.command}'", field="command")
        config = apply_overrides(config, args.tol_override)
        push_tolerances(config.tolerances)
        threads = settings.SEMISTAB_THREADS if args.threads is None else args.threads
        if threads < 1:
            raise ConfigValidationError("--threads must be positive", field="threads")
        out = ExportFormatter(args.out or settings.OUTPUT_DIR)
        logger.info(f"{args.command}: {threads} worker(s), output in {out.out_dir}")
        with SweepPool(threads) as pool:
            written = HANDLERS[args.command](config, out, pool, Path(args.config).resolve().parent)
        logger.info(f"{args.command}: wrote {len(written)} file(s)")
        return EXIT_OK
    except SemistabError as exc:
        code = exit_code_for(exc)
        logger.error(f"{args.command} failed ({type(exc).__name__}, exit {code}): {exc.message}")
        return code


if __name__ == "__main__":
    sys.exit(main())
