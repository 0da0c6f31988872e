"""
Sweep Pipeline - worker-pool fan-out
====================================

Zero-set sweeps, per-momentum mode solves and packet superpositions run one
job per worker. Results are gathered in submission order, so output files do
not depend on the worker count.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from services.error_handler import DomainError
from services.mode_algebra import PrototypeCoefficients
from services.mode_solver import (
    ModeGrid,
    ModeProblem,
    ModeSolution,
    ModeSource,
    bump_source,
    build_dyson_operators,
    cross_route_delta,
    dyson_solve,
    polecut_solve,
    volterra_solve,
)
from services.stability import AsymptoticFit, asymptotic_fit
from services.zero_contours import ContourGrid, ContourPanel, SweepSpec, plan_panels, trace_panel

logger = logging.getLogger(__name__)

ROUTES = ("dyson", "polecut", "both")


class SweepPool:
    """
    Ordered map over a process pool; one worker runs in-process.

    Usage:
        with SweepPool(threads) as pool:
            results = pool.map(job, items)
    """

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise DomainError(f"worker count must be positive, got {threads}", field="threads")
        self.threads = threads
        self._executor: Optional[ProcessPoolExecutor] = None

    def __enter__(self) -> "SweepPool":
        if self.threads > 1:
            self._executor = ProcessPoolExecutor(max_workers=self.threads)
        return self

    def __exit__(self, *exc_info):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map(self, fn: Callable, items: Iterable) -> List:
        items = list(items)
        if self._executor is None or len(items) < 2:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))


# ---------------------------------------------------------------------------
# Zero-set sweeps
# ---------------------------------------------------------------------------

def _trace_job(args) -> ContourPanel:
    coeffs, m, grid, label, value, with_zeros = args
    return trace_panel(coeffs, m, grid, label, value, with_zeros)


def run_zero_sweep(coeffs: PrototypeCoefficients, m: float, grid: ContourGrid,
                   sweep: Optional[SweepSpec] = None, unit_density: bool = False,
                   pool: Optional[SweepPool] = None) -> List[ContourPanel]:
    """One contour panel per sweep value, in sweep order"""
    plan = plan_panels(coeffs, sweep, unit_density)
    jobs = [(c, m, grid, label, value, True) for label, value, c in plan]
    panels = (pool or SweepPool()).map(_trace_job, jobs)
    logger.info(f"zero sweep: {len(panels)} panels")
    return panels


# ---------------------------------------------------------------------------
# Mode solves
# ---------------------------------------------------------------------------

@dataclass
class ModeJob:
    """Everything one worker needs to solve one momentum"""
    coeffs: PrototypeCoefficients
    m: float
    p: float
    t0: float
    T: float
    dt: float
    route: str = "both"
    source_kind: str = "bump"
    t_on: float = 1.0
    width: float = 2.0
    amplitude: float = 1.0
    problem_kw: Dict = field(default_factory=dict)
    volterra_check: bool = False
    fit_window: Optional[Tuple[float, float]] = None


@dataclass
class ModeResult:
    p: float
    solutions: Dict[str, ModeSolution]
    delta: Optional[float] = None
    volterra_delta: Optional[float] = None
    asymptotics: Optional[AsymptoticFit] = None

    @property
    def primary(self) -> ModeSolution:
        return self.solutions.get("dyson") or self.solutions["polecut"]

    def to_dict(self) -> Dict:
        return {
            "p": self.p,
            "routes": {name: sol.residual_report for name, sol in self.solutions.items()},
            "cross_route_delta": self.delta,
            "volterra_delta": self.volterra_delta,
            "asymptotics": self.asymptotics.to_dict() if self.asymptotics is not None else None,
            "sup_norm": self.primary.sup_norm(),
        }


def _source(job: ModeJob, grid: ModeGrid) -> ModeSource:
    if job.source_kind == "zero":
        return ModeSource(grid, np.zeros(grid.n_steps), job.t_on)
    return bump_source(grid, job.t_on, job.width, job.amplitude)


def _fit(job: ModeJob, sol: ModeSolution) -> Optional[AsymptoticFit]:
    window = job.fit_window or (job.t0 + 0.5 * (job.T - job.t0), job.T)
    try:
        return asymptotic_fit(sol.times, sol.samples, window)
    except DomainError as exc:
        logger.debug(f"p={job.p:g}: no asymptotic fit ({exc.message})")
        return None


def solve_mode(job: ModeJob) -> ModeResult:
    """
    Solve one momentum.

    Pipeline Steps:
    1. Build the grid and the past-compact source
    2. Dyson route (kernel, local factor, iteration), optional Volterra march
    3. Pole-plus-cut route
    4. Cross-route delta and late-time fit
    """
    if job.route not in ROUTES:
        raise DomainError(f"unknown route '{job.route}'", field="route")
    grid = ModeGrid(job.p, job.t0, job.T, job.dt)
    source = _source(job, grid)
    solutions: Dict[str, ModeSolution] = {}
    volterra_delta = None

    if job.route in ("dyson", "both"):
        problem = ModeProblem(job.coeffs, job.m, **job.problem_kw)
        ops = build_dyson_operators(problem, grid)
        solutions["dyson"] = dyson_solve(source, problem, ops)
        if job.volterra_check:
            marched = volterra_solve(source, problem, ops)
            volterra_delta = cross_route_delta(marched, solutions["dyson"])
    if job.route in ("polecut", "both"):
        solutions["polecut"] = polecut_solve(source, job.coeffs, job.m,
                                             omega_cutoff=job.problem_kw.get("omega_cutoff"),
                                             panel_nodes=job.problem_kw.get("panel_nodes"))

    delta = None
    if len(solutions) == 2:
        delta = cross_route_delta(solutions["dyson"], solutions["polecut"])
        logger.info(f"p={job.p:g}: cross-route delta {delta:.3e}")
    result = ModeResult(job.p, solutions, delta, volterra_delta)
    result.asymptotics = _fit(job, result.primary)
    return result


def run_mode_sweep(jobs: Sequence[ModeJob], pool: Optional[SweepPool] = None) -> List[ModeResult]:
    results = (pool or SweepPool()).map(solve_mode, jobs)
    logger.info(f"mode sweep: {len(results)} momenta solved")
    return results
