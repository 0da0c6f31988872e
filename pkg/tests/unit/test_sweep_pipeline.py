"""
Unit tests for the worker pool and the per-momentum job runner.
"""
import pytest
import sys
import os

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.error_handler import DomainError
from services.zero_contours import ContourGrid, SweepSpec
from tasks.sweep_pipeline import ModeJob, SweepPool, run_mode_sweep, run_zero_sweep, solve_mode

FAST = {"omega_cutoff": 10.0, "panel_nodes": 8}


class TestSweepPool:
    """Test the ordered map."""

    def test_needs_a_worker(self):
        with pytest.raises(DomainError):
            SweepPool(0)

    def test_in_process_map_keeps_order(self):
        with SweepPool(1) as pool:
            assert pool.map(abs, [-1, 2, -3]) == [1, 2, 3]

    def test_process_pool_keeps_order(self):
        """Several workers return results in submission order."""
        with SweepPool(2) as pool:
            assert pool.map(abs, [-3, 1, -2]) == [3, 1, 2]


class TestSolveMode:
    """Test one-momentum jobs."""

    def test_unknown_route(self, stable_full):
        job = ModeJob(stable_full, 1.0, 0.5, 0.0, 4.0, 0.05, route="spectral")
        with pytest.raises(DomainError):
            solve_mode(job)

    def test_zero_source(self, stable_full):
        """A vanishing source gives a vanishing pole-plus-cut solution."""
        job = ModeJob(stable_full, 1.0, 0.5, 0.0, 4.0, 0.05, route="polecut",
                      source_kind="zero", problem_kw=FAST)
        result = solve_mode(job)
        assert set(result.solutions) == {"polecut"}
        assert result.primary.sup_norm() == 0.0
        assert result.delta is None

    def test_polecut_report(self, stable_full):
        """Reports carry the momentum, the route residuals and a fit entry."""
        job = ModeJob(stable_full, 1.0, 0.5, 0.0, 6.0, 0.05, route="polecut", problem_kw=FAST)
        payload = run_mode_sweep([job])[0].to_dict()
        assert payload["p"] == 0.5
        assert set(payload["routes"]) == {"polecut"}
        assert payload["sup_norm"] > 0.0
        assert payload["cross_route_delta"] is None


class TestZeroSweep:
    """Test sweeps over coefficient values."""

    def test_one_panel_per_value(self, stable_local):
        grid = ContourGrid(-1.0, 3.5, -1.0, 1.0, n_re=31, n_im=12)
        sweep = SweepSpec(swept_name="b2", swept_values=[stable_local.b2, 1.01 * stable_local.b2])
        panels = run_zero_sweep(stable_local, 1.0, grid, sweep)
        assert len(panels) == 2
        assert [p.swept_value for p in panels] == [stable_local.b2, 1.01 * stable_local.b2]
        assert panels[0].label == f"b2={stable_local.b2:g}"
        assert panels[0].zeros is not None
