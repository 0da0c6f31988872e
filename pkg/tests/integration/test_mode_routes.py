"""
Mode Solver Integration Tests
Runs whole per-momentum jobs through both solver routes and checks that they agree,
that unstable zeros grow at their predicted rate and that packets decay.
"""
import pytest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.stability import asymptotic_fit, classify_stability, packet_solve
from services.validation_suite import stable_configuration
from tasks.sweep_pipeline import ModeJob, solve_mode

KERNEL = {"omega_cutoff": 20.0, "panel_nodes": 8}


@pytest.fixture(scope="module")
def stable_pair():
    return stable_configuration(1.0)


class TestDualRoute:
    """Dyson series, Volterra march and pole-plus-cut on the same source"""

    @pytest.fixture(scope="class")
    def result(self, stable_pair):
        full, local = stable_pair
        job = ModeJob(full, 1.0, 0.5, 0.0, 20.0, 0.05, route="both",
                      problem_kw=dict(KERNEL, local_coefficients=local), volterra_check=True)
        return solve_mode(job)

    def test_routes_agree(self, result):
        assert result.delta < 1e-3

    def test_volterra_agrees(self, result):
        assert result.volterra_delta < 1e-6

    def test_envelope(self, result):
        report = result.solutions["dyson"].residual_report
        assert report["envelope_ok"]
        assert report["local_origin"] == "supplied"

    def test_report_serialises(self, result):
        payload = result.to_dict()
        assert set(payload["routes"]) == {"dyson", "polecut"}
        assert payload["cross_route_delta"] == result.delta


class TestGrowth:
    """A negative real zero at −1/4 grows like e^{t/2}"""

    def test_polecut_growth_rate(self, unstable_coefficients):
        verdict = classify_stability(unstable_coefficients, 1.0)
        job = ModeJob(unstable_coefficients, 1.0, 0.0, 0.0, 30.0, 0.05, route="polecut",
                      problem_kw=KERNEL, fit_window=(15.0, 30.0))
        result = solve_mode(job)
        fit = result.asymptotics
        assert fit.kind == "exponential"
        assert fit.rate == pytest.approx(verdict.rate, abs=0.05)


@pytest.mark.slow
class TestPacketDecay:
    """Gaussian packets over the stable configuration decay like t^{−3/2}"""

    def test_decay_exponent(self, stable_pair):
        full, _ = stable_pair
        period = 4.0 * np.pi
        T = 5.0 * period
        packet = packet_solve(full, 1.0, T=T, dt=0.05, n_p=64, problem_kw={"omega_cutoff": 10.0, "panel_nodes": 8})
        fit = asymptotic_fit(packet.times, packet.samples, (2.0 * period, T), block=period)
        assert fit.kind == "power"
        assert abs(fit.exponent + 1.5) <= 0.2
