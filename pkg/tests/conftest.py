"""
Pytest configuration and shared fixtures.
"""
import json
import os
import sys

import pytest

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'backend'))

from services.mode_algebra import PrototypeCoefficients, coefficients_from_zeros  # noqa: E402
from services.spectral_core import PhysicalParams  # noqa: E402


@pytest.fixture
def m():
    return 1.0


@pytest.fixture
def stable_local(m):
    """Three zeros at 1/4, 1 and 9/4 (√γ = 1/2, 1, 3/2), a₁ = a₂ = 0"""
    return coefficients_from_zeros([0.25, 1.0, 2.25], 0.0, 0.0, m)


@pytest.fixture
def stable_full(stable_local):
    """Full coefficients a 1e-6 shift in b₀ away from the local ones"""
    c = stable_local
    return PrototypeCoefficients(c.a1, c.a2, c.b0 + 1e-6, c.b1, c.b2)


@pytest.fixture
def unstable_coefficients(m):
    """One negative zero at γ = −0.25 (growth rate 1/2) next to two stable ones"""
    return coefficients_from_zeros([-0.25, 1.0, 2.25], 0.0, 0.0, m)


@pytest.fixture
def physical_params():
    return PhysicalParams(m=1.0, xi=1.0, G=1e-4, mu=1.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration to tmp_path and return its path"""
    def _write(payload, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)
    return _write


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "integration: mark test as integration test"
    )
    config.addinivalue_line(
        "markers", "slow: mark test as slow running"
    )


# Test collection hook
def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers"""
    for item in items:
        if "integration" in str(item.fspath):
            item.add_marker(pytest.mark.integration)
