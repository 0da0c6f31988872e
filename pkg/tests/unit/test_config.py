"""
Unit tests for environment-driven settings.
"""
import pytest
import sys
import os

from pydantic import ValidationError

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from utils.config import Settings


class TestSettings:
    """Test defaults and environment overrides."""

    def test_numerical_defaults(self, monkeypatch):
        for key in ("QUAD_REL_TOL", "DYSON_MAX_ITER", "SEMISTAB_THREADS", "LOG_FORMAT"):
            monkeypatch.delenv(key, raising=False)
        s = Settings(_env_file=None)
        assert s.QUAD_ABS_TOL == 1e-12
        assert s.QUAD_REL_TOL == 1e-11
        assert s.DYSON_MAX_ITER == 200
        assert s.SEMISTAB_THREADS == 1
        assert s.LOG_FORMAT == "text"

    def test_environment_override(self, monkeypatch):
        monkeypatch.setenv("DYSON_TOL", "1e-8")
        monkeypatch.setenv("KERNEL_PANEL_NODES", "24")
        s = Settings(_env_file=None)
        assert s.DYSON_TOL == 1e-8
        assert s.KERNEL_PANEL_NODES == 24

    def test_nonpositive_threads_use_all_cores(self, monkeypatch):
        """SEMISTAB_THREADS <= 0 means one worker per core."""
        monkeypatch.setenv("SEMISTAB_THREADS", "0")
        assert Settings(_env_file=None).SEMISTAB_THREADS == (os.cpu_count() or 1)

    def test_empty_threads(self, monkeypatch):
        monkeypatch.setenv("SEMISTAB_THREADS", "")
        assert Settings(_env_file=None).SEMISTAB_THREADS == 1

    def test_log_format(self, monkeypatch):
        """Only text and json log formats exist."""
        monkeypatch.setenv("LOG_FORMAT", "xml")
        with pytest.raises(ValidationError):
            Settings(_env_file=None)
