"""
Unit tests for run configuration parsing and tolerance overrides.
"""
import pytest
import sys
import os

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from schemas import (
    RunConfig,
    SolveConfig,
    ValidateConfig,
    apply_overrides,
    load_run_config,
    parse_run_config,
)
from services.error_handler import ConfigValidationError
from services.mode_algebra import PrototypeCoefficients

COEFFS = {"a1": 0.0, "a2": 0.0, "b0": -1.0, "b1": 2.0, "b2": 0.5}


def _solve_payload(**extra):
    payload = {"schema_version": 1, "command": "solve", "solve": {"mode": {"coefficients": COEFFS}}}
    payload["solve"].update(extra)
    return payload


class TestParse:
    """Test schema validation."""

    def test_minimal_solve(self):
        """Defaults fill the grid, source and route."""
        config = parse_run_config(_solve_payload())
        section = config.section()
        assert isinstance(section, SolveConfig)
        assert section.route == "both"
        assert section.grid.momenta == [0.0]
        coeffs, m = section.mode.build()
        assert coeffs == PrototypeCoefficients(0.0, 0.0, -1.0, 2.0, 0.5)
        assert m == 1.0

    def test_validate_defaults(self):
        """validate needs no section."""
        config = parse_run_config({"command": "validate"})
        assert isinstance(config.section(), ValidateConfig)
        assert config.section().quick

    def test_unknown_key_rejected(self):
        """Unknown keys name their location."""
        payload = _solve_payload(colour="blue")
        with pytest.raises(ConfigValidationError) as exc:
            parse_run_config(payload)
        assert exc.value.field == "solve.colour"

    def test_section_must_match_command(self):
        """A section for another command is rejected."""
        payload = _solve_payload()
        payload["validate"] = {"quick": True}
        with pytest.raises(ConfigValidationError):
            parse_run_config(payload)

    def test_missing_section(self):
        """solve without a solve section is rejected."""
        with pytest.raises(ConfigValidationError):
            parse_run_config({"command": "solve"})

    def test_mode_needs_exactly_one_source(self):
        """Coefficients and physical parameters are exclusive."""
        payload = _solve_payload()
        payload["solve"]["mode"]["physical"] = {"sector": "S", "b2": 0.1}
        with pytest.raises(ConfigValidationError):
            parse_run_config(payload)

    def test_thresholds_need_s_sector(self):
        """The b₂ threshold scan is defined for the physical S sector only."""
        for mode in ({"coefficients": COEFFS}, {"physical": {"sector": "TT", "b2": 0.1}}):
            payload = {"command": "classify", "classify": {"mode": mode, "b2_thresholds": True}}
            with pytest.raises(ConfigValidationError):
                parse_run_config(payload)
        payload = {"command": "classify", "classify": {
            "mode": {"physical": {"sector": "S", "b2": -0.5}}, "b2_thresholds": True}}
        assert parse_run_config(payload).classify.b2_thresholds

    def test_conformal_coupling_rejected(self):
        """xi = 1/6 is rejected at parse time."""
        payload = {"command": "classify", "classify": {"mode": {
            "physical": {"sector": "S", "xi": 1.0 / 6.0, "b2": 0.1}}}}
        with pytest.raises(ConfigValidationError):
            parse_run_config(payload)

    @pytest.mark.parametrize("window", [[0.0, 5.0], [5.0, 2.0]])
    def test_fit_window_order(self, window):
        with pytest.raises(ConfigValidationError):
            parse_run_config(_solve_payload(fit_window=window))

    def test_zeros_targets_exclusive(self):
        """A zeros run takes a mode or a figure reading, not both."""
        payload = {"command": "zeros", "zeros": {"mode": {"coefficients": COEFFS}, "figure": ["A"]}}
        with pytest.raises(ConfigValidationError):
            parse_run_config(payload)

    def test_wrong_schema_version(self):
        with pytest.raises(ConfigValidationError) as exc:
            parse_run_config({"schema_version": 2, "command": "validate"})
        assert exc.value.field == "schema_version"


class TestLoad:
    """Test reading configuration files."""

    def test_round_trip(self, write_config):
        config = load_run_config(write_config(_solve_payload()))
        assert isinstance(config, RunConfig)
        assert config.command == "solve"

    def test_invalid_json_names_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n"command": \n}', encoding="utf-8")
        with pytest.raises(ConfigValidationError) as exc:
            load_run_config(path)
        assert "line" in exc.value.message

    def test_not_an_object(self, write_config):
        with pytest.raises(ConfigValidationError):
            load_run_config(write_config([1, 2, 3]))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigValidationError):
            load_run_config(tmp_path / "absent.json")


class TestOverrides:
    """Test KEY=VAL tolerance overrides."""

    def setup_method(self):
        self.config = parse_run_config({"command": "validate"})

    def test_override_applies(self):
        updated = apply_overrides(self.config, ["dual_route=5e-3", "volterra = 1e-7"])
        assert updated.tolerances.dual_route == 5e-3
        assert updated.tolerances.volterra == 1e-7
        assert self.config.tolerances.dual_route == 1e-3

    def test_no_overrides_is_identity(self):
        assert apply_overrides(self.config, []) is self.config

    @pytest.mark.parametrize("item", ["dual_route", "speed=1", "dual_route=fast", "dual_route=-1"])
    def test_rejected(self, item):
        """Malformed, unknown, non-numeric and non-positive overrides are rejected."""
        with pytest.raises(ConfigValidationError):
            apply_overrides(self.config, [item])
