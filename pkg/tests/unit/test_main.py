"""
Unit tests for the command-line entry point: parsing, dispatch and exit codes.
"""
import json

import pytest
import sys
import os

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

import main
from services.error_handler import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VALIDATION
from services.export_formatter import ExportFormatter
from services.tensor_decomposition import FieldGrid, random_field
from services.validation_suite import CheckResult, ValidationReport


class TestParser:
    """Test argument parsing."""

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            main.build_parser().parse_args([])

    def test_config_required(self):
        with pytest.raises(SystemExit):
            main.build_parser().parse_args(["solve"])

    def test_repeatable_overrides(self):
        args = main.build_parser().parse_args(
            ["validate", "--config", "c.json", "--tol-override", "a=1", "--tol-override", "b=2"])
        assert args.command == "validate"
        assert args.tol_override == ["a=1", "b=2"]
        assert args.threads is None


class TestExitCodes:
    """Test the mapping of failures onto exit codes."""

    def test_cosmology_ok(self, write_config, tmp_path):
        config = write_config({"command": "cosmology"})
        assert main.main(["cosmology", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_OK
        payload = json.loads((tmp_path / "out" / "cosmology.json").read_text())
        assert payload["m_eV"] == pytest.approx(7.8e-3, rel=0.03)
        assert payload["Lambda_relative_error"] < 1e-10
        assert payload["command"] == "cosmology"

    def test_command_mismatch(self, write_config, tmp_path):
        config = write_config({"command": "cosmology"})
        assert main.main(["validate", "--config", config, "--out", str(tmp_path)]) == EXIT_CONFIG

    def test_bad_override(self, write_config, tmp_path):
        config = write_config({"command": "cosmology"})
        argv = ["cosmology", "--config", config, "--out", str(tmp_path), "--tol-override", "mass_rel=-1"]
        assert main.main(argv) == EXIT_CONFIG

    def test_bad_threads(self, write_config, tmp_path):
        config = write_config({"command": "cosmology"})
        assert main.main(["cosmology", "--config", config, "--out", str(tmp_path), "--threads", "0"]) == EXIT_CONFIG

    def test_missing_config(self, tmp_path):
        assert main.main(["cosmology", "--config", str(tmp_path / "absent.json")]) == EXIT_CONFIG

    def test_solver_error(self, write_config, tmp_path):
        """Gauge fixing in two dimensions is a domain error."""
        grid = FieldGrid.box(n=2, per_axis=4, steps=16)
        field = ExportFormatter(tmp_path).write_field("h2.field", random_field(grid, rank=2, seed=1))
        config = write_config({"command": "decompose", "decompose": {"field": str(field)}})
        assert main.main(["decompose", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_SOLVER

    def test_scalar_field_rejected(self, write_config, tmp_path):
        grid = FieldGrid.box(n=4, per_axis=2, steps=8)
        field = ExportFormatter(tmp_path).write_field("f.field", random_field(grid, rank=0, support_start=0.25))
        config = write_config({"command": "decompose", "decompose": {"field": str(field)}})
        assert main.main(["decompose", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_CONFIG

    def test_validation_failure(self, write_config, tmp_path, mocker):
        """A failed check exits with 4 after writing the report."""
        report = ValidationReport([CheckResult("stieltjes_oracle", False, 1e-3, 1e-8)])
        mocker.patch("main.run_validation", return_value=report)
        config = write_config({"command": "validate"})
        assert main.main(["validate", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_VALIDATION
        payload = json.loads((tmp_path / "out" / "validate.json").read_text())
        assert payload["failed"] == ["stieltjes_oracle"]


class TestClassify:
    """Test the classify subcommand."""

    def test_unstable_verdict(self, write_config, tmp_path, unstable_coefficients):
        config = write_config({"command": "classify", "classify": {
            "mode": {"coefficients": unstable_coefficients.as_dict()}}})
        assert main.main(["classify", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_OK
        payload = json.loads((tmp_path / "out" / "classify.json").read_text())
        assert payload["verdict"] == "unstable"
        assert payload["rate"] >= 0.5 - 1e-9
        assert payload["H_bound"] is None

    def test_b2_thresholds_reported(self, write_config, tmp_path, mocker):
        """The S-sector threshold scan is written next to the verdict."""
        scan = mocker.patch("main.s_mode_b2_thresholds", return_value=[
            {"b2": -20.0, "count_below": 2, "count_above": 3, "real_below": 2, "real_above": 3},
        ])
        config = write_config({"command": "classify", "classify": {
            "mode": {"physical": {"sector": "S", "m": 1.0, "xi": 1.0, "G": 1e-4, "mu": 1.0, "b2": -0.5}},
            "b2_thresholds": True}})
        assert main.main(["classify", "--config", config, "--out", str(tmp_path / "out")]) == EXIT_OK
        payload = json.loads((tmp_path / "out" / "classify.json").read_text())
        assert payload["b2_thresholds"][0]["b2"] == -20.0
        assert scan.call_args.args[0].xi == 1.0
