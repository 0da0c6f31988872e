"""
Unit tests for run artifact export: JSON, CSV, SVG and mode-field files.
"""
import json
from types import SimpleNamespace

import pytest
import sys
import os

import numpy as np
import pandas as pd

# Add backend to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '../../backend'))

from services.error_handler import ConfigValidationError
from services.export_formatter import FIELD_MAGIC, ExportFormatter, parse_field
from services.tensor_decomposition import FieldGrid, SymmetricTensorField, random_field


def _panel(label):
    line = SimpleNamespace(points=np.array([[0.0, -1.0], [0.5, 0.0], [1.0, 1.0]]))
    return SimpleNamespace(label=label, real_part=[line], imag_part=[line], crossings=[0.5 + 0.0j])


@pytest.fixture
def formatter(tmp_path):
    return ExportFormatter(tmp_path)


class TestJson:
    """Test JSON manifests."""

    def test_builtin_conversion(self, formatter):
        """Complex, non-finite and numpy values become plain JSON."""
        text = formatter.export_json({
            "z": 1.0 + 2.0j,
            "bad": float("nan"),
            "big": np.inf,
            "arr": np.arange(3),
            "flag": np.bool_(True),
        })
        payload = json.loads(text)
        assert payload["z"] == {"re": 1.0, "im": 2.0}
        assert payload["bad"] == "nan"
        assert payload["big"] == "inf"
        assert payload["arr"] == [0, 1, 2]
        assert payload["flag"] is True

    def test_keys_sorted(self, formatter):
        """Keys come out sorted so equal payloads give equal text."""
        a = formatter.export_json({"b": 1, "a": 2})
        b = formatter.export_json({"a": 2, "b": 1})
        assert a == b
        assert a.index('"a"') < a.index('"b"')

    def test_write_creates_directories(self, formatter, tmp_path):
        """Relative names resolve under the output directory."""
        path = formatter.write_json("nested/run.json", {"x": 1})
        assert path == tmp_path / "nested" / "run.json"
        assert json.loads(path.read_text()) == {"x": 1}


class TestCsv:
    """Test CSV tables."""

    def test_solution_frame_round_trip(self, formatter):
        """Seventeen significant digits survive a write and read."""
        t = np.linspace(0.0, 1.0, 7)
        samples = np.exp(1j * t) / 3.0
        path = formatter.write_csv("phi.csv", formatter.solution_frame(t, samples))
        back = pd.read_csv(path, float_precision="round_trip")
        assert list(back.columns) == ["t", "re_phi", "im_phi"]
        np.testing.assert_array_equal(back["re_phi"].to_numpy(), samples.real)
        np.testing.assert_array_equal(back["im_phi"].to_numpy(), samples.imag)

    def test_contour_frame(self, formatter):
        """One row per vertex, tagged by panel and part."""
        frame = formatter.contour_frame([_panel("p0"), _panel("p1")])
        assert len(frame) == 2 * 2 * 3
        assert set(frame["part"]) == {"re", "im"}
        assert list(frame.columns) == ["panel", "label", "part", "polyline", "vertex", "re", "im"]


class TestSvg:
    """Test contour figures."""

    def test_deterministic(self, formatter):
        """Rendering the same panels twice gives identical files."""
        panels = [_panel("b2=3"), _panel("b2=4"), _panel("b2=5")]
        a = formatter.render_contours_svg("a.svg", panels).read_bytes()
        b = formatter.render_contours_svg("b.svg", panels).read_bytes()
        assert a == b
        assert b"<svg" in a


class TestModeFields:
    """Test the columnar mode-field format."""

    def setup_method(self):
        self.grid = FieldGrid.box(n=4, per_axis=2, dt=0.1, steps=8)

    def test_tensor_round_trip(self, formatter):
        """A rank-2 field is read back exactly and stays symmetric."""
        h = random_field(self.grid, rank=2, support_start=0.25, seed=2)
        back = formatter.read_field(formatter.write_field("h.field", h))
        assert isinstance(back, SymmetricTensorField)
        np.testing.assert_array_equal(back.data, h.data)
        np.testing.assert_array_equal(back.grid.modes, self.grid.modes)
        assert back.support_start == h.support_start

    def test_missing_magic(self):
        """The first line must carry the format header."""
        with pytest.raises(ConfigValidationError) as exc:
            parse_field(["rank 0"])
        assert exc.value.field == "header"

    def test_bad_header_value(self):
        """Header values are type-checked and the line is named."""
        with pytest.raises(ConfigValidationError) as exc:
            parse_field([FIELD_MAGIC, "rank two"])
        assert "line 2" in exc.value.message
        assert exc.value.field == "rank"

    def test_missing_row(self, formatter, tmp_path):
        """Every (mode, step) row must be present."""
        f = random_field(self.grid, rank=0, support_start=0.25, seed=2)
        lines = formatter.write_field("f.field", f).read_text().splitlines()
        with pytest.raises(ConfigValidationError) as exc:
            parse_field(lines[:-1])
        assert exc.value.field == "data"

    def test_unreadable_file(self, formatter, tmp_path):
        """A missing file is a configuration error."""
        with pytest.raises(ConfigValidationError):
            formatter.read_field(tmp_path / "absent.field")
