"""
Run configuration schemas.

One JSON document per run: a schema version, the subcommand, the section for
that subcommand and an optional tolerance record. Unknown keys are rejected.
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from services.error_handler import ConfigValidationError
from services.mode_algebra import PrototypeCoefficients, s_mode_coefficients, tt_mode_coefficients
from services.spectral_core import PhysicalParams
from utils.config import settings

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Command = Literal["zeros", "solve", "classify", "decompose", "cosmology", "validate"]
Coefficient = Literal["a", "a1", "a2", "b0", "b1", "b2"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Tolerances(StrictModel):
    """Every tolerance a run reports against; all strictly positive."""
    quad_abs: float = Field(default_factory=lambda: settings.QUAD_ABS_TOL, gt=0)
    quad_rel: float = Field(default_factory=lambda: settings.QUAD_REL_TOL, gt=0)
    zero_separation: float = Field(default_factory=lambda: settings.ZERO_SEPARATION_TOL, gt=0)
    zero_residual: float = Field(default_factory=lambda: settings.ZERO_RESIDUAL_TOL, gt=0)
    dyson: float = Field(default_factory=lambda: settings.DYSON_TOL, gt=0)
    dual_route: float = Field(1e-3, gt=0, description="dyson vs polecut, relative sup-norm")
    volterra: float = Field(1e-6, gt=0, description="dyson vs volterra, relative sup-norm")
    stieltjes: float = Field(1e-8, gt=0, description="closed-form J vs quadrature")
    characteristic: float = Field(1e-12, gt=0)
    constraint: float = Field(1e-6, gt=0)
    decomposition: float = Field(1e-10, gt=0)
    projector: float = Field(1e-9, gt=0)
    divergence: float = Field(1e-8, gt=0)
    curvature: float = Field(1e-8, gt=0, description="sector vs closed forms of I and J")
    decay_exponent: float = Field(0.2, gt=0, description="allowed offset from the t^-3/2 law")
    kernel_ratio: float = Field(2.0, gt=0, description="allowed spread of the fitted C across momenta")
    mass_rel: float = Field(0.03, gt=0, description="relative tolerance on the inverted mass")


# ---------------------------------------------------------------------------
# Mode specification
# ---------------------------------------------------------------------------

class CoefficientsConfig(StrictModel):
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float

    def build(self) -> PrototypeCoefficients:
        return PrototypeCoefficients(self.a1, self.a2, self.b0, self.b1, self.b2)


class PhysicalConfig(StrictModel):
    """Physical parameters mapped to a sector's prototype coefficients"""
    sector: Literal["S", "TT"]
    m: float = Field(1.0, gt=0)
    xi: float = 1.0
    G: float = Field(1.0, gt=0)
    mu: float = Field(1.0, gt=0)
    b2: float

    @field_validator("xi")
    @classmethod
    def reject_conformal_coupling(cls, v):
        if abs(6.0 * v - 1.0) < 1e-14:
            raise ValueError("xi = 1/6 makes the S-mode coefficients singular")
        return v

    def params(self) -> PhysicalParams:
        return PhysicalParams(m=self.m, xi=self.xi, G=self.G, mu=self.mu)

    def build(self) -> PrototypeCoefficients:
        if self.sector == "S":
            return s_mode_coefficients(self.params(), b2=self.b2)
        return tt_mode_coefficients(self.params(), b2=self.b2)


class ModeSpec(StrictModel):
    """Either raw coefficients with a mass, or a physical sector"""
    m: float = Field(1.0, gt=0, description="field mass; ignored when physical is given")
    coefficients: Optional[CoefficientsConfig] = None
    physical: Optional[PhysicalConfig] = None

    @model_validator(mode="after")
    def exactly_one_source(self):
        if (self.coefficients is None) == (self.physical is None):
            raise ValueError("give exactly one of 'coefficients' or 'physical'")
        return self

    @property
    def mass(self) -> float:
        return self.physical.m if self.physical is not None else self.m

    def build(self) -> Tuple[PrototypeCoefficients, float]:
        source = self.physical if self.physical is not None else self.coefficients
        return source.build(), self.mass


# ---------------------------------------------------------------------------
# Command sections
# ---------------------------------------------------------------------------

class SweepConfig(StrictModel):
    fixed: Optional[Coefficient] = None
    fixed_value: Optional[float] = None
    swept: Optional[Coefficient] = None
    values: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def fixed_needs_value(self):
        if (self.fixed is None) != (self.fixed_value is None):
            raise ValueError("'fixed' and 'fixed_value' go together")
        if self.values and self.swept is None:
            raise ValueError("sweep values given without 'swept'")
        return self


class ContourGridConfig(StrictModel):
    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float
    n_re: int = Field(241, ge=3)
    n_im: int = Field(160, ge=3)

    @model_validator(mode="after")
    def ordered(self):
        if not (self.re_hi > self.re_lo and self.im_hi > self.im_lo):
            raise ValueError("grid bounds are inverted")
        return self


class ZerosConfig(StrictModel):
    """Either a mode with an optional sweep, or one of the figure readings"""
    mode: Optional[ModeSpec] = None
    figure: List[Literal["A", "B"]] = Field(default_factory=list)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    grid: Optional[ContourGridConfig] = None
    unit_density: bool = Field(
        False, description="divide b₀, b₁, b₂ by 16π² (ρ normalised to one at large x); "
                           "the figure readings are quoted in this normalisation")
    contours: bool = True

    @model_validator(mode="after")
    def has_target(self):
        if self.mode is None and not self.figure:
            raise ValueError("zeros needs a 'mode' or a 'figure' reading")
        if self.mode is not None and self.figure:
            raise ValueError("'mode' and 'figure' are exclusive")
        return self


class TimeGridConfig(StrictModel):
    momenta: List[float] = Field(default_factory=lambda: [0.0])
    t0: float = 0.0
    T: float = Field(50.0, gt=0)
    dt: float = Field(0.05, gt=0)

    @field_validator("momenta")
    @classmethod
    def nonnegative(cls, v):
        if not v or any(p < 0 for p in v):
            raise ValueError("momenta must be a non-empty list of values >= 0")
        return v


class SourceConfig(StrictModel):
    kind: Literal["bump", "zero"] = "bump"
    t_on: float = Field(1.0, gt=0)
    width: float = Field(2.0, gt=0)
    amplitude: float = 1.0


class PacketConfig(StrictModel):
    n_p: int = Field(64, ge=2)
    width: Optional[float] = Field(None, gt=0)
    route: Literal["dyson", "polecut"] = "polecut"


class SolveConfig(StrictModel):
    mode: ModeSpec
    route: Literal["dyson", "polecut", "both"] = "both"
    grid: TimeGridConfig = Field(default_factory=TimeGridConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    c: Optional[float] = Field(None, gt=0)
    local_coefficients: Optional[CoefficientsConfig] = None
    omega_cutoff: Optional[float] = Field(None, gt=0)
    panel_nodes: Optional[int] = Field(None, ge=2)
    fit_window: Optional[Tuple[float, float]] = None
    volterra_check: bool = False
    packet: Optional[PacketConfig] = None

    @field_validator("fit_window")
    @classmethod
    def window_order(cls, v):
        if v is not None and not (v[1] > v[0] > 0):
            raise ValueError("fit_window must satisfy 0 < lo < hi")
        return v


class CosmologyConfig(StrictModel):
    Omega_Lambda: float = Field(0.685, gt=0, lt=1)
    Lambda: float = Field(7.15e-121, gt=0, description="in reduced Planck units")
    M_P: float = Field(2.435e27, gt=0, description="reduced Planck mass in eV; not a fitted value")
    alpha1_S: Optional[float] = Field(None, gt=0)


class ClassifyConfig(StrictModel):
    mode: ModeSpec
    cosmology: Optional[CosmologyConfig] = None
    b2_thresholds: bool = Field(False, description="scan b₂ < 0 for the S-mode zero-topology thresholds")

    @model_validator(mode="after")
    def thresholds_need_s_sector(self):
        physical = self.mode.physical
        if self.b2_thresholds and (physical is None or physical.sector != "S"):
            raise ValueError("b2_thresholds needs a physical S-sector mode")
        return self


class DecomposeConfig(StrictModel):
    field: str = Field(..., min_length=1, description="path of a rank-2 mode-field file")
    de_donder: bool = True
    curvature: bool = True


class ValidateConfig(StrictModel):
    quick: bool = True
    seed: int = 7


class RunConfig(StrictModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    command: Command
    zeros: Optional[ZerosConfig] = None
    solve: Optional[SolveConfig] = None
    classify: Optional[ClassifyConfig] = None
    decompose: Optional[DecomposeConfig] = None
    cosmology: Optional[CosmologyConfig] = None
    validate_: Optional[ValidateConfig] = Field(None, alias="validate")
    tolerances: Tolerances = Field(default_factory=Tolerances)

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @model_validator(mode="after")
    def section_matches_command(self):
        sections = ("zeros", "solve", "classify", "decompose", "cosmology", "validate_")
        present = [s.rstrip("_") for s in sections if getattr(self, s) is not None]
        extra = [s for s in present if s != self.command]
        if extra:
            raise ValueError(f"sections {extra} do not belong to command '{self.command}'")
        if self.command in ("zeros", "solve", "classify", "decompose") and self.command not in present:
            raise ValueError(f"command '{self.command}' needs a '{self.command}' section")
        return self

    def section(self):
        if self.command == "validate":
            return self.validate_ or ValidateConfig()
        if self.command == "cosmology":
            return self.cosmology or CosmologyConfig()
        return getattr(self, self.command)


def _field_of(error: Dict) -> str:
    return ".".join(str(p) for p in error.get("loc", ())) or "config"


def parse_run_config(payload: Dict) -> RunConfig:
    try:
        return RunConfig.model_validate(payload)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = _field_of(first)
        logger.error(f"run config rejected at {field}: {first['msg']}")
        raise ConfigValidationError(f"{field}: {first['msg']}", field=field) from exc


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigValidationError(f"cannot read config {path}: {exc}", field="config")
    except json.JSONDecodeError as exc:
        raise ConfigValidationError(f"line {exc.lineno}: invalid JSON ({exc.msg})", field="config")
    if not isinstance(payload, dict):
        raise ConfigValidationError("config must be a JSON object", field="config")
    return parse_run_config(payload)


def apply_overrides(config: RunConfig, overrides: List[str]) -> RunConfig:
    """Apply KEY=VAL tolerance overrides and re-validate the tolerance record"""
    if not overrides:
        return config
    values = config.tolerances.model_dump()
    for item in overrides:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigValidationError(f"override '{item}' is not KEY=VAL", field="tol-override")
        if key not in values:
            raise ConfigValidationError(f"unknown tolerance '{key}'", field=key)
        try:
            values[key] = float(raw)
        except ValueError:
            raise ConfigValidationError(f"tolerance '{key}' needs a number, got '{raw}'", field=key)
    try:
        tolerances = Tolerances(**values)
    except ValidationError as exc:
        field = _field_of(exc.errors()[0])
        raise ConfigValidationError(f"{field}: {exc.errors()[0]['msg']}", field=field) from exc
    logger.info(f"applied {len(overrides)} tolerance override(s)")
    return config.model_copy(update={"tolerances": tolerances})
