"""Pydantic schemas for run configuration."""
from schemas.run_config import (
    ClassifyConfig,
    CosmologyConfig,
    DecomposeConfig,
    ModeSpec,
    RunConfig,
    SolveConfig,
    Tolerances,
    ValidateConfig,
    ZerosConfig,
    apply_overrides,
    load_run_config,
    parse_run_config,
)

__all__ = [
    "ClassifyConfig",
    "CosmologyConfig",
    "DecomposeConfig",
    "ModeSpec",
    "RunConfig",
    "SolveConfig",
    "Tolerances",
    "ValidateConfig",
    "ZerosConfig",
    "apply_overrides",
    "load_run_config",
    "parse_run_config",
]
