"""
Configuration management using Pydantic Settings.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import field_validator
import os


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )
    """Numerical defaults and runtime knobs loaded from environment variables."""

    # Worker pool
    SEMISTAB_THREADS: int = 1

    # Quadrature
    QUAD_ABS_TOL: float = 1e-12
    QUAD_REL_TOL: float = 1e-11
    TAIL_U_MAX: float = 40.0
    PERRON_NODES: int = 400

    # Root finding
    ZERO_SEPARATION_TOL: float = 1e-6
    ZERO_RESIDUAL_TOL: float = 1e-10

    # Mode solver
    KERNEL_OMEGA_CUTOFF: float = 60.0
    KERNEL_PANEL_NODES: int = 16
    DYSON_TOL: float = 1e-10
    DYSON_MAX_ITER: int = 200

    # Output
    OUTPUT_DIR: str = "out"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "text"

    @field_validator('SEMISTAB_THREADS', mode='before')
    @classmethod
    def parse_threads(cls, v):
        """Empty or non-positive thread counts fall back to one worker."""
        if v in (None, ""):
            return 1
        v = int(v)
        return v if v > 0 else (os.cpu_count() or 1)

    @field_validator('LOG_FORMAT')
    @classmethod
    def check_log_format(cls, v):
        if v not in ("text", "json"):
            raise ValueError("LOG_FORMAT must be 'text' or 'json'")
        return v


# Create global settings instance
settings = Settings()
