"""Configuration management for the measurement-theory engine."""

import logging
import sys
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings


class ToleranceSettings(BaseSettings):
    """Numerical tolerances; relative ones scale with max(1, operator norm)."""

    hermitian: float = Field(default=1e-9, gt=0)
    reconstruction: float = Field(default=1e-10, gt=0)
    unitary: float = Field(default=1e-10, gt=0)
    group: float = Field(default=1e-8, ge=0)
    commute: float = Field(default=1e-9, gt=0)
    unitality: float = Field(default=1e-10, gt=0)
    probability: float = Field(default=1e-10, gt=0)
    negative_probability: float = Field(default=1e-12, ge=0)
    state_norm: float = Field(default=1e-12, gt=0)
    mixed_eigen: float = Field(default=1e-10, ge=0)
    stochastic: float = Field(default=1e-12, gt=0)
    projection: float = Field(default=1e-10, gt=0)
    same_average: float = Field(default=1e-9, gt=0)
    margin: float = Field(default=1e-10, ge=0)

    class Config:
        env_prefix = "MT_TOL_"


class PhysicsSettings(BaseSettings):
    """Physical constants. ``MT_HBAR`` overrides the reduced Planck constant."""

    hbar: float = Field(default=1.0, gt=0)

    class Config:
        env_prefix = "MT_"


class ZenoSettings(BaseSettings):
    """Repeated-measurement channel settings."""

    kraus_cap: int = Field(default=4096, gt=0)
    prune_norm: float = Field(default=1e-14, ge=0)
    commutation_threshold: float = Field(default=1e-8, gt=0)
    total_time: float = Field(default=1.0, gt=0)

    class Config:
        env_prefix = "MT_ZENO_"


class UncertaintySettings(BaseSettings):
    """Joint-measurement scenario generation settings."""

    max_retries: int = Field(default=10, gt=0)
    max_coefficient: float = Field(default=1e6, gt=0)

    class Config:
        env_prefix = "MT_UNCERTAINTY_"


class LoggingSettings(BaseSettings):
    """Logging configuration."""

    log_level: str = Field(default="WARNING")
    log_file: Optional[str] = Field(default=None)

    class Config:
        env_prefix = "MT_LOG_"


class Settings(BaseSettings):
    """Global application settings."""

    tolerance: ToleranceSettings = Field(default_factory=ToleranceSettings)
    physics: PhysicsSettings = Field(default_factory=PhysicsSettings)
    zeno: ZenoSettings = Field(default_factory=ZenoSettings)
    uncertainty: UncertaintySettings = Field(default_factory=UncertaintySettings)
    logging: LoggingSettings = Field(default_factory=LoggingSettings)

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"


# Global settings instance
settings = Settings()


def validate_required_settings(current: Settings = settings) -> None:
    """Validate that the tolerance settings are mutually consistent."""

    tol = current.tolerance
    if tol.negative_probability > tol.probability:
        raise ValueError("Negative-probability clamp exceeds the probability tolerance")

    if tol.reconstruction > tol.group and tol.group > 0:
        raise ValueError("Reconstruction tolerance looser than eigenvalue grouping tolerance")

    if not isinstance(logging.getLevelName(current.logging.log_level.upper()), int):
        raise ValueError(f"Unknown log level {current.logging.log_level!r}")


def configure_logging(current: Optional[Settings] = None) -> None:
    """Install stderr (and optional file) handlers at the configured level."""

    current = current or settings
    level = current.logging.log_level.upper()
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if current.logging.log_file:
        handlers.append(logging.FileHandler(current.logging.log_file, encoding="utf-8"))

    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        handlers=handlers,
        force=True,
    )


# Validate on import
try:
    validate_required_settings()
except ValueError as e:
    import warnings
    warnings.warn(f"Configuration validation warning: {e}")
