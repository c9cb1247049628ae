"""
Application Configuration Management

This module centralizes the process-wide settings for thumbqc. It uses
Pydantic Settings to load ``THUMBQC_*`` environment variables (and a local
.env file) and validate their types, so that the CLI, the trainer and the
benchmark all see the same seed, thread count and input normalisation.

Run-specific parameters (approach, epochs, search space...) live in JSON run
configs parsed by ``thumbqc.schemas``; the settings here only provide defaults
and the ``THUMBQC_SEED`` override.

The settings are cached using lru_cache to avoid repeated environment
variable parsing during a run.
"""

import sys
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

CONFIG_ERROR_EXIT_CODE = 2


class LogLevel(str, Enum):
    """Valid logging level values."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):
    """
    Process settings loaded from environment variables.

    Every field has a default, so a bare environment is valid. Invalid values
    cause the CLI to fail fast with a descriptive message and exit code 2.
    """

    seed: Optional[int] = Field(
        default=None,
        description="Overrides the seed of every run config when set (THUMBQC_SEED)",
        ge=0,
    )

    log_level: LogLevel = Field(
        default=LogLevel.INFO,
        description="Logging level for the CLI",
    )

    threads: Optional[int] = Field(
        default=None,
        description="Slide-level workers for batch inference; defaults to the machine's cores",
        ge=1,
    )

    # Backbone input normalisation
    norm_mean: Tuple[float, float, float] = Field(
        default=(0.5, 0.5, 0.5),
        description="Per-channel mean subtracted from [0, 1] intensities",
    )

    norm_std: Tuple[float, float, float] = Field(
        default=(0.5, 0.5, 0.5),
        description="Per-channel standard deviation dividing centred intensities",
    )

    # Latency benchmark
    bench_warmup: int = Field(
        default=5,
        description="Warmup passes excluded from latency statistics",
        ge=0,
    )

    bench_iterations: int = Field(
        default=20,
        description="Timed passes per approach",
        ge=1,
    )

    model_config = SettingsConfigDict(
        env_prefix="THUMBQC_",
        env_file=".env",
        extra="ignore",
        case_sensitive=False,
    )

    @field_validator("norm_std")
    @classmethod
    def validate_norm_std(cls, v: Tuple[float, float, float]) -> Tuple[float, float, float]:
        """Reject zero or negative channel deviations."""
        if any(s <= 0 for s in v):
            raise ValueError(
                "NORM_STD must be strictly positive for every channel, "
                f"got {list(v)}"
            )
        return v

    def resolve_seed(self, configured: int) -> int:
        """Return the THUMBQC_SEED override if present, else the configured seed."""
        return configured if self.seed is None else self.seed


def create_settings() -> Settings:
    """
    Create and validate settings instance with helpful error messages.

    This function provides better error handling than the raw Settings()
    constructor, giving users clear guidance on how to fix configuration issues.
    """
    try:
        return Settings()
    except ValidationError as e:
        print("\n❌ Configuration Validation Error:", file=sys.stderr)
        print(f"{e}", file=sys.stderr)
        print("\n💡 To fix this:", file=sys.stderr)
        print("1. Check the THUMBQC_* variables in your environment", file=sys.stderr)
        print("2. Check the values in .env, if present", file=sys.stderr)
        print("3. Unset a variable to fall back to its default", file=sys.stderr)
        sys.exit(CONFIG_ERROR_EXIT_CODE)


@lru_cache()
def get_settings() -> Settings:
    """Return cached settings instance."""
    return create_settings()
