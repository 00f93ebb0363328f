"""Configuration management for Flip Scout."""

import logging
from functools import lru_cache
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Largest N for which the 2^N states are enumerated exactly
ENUMERATION_CAP = 20

DEFAULT_FOLDS = 10

# Detection level used when a study measures accuracy at a fixed threshold
DEFAULT_ALPHA = 0.5

SCHEMA_VERSION = 1

RNG_IDENTITY = "numpy.PCG64"


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_prefix="FLIPSCOUT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Paths
    data_dir: Path = Field(
        default=Path.home() / ".flipscout", description="Base directory for Flip Scout outputs"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")

    # Computation
    enumeration_cap: int = Field(
        default=ENUMERATION_CAP, description="Largest N handled by exact enumeration"
    )
    threads: int = Field(default=1, description="Worker threads for per-entity fits and folds")
    default_seed: int = Field(default=0, description="Seed used when none is given")
    burn_in_records: int = Field(
        default=1000, description="Glauber records discarded before recording"
    )
    dg_draws: int = Field(
        default=200_000, description="Draws for sampled dichotomized-Gaussian distributions"
    )

    @field_validator("enumeration_cap", "threads")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        """Ensure capacity and thread counts are positive."""
        if v < 1:
            raise ValueError(f"must be a positive integer (got: {v})")
        return v

    @property
    def output_dir(self) -> Path:
        """Default directory for run outputs."""
        return self.data_dir / "runs"

    def setup_directories(self):
        """Create necessary directories."""
        self.data_dir.mkdir(parents=True, exist_ok=True)

    def setup_logging(self):
        """Configure logging."""
        logging.basicConfig(
            level=getattr(logging, self.log_level.upper()),
            format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
