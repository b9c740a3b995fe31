"""
Application configuration module.

This module contains the configuration settings for the BD-RIS toolkit.
Settings can be overridden using environment variables (prefix ``BDRIS_``)
or a ``.env`` file in the working directory.
"""

import math
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()

# Base paths
BASE_DIR = Path(__file__).resolve().parent
PROJECT_DIR = BASE_DIR.parent

__version__ = "1.0.0"

# Free-space wave impedance used by the dipole coupling model (ohms)
ETA0 = 377.0

# Absolute floor below which a matrix norm is treated as zero
ABS_ZERO = 1e-12


class Settings(BaseSettings):
    """Toolkit settings configuration class."""

    model_config = SettingsConfigDict(env_prefix="BDRIS_", extra="ignore")

    # Runtime
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    debug: bool = False
    log_file: Optional[str] = None
    output_dir: str = str(PROJECT_DIR / "results")

    # Network algebra
    z0: float = Field(default=50.0, gt=0)
    tolerance: float = Field(default=1e-10, gt=0)
    cond_limit: float = Field(default=1e12, gt=1)

    # Coupling quadrature
    quadrature_order: int = Field(default=32, ge=2)
    quadrature_rtol: float = Field(default=1e-6, gt=0)

    # Iterative solvers
    max_iters: int = Field(default=500, ge=1)

    @field_validator("z0")
    @classmethod
    def _finite_z0(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("z0 must be finite")
        return value

    @property
    def y0(self) -> float:
        """Reference admittance in siemens."""
        return 1.0 / self.z0


settings = Settings()
