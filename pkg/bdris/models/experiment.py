"""
Experiment models.

Declarative Monte-Carlo experiment descriptions validated with pydantic,
and the tabular result they produce.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from bdris.models.channel import FadingSpec


class ExperimentKind(str, Enum):
    """Experiment families the runner knows how to execute."""

    SCALING = "scaling"
    GROUP = "group"
    ESTIMATION = "estimation"
    CODEBOOK = "codebook"
    MISO = "miso"
    LOSSY = "lossy"
    COUPLING = "coupling"


# Sweep axes accepted by each experiment kind
SWEEP_AXES: Dict[ExperimentKind, List[str]] = {
    ExperimentKind.SCALING: ["m"],
    ExperimentKind.GROUP: ["groupSize", "m"],
    ExperimentKind.ESTIMATION: ["sigma2", "pilotPower", "groupSize"],
    ExperimentKind.CODEBOOK: ["bits"],
    ExperimentKind.MISO: ["power", "m"],
    ExperimentKind.LOSSY: ["alpha"],
    ExperimentKind.COUPLING: ["spacing"],
}

# Solvers each kind understands
SOLVER_CHOICES: Dict[ExperimentKind, List[str]] = {
    ExperimentKind.SCALING: ["dris", "unitary", "tree", "penalty", "givens"],
    ExperimentKind.GROUP: ["group"],
    ExperimentKind.ESTIMATION: ["ls"],
    ExperimentKind.CODEBOOK: ["discrete", "continuous"],
    ExperimentKind.MISO: ["dris", "unitary", "tree", "penalty"],
    ExperimentKind.LOSSY: ["lossy", "lossless"],
    ExperimentKind.COUPLING: ["isotropic", "dipole"],
}

# Solvers evaluated when a configuration names none
DEFAULT_SOLVERS: Dict[ExperimentKind, List[str]] = {
    ExperimentKind.SCALING: ["dris", "unitary"],
    ExperimentKind.GROUP: ["group"],
    ExperimentKind.ESTIMATION: ["ls"],
    ExperimentKind.CODEBOOK: ["discrete", "continuous"],
    ExperimentKind.MISO: ["dris", "unitary"],
    ExperimentKind.LOSSY: ["lossy", "lossless"],
    ExperimentKind.COUPLING: ["isotropic", "dipole"],
}


class SweepSpec(BaseModel):
    """Swept parameter and its values."""

    model_config = ConfigDict(extra="forbid")

    axis: str = Field(..., description="Parameter being swept")
    values: List[float] = Field(..., min_length=1, description="Sorted sweep values")

    @field_validator("values")
    @classmethod
    def _sorted(cls, values: List[float]) -> List[float]:
        if any(b < a for a, b in zip(values, values[1:])):
            raise ValueError("Sweep values must be sorted ascending")
        return values


class ExperimentConfig(BaseModel):
    """
    Monte-Carlo experiment description.

    ``params`` holds the fixed parameters of the experiment (m, groupSize,
    n, power, sigma2, pilotPower, bits, ...); the swept one is taken from
    ``sweep`` at each point.
    """

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    name: str = Field(..., min_length=1, description="Experiment name")
    kind: ExperimentKind = Field(..., description="Experiment family")
    seed: int = Field(default=0, ge=0, description="Base seed")
    trials: int = Field(default=1000, ge=1, description="Trials per sweep point")
    sweep: SweepSpec
    fading: FadingSpec = Field(default_factory=FadingSpec)
    solvers: Optional[List[str]] = Field(default=None, description="Solvers to evaluate")
    params: Dict[str, float] = Field(default_factory=dict, description="Fixed parameters")
    output: Optional[str] = Field(default=None, description="Output path")

    @model_validator(mode="after")
    def _check_axis(self) -> "ExperimentConfig":
        allowed = SWEEP_AXES[self.kind]
        if self.sweep.axis not in allowed:
            raise ValueError(f"Sweep axis '{self.sweep.axis}' not valid for {self.kind.value}; expected one of {allowed}")
        if self.solvers is not None:
            unknown = [s for s in self.solvers if s not in SOLVER_CHOICES[self.kind]]
            if unknown:
                raise ValueError(f"Unknown solvers for {self.kind.value}: {unknown}")
        return self

    @property
    def solver_names(self) -> List[str]:
        return list(self.solvers or DEFAULT_SOLVERS[self.kind])


@dataclass
class ExperimentResult:
    """
    Aggregated experiment output.

    Attributes:
        rows: One dict per sweep point with ``sweep_value`` and per-solver
            ``<solver>_mean``, ``<solver>_stderr`` and ``<solver>_theory``
        metadata: Name, seed, trials, threads, versions, wall time
    """

    rows: List[Dict[str, Any]]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def columns(self) -> List[str]:
        return list(self.rows[0].keys()) if self.rows else ["sweep_value"]
