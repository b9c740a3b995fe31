"""
Result and hardware models.

Value types returned by the optimize, estimate, impair and analysis
services.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from bdris.errors import InvalidInputError
from bdris.models.network import NetworkMatrix
from bdris.models.topology import ConstraintFamily, ScatteringSpec
from bdris.utils.helpers import decode_matrix, encode_matrix

Control = Union[ScatteringSpec, NetworkMatrix]


@dataclass
class OptimizeResult:
    """
    Outcome of a received-power maximization.

    Attributes:
        control: Scattering spec or admittance matrix achieving the objective
        objective: Channel gain |h|² (or received power for MISO)
        iterations: Iterations performed (0 for closed forms)
        residuals: Constraint or alignment residuals by name
        converged: False when an iteration limit stopped the solver
        trace: Objective value after each accepted outer iteration
        diagnostics: Extra flags and values (degenerate channel, rank deficiency, ...)
    """

    control: Control
    objective: float
    iterations: int = 0
    residuals: Dict[str, float] = field(default_factory=dict)
    converged: bool = True
    trace: List[float] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        """Control matrix regardless of representation."""
        if isinstance(self.control, ScatteringSpec):
            return self.control.theta
        return self.control.values


@dataclass(frozen=True)
class PatternSet:
    """
    Training reflection patterns for least-squares estimation.

    Attributes:
        patterns: J scattering matrices, each M×M
        family: Constraint family the patterns satisfy
        group_size: Block size M̄ (M for unitary, 1 for diagonal)
        admissible: Column-major vec indices that a pattern of this family can excite
    """

    patterns: Tuple[np.ndarray, ...]
    family: ConstraintFamily
    group_size: int
    admissible: np.ndarray

    @property
    def m(self) -> int:
        return self.patterns[0].shape[0]

    @property
    def j(self) -> int:
        return len(self.patterns)

    @property
    def stacked(self) -> np.ndarray:
        """M²×J matrix whose columns are vec(Θ_j) (column-major)."""
        return np.column_stack([p.ravel(order="F") for p in self.patterns])

    @property
    def reduced(self) -> np.ndarray:
        """Stacked matrix restricted to the admissible rows."""
        return self.stacked[self.admissible, :]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "groupSize": self.group_size,
            "patterns": [encode_matrix(p) for p in self.patterns],
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "PatternSet":
        patterns = tuple(decode_matrix(p) for p in doc["patterns"])
        support = np.zeros(patterns[0].size, dtype=bool)
        for p in patterns:
            support |= np.abs(p.ravel(order="F")) > 0
        return cls(patterns, ConstraintFamily(doc["family"]), int(doc["groupSize"]), np.flatnonzero(support))


@dataclass(frozen=True)
class Codebook:
    """
    Discrete susceptance magnitudes; entries take ± a codebook value.

    Attributes:
        bits: Resolution B
        values: At most 2^B positive, ascending, distinct magnitudes in siemens
    """

    bits: int
    values: Tuple[float, ...]
    trace: Tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if self.bits < 1:
            raise InvalidInputError(f"Codebook resolution must be at least 1 bit, got {self.bits}")
        if not values or len(values) > 2 ** self.bits:
            raise InvalidInputError(f"Codebook holds {len(values)} values for {self.bits} bits")
        if any(v <= 0 for v in values):
            raise InvalidInputError("Codebook values must be strictly positive")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidInputError("Codebook values must be sorted ascending and distinct")
        object.__setattr__(self, "values", values)

    @property
    def levels(self) -> np.ndarray:
        """Signed levels (−values, +values) available to an entry."""
        v = np.asarray(self.values)
        return np.concatenate([-v[::-1], v])

    def to_dict(self) -> Dict[str, Any]:
        return {"bits": self.bits, "values": list(self.values)}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "Codebook":
        return cls(bits=int(doc["bits"]), values=tuple(doc["values"]))


@dataclass(frozen=True)
class VaractorCircuit:
    """
    Varactor-based reconfigurable component.

    Attributes:
        l1: Shunt inductance in henries
        l2: Series inductance in henries
        r: Parasitic resistance in ohms (0 means lossless)
        c_range: (cMin, cMax) tunable capacitance in farads
    """

    l1: float
    l2: float
    r: float = 0.0
    c_range: Tuple[float, float] = (0.35e-12, 3.2e-12)

    def __post_init__(self) -> None:
        c_min, c_max = self.c_range
        if self.l1 <= 0 or self.l2 <= 0:
            raise InvalidInputError("Inductances must be positive")
        if self.r < 0:
            raise InvalidInputError("Resistance must be non-negative")
        if not 0 < c_min <= c_max:
            raise InvalidInputError(f"Invalid capacitance range {self.c_range}")


@dataclass(frozen=True)
class SusceptanceFit:
    """Linear fit of susceptance against frequency."""

    slope_per_hz: float
    intercept: float
    r2: float


@dataclass(frozen=True)
class GainReport:
    """Closed-form gain with the inputs it was computed from."""

    value: float
    inputs: Dict[str, Any]
    formula: str


@dataclass(frozen=True)
class ScalingLaws:
    """Average D-RIS and BD-RIS channel gains under i.i.d. Rayleigh fading."""

    dris: float
    bdris: float
    ratio: float


@dataclass(frozen=True)
class ComplexityOptimum:
    """Least circuit complexity achieving the MISO and MU-MIMO optimum."""

    miso: int
    mu_mimo: int


@dataclass(frozen=True)
class DistributedBounds:
    """Bounds on the gain of a distributed over a localized RIS."""

    lower: float
    upper: float


@dataclass(frozen=True)
class CapacitanceChoice:
    """Capacitance realizing a target susceptance."""

    capacitance: float
    clamped: bool
    achieved: Optional[float] = None
