"""
Circuit topology models.

This module defines the BD-RIS architecture families, the topology value
object describing which admittance components exist, the component values
placed on it, and scattering-level control specifications.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from bdris.errors import DimensionMismatchError, InvalidInputError
from bdris.utils.helpers import decode_matrix, encode_matrix, sorted_edges

Edge = Tuple[int, int]


class Family(str, Enum):
    """Reciprocal BD-RIS circuit topology families."""

    SINGLE = "single"
    FULLY = "fully"
    GROUP = "group"
    TREE_TRIDIAGONAL = "treeTridiagonal"
    TREE_ARROWHEAD = "treeArrowhead"
    FOREST = "forest"
    BAND = "band"
    STEM = "stem"
    DYNAMIC = "dynamic"


class ConstraintFamily(str, Enum):
    """Constraint families a scattering matrix can be tagged with."""

    DIAGONAL = "diagonal"
    SYMMETRIC_UNITARY = "symmetricUnitary"
    BLOCK_SYMMETRIC_UNITARY = "blockSymmetricUnitary"
    UNITARY = "unitary"
    BLOCK_UNITARY = "blockUnitary"
    PERMUTED_DIAGONAL = "permutedDiagonal"

    @property
    def reciprocal(self) -> bool:
        return self in (
            ConstraintFamily.DIAGONAL,
            ConstraintFamily.SYMMETRIC_UNITARY,
            ConstraintFamily.BLOCK_SYMMETRIC_UNITARY,
        )

    @property
    def blocked(self) -> bool:
        return self in (ConstraintFamily.BLOCK_SYMMETRIC_UNITARY, ConstraintFamily.BLOCK_UNITARY)


@dataclass(frozen=True)
class Topology:
    """
    Admittance-component layout of a reconfigurable impedance network.

    Every port has a ground component; ``edges`` lists the inter-port
    components as sorted ``(low, high)`` 0-based pairs. For the dynamic
    family ``switches`` maps each edge to its on/off state.

    Attributes:
        m: Port count
        family: Architecture family
        edges: Inter-port component positions
        params: Construction parameters (groupSize, bandWidth, stemWidth, permutation)
        switches: Per-edge switch state (dynamic family only)
    """

    m: int
    family: Family
    edges: Tuple[Edge, ...]
    params: Dict[str, Any] = field(default_factory=dict)
    switches: Optional[Dict[Edge, bool]] = None

    @property
    def ground(self) -> Tuple[int, ...]:
        """Ports carrying a ground component (always all of them)."""
        return tuple(range(self.m))

    @property
    def active_edges(self) -> Tuple[Edge, ...]:
        """Edges whose component is connected (switch-off edges excluded)."""
        if self.switches is None:
            return self.edges
        return tuple(e for e in self.edges if self.switches.get(e, False))

    def mask(self) -> np.ndarray:
        """Boolean M×M matrix of admissible nonzero positions of Y_I."""
        mask = np.eye(self.m, dtype=bool)
        for a, b in self.active_edges:
            mask[a, b] = mask[b, a] = True
        return mask

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the stable JSON document layout."""
        doc: Dict[str, Any] = {
            "family": self.family.value,
            "m": self.m,
            "params": dict(self.params),
            "edges": [list(e) for e in sorted_edges(self.edges)],
        }
        if self.switches is not None:
            doc["switches"] = {f"{a}-{b}": bool(on) for (a, b), on in sorted(self.switches.items())}
        return doc

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "Topology":
        """Build from a document produced by :meth:`to_dict`."""
        switches = None
        if doc.get("switches") is not None:
            switches = {}
            for key, on in doc["switches"].items():
                a, b = (int(p) for p in key.split("-"))
                switches[(a, b)] = bool(on)
        return cls(
            m=int(doc["m"]),
            family=Family(doc["family"]),
            edges=tuple((int(a), int(b)) for a, b in doc["edges"]),
            params=dict(doc.get("params", {})),
            switches=switches,
        )


@dataclass(frozen=True)
class ComponentValues:
    """
    Complex admittances (siemens) of the ground and inter-port components.

    Attributes:
        ground: One value per port
        inter: Value per inter-port edge
    """

    ground: np.ndarray
    inter: Dict[Edge, complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ground = np.array(self.ground, dtype=complex).ravel()
        ground.setflags(write=False)
        object.__setattr__(self, "ground", ground)
        object.__setattr__(
            self, "inter", {(min(a, b), max(a, b)): complex(v) for (a, b), v in self.inter.items()}
        )

    def is_lossless(self, tol: float = 0.0) -> bool:
        """True when every component is purely reactive."""
        reals = [abs(v.real) for v in self.inter.values()] + list(np.abs(self.ground.real))
        return all(r <= tol for r in reals)


@dataclass(frozen=True)
class ScatteringSpec:
    """
    Scattering matrix tagged with its constraint family.

    Attributes:
        theta: Complex M×M scattering matrix
        family: Constraint family
        group_size: Block size for blocked families
        permutations: Optional (row, column) permutations for permuted-diagonal specs
    """

    theta: np.ndarray
    family: ConstraintFamily
    group_size: Optional[int] = None
    permutations: Optional[Tuple[Tuple[int, ...], Tuple[int, ...]]] = None

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=complex)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise DimensionMismatchError(f"Scattering matrix must be square, got shape {theta.shape}")
        family = ConstraintFamily(self.family)
        group_size = self.group_size
        if family.blocked and group_size is None:
            group_size = theta.shape[0]
        if group_size is not None and (group_size < 1 or theta.shape[0] % group_size):
            raise InvalidInputError(f"Group size {group_size} does not divide M={theta.shape[0]}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "group_size", group_size)

    @property
    def m(self) -> int:
        return self.theta.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return {
            "family": self.family.value,
            "groupSize": self.group_size,
            "theta": encode_matrix(self.theta),
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ScatteringSpec":
        return cls(
            theta=decode_matrix(doc["theta"]),
            family=ConstraintFamily(doc["family"]),
            group_size=doc.get("groupSize"),
        )


@dataclass(frozen=True)
class ComplexityReport:
    """Tunable component count of an architecture (plus switches when dynamic)."""

    components: int
    switches: int = 0


@dataclass(frozen=True)
class Violation:
    """One failed clause of a constraint check."""

    clause: str
    residual: float


@dataclass(frozen=True)
class ConstraintReport:
    """
    Outcome of a constraint check.

    Attributes:
        passed: True when no clause is violated
        residuals: Residual per checked clause
        violations: Clauses exceeding the tolerance
    """

    passed: bool
    residuals: Dict[str, float]
    violations: List[Violation]


@dataclass(frozen=True)
class ModeBlocks:
    """
    Mode-specific blocks of a scattering matrix and their power residuals.

    For the hybrid mode ``blocks`` holds one (Θ_r,g, Θ_t,g) pair per group;
    for the multi-sector mode it holds the first block column Θ_{l,1}, one
    entry per sector.
    ``symmetry`` holds ‖Θ_r,g − Θ_r,gᵀ‖_F per hybrid group and is empty
    for the multi-sector mode.
    """

    mode: str
    blocks: List[Any]
    residuals: np.ndarray
    symmetry: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0
