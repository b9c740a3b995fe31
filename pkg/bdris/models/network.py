"""
Network parameter models.

This module defines the value types for multi-port network matrices in
impedance, admittance or scattering representation.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from bdris.config import settings
from bdris.errors import DimensionMismatchError, InvalidInputError
from bdris.utils.helpers import decode_matrix, encode_matrix


class NetworkKind(str, Enum):
    """Representation of a multi-port network matrix."""

    IMPEDANCE = "impedance"
    ADMITTANCE = "admittance"
    SCATTERING = "scattering"


@dataclass(frozen=True)
class NetworkMatrix:
    """
    Square network matrix with its representation and reference impedance.

    Attributes:
        values: Complex M×M matrix
        kind: Impedance, admittance or scattering
        z0: Reference impedance in ohms
    """

    values: np.ndarray
    kind: NetworkKind
    z0: float = field(default_factory=lambda: settings.z0)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=complex)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise DimensionMismatchError(f"Network matrix must be square, got shape {values.shape}")
        if not (math.isfinite(self.z0) and self.z0 > 0):
            raise InvalidInputError(f"Reference impedance must be positive and finite, got {self.z0}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", NetworkKind(self.kind))

    @property
    def m(self) -> int:
        """Port count."""
        return self.values.shape[0]

    @property
    def y0(self) -> float:
        """Reference admittance in siemens."""
        return 1.0 / self.z0

    def to_dict(self) -> Dict[str, Any]:
        """Convert to a JSON-friendly dictionary."""
        return {"kind": self.kind.value, "z0": self.z0, "values": encode_matrix(self.values)}

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "NetworkMatrix":
        """Build from a dictionary produced by :meth:`to_dict`."""
        return cls(values=decode_matrix(doc["values"]), kind=NetworkKind(doc["kind"]), z0=float(doc["z0"]))


@dataclass(frozen=True)
class NetworkReport:
    """
    Result of the network predicates.

    ``passive`` is only defined for scattering matrices and is ``None``
    otherwise.
    """

    reciprocal: bool
    lossless: bool
    passive: Optional[bool] = None
