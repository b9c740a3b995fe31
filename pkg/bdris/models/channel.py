"""
Channel models.

This module defines the channel container used by the optimizers and
estimators, the parameter-block container of the mutual-coupling aware
model, and the fading description consumed by the channel generator.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from bdris.config import settings
from bdris.errors import DimensionMismatchError
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.utils.helpers import decode_matrix, encode_matrix


class FadingKind(str, Enum):
    """Small-scale fading model."""

    RAYLEIGH = "rayleigh"
    RICIAN = "rician"
    LOS = "los"


class LinkDistances(BaseModel):
    """Link lengths in meters used by the pathloss model."""

    model_config = ConfigDict(extra="forbid")

    rt: float = Field(default=1.0, gt=0, description="Transmitter to receiver")
    ri: float = Field(default=1.0, gt=0, description="RIS to receiver")
    it: float = Field(default=1.0, gt=0, description="Transmitter to RIS")


class FadingSpec(BaseModel):
    """Description of the random channel ensemble."""

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    kind: FadingKind = Field(default=FadingKind.RAYLEIGH, description="Fading model")
    rician_factor_db: float = Field(default=0.0, alias="ricianFactorDb", description="Rician factor in dB")
    pathloss_exponent: float = Field(default=0.0, ge=0, alias="pathlossExponent", description="Pathloss exponent a")
    distances: LinkDistances = Field(default_factory=LinkDistances, description="Link distances")
    direct_link: bool = Field(default=False, alias="directLink", description="Include the direct link")
    seed: int = Field(default=0, ge=0, description="Generator seed")

    @field_validator("rician_factor_db")
    @classmethod
    def _finite_factor(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("Rician factor must be finite")
        return value


@dataclass(frozen=True)
class ChannelDims:
    """Antenna and element counts of a link."""

    n_r: int = 1
    n_t: int = 1
    m: int = 1


@dataclass(frozen=True)
class ChannelSet:
    """
    Direct and RIS-assisted channels of one link.

    Without ``coupling`` the blocks are the cascaded-model channels
    H_RT (N_r×N), H_RI (N_r×M) and H_IT (M×N). With ``coupling`` the
    same fields hold the RT/RI/IT blocks of the physics-consistent model in
    the representation of ``coupling.kind`` and ``coupling`` holds the II
    block.
    """

    h_rt: np.ndarray
    h_ri: np.ndarray
    h_it: np.ndarray
    coupling: Optional[NetworkMatrix] = None
    z0: float = settings.z0

    def __post_init__(self) -> None:
        h_ri = np.atleast_2d(np.array(self.h_ri, dtype=complex))
        h_it = np.array(self.h_it, dtype=complex)
        if h_it.ndim == 1:
            h_it = h_it.reshape(-1, 1)
        h_rt = np.array(self.h_rt, dtype=complex)
        if h_rt.ndim < 2:
            h_rt = h_rt.reshape(h_ri.shape[0], h_it.shape[1])
        if h_ri.shape[1] != h_it.shape[0]:
            raise DimensionMismatchError(f"H_RI has {h_ri.shape[1]} columns but H_IT has {h_it.shape[0]} rows")
        if h_rt.shape != (h_ri.shape[0], h_it.shape[1]):
            raise DimensionMismatchError(f"H_RT shape {h_rt.shape} does not match {(h_ri.shape[0], h_it.shape[1])}")
        if self.coupling is not None and self.coupling.m != h_ri.shape[1]:
            raise DimensionMismatchError(f"Coupling block is {self.coupling.m}x{self.coupling.m}, M={h_ri.shape[1]}")
        for name, arr in (("h_rt", h_rt), ("h_ri", h_ri), ("h_it", h_it)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.h_ri.shape[1]

    @property
    def n_r(self) -> int:
        return self.h_ri.shape[0]

    @property
    def n_t(self) -> int:
        return self.h_it.shape[1]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to the interleaved re/im JSON layout."""
        return {
            "z0": self.z0,
            "hRT": encode_matrix(self.h_rt),
            "hRI": encode_matrix(self.h_ri),
            "hIT": encode_matrix(self.h_it),
            "coupling": None if self.coupling is None else self.coupling.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: Dict[str, Any]) -> "ChannelSet":
        coupling = doc.get("coupling")
        return cls(
            h_rt=decode_matrix(doc["hRT"]),
            h_ri=decode_matrix(doc["hRI"]),
            h_it=decode_matrix(doc["hIT"]),
            coupling=None if coupling is None else NetworkMatrix.from_dict(coupling),
            z0=float(doc.get("z0", settings.z0)),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ChannelSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ParameterBlocks:
    """
    RT/RI/IT/II blocks of the physics-consistent channel model in one
    representation (impedance, admittance or scattering).
    """

    kind: NetworkKind
    rt: np.ndarray
    ri: np.ndarray
    it: np.ndarray
    ii: np.ndarray
    z0: float = settings.z0

    @classmethod
    def from_channel(cls, ch: ChannelSet) -> "ParameterBlocks":
        if ch.coupling is None:
            raise DimensionMismatchError("Channel set carries no coupling block")
        return cls(ch.coupling.kind, ch.h_rt, ch.h_ri, ch.h_it, ch.coupling.values, ch.coupling.z0)
