"""
Models package for the BD-RIS toolkit.

This package contains the domain value types.
"""

from bdris.models.network import NetworkKind, NetworkMatrix, NetworkReport
from bdris.models.topology import (
    ComplexityReport,
    ComponentValues,
    ConstraintFamily,
    ConstraintReport,
    Edge,
    Family,
    ModeBlocks,
    ScatteringSpec,
    Topology,
    Violation,
)
from bdris.models.channel import ChannelDims, ChannelSet, FadingKind, FadingSpec, LinkDistances, ParameterBlocks
from bdris.models.results import (
    CapacitanceChoice,
    Codebook,
    ComplexityOptimum,
    DistributedBounds,
    GainReport,
    OptimizeResult,
    PatternSet,
    ScalingLaws,
    SusceptanceFit,
    VaractorCircuit,
)
from bdris.models.experiment import ExperimentConfig, ExperimentKind, ExperimentResult, SweepSpec

__all__ = [
    "NetworkKind",
    "NetworkMatrix",
    "NetworkReport",
    "ComplexityReport",
    "ComponentValues",
    "ConstraintFamily",
    "ConstraintReport",
    "Edge",
    "Family",
    "ModeBlocks",
    "ScatteringSpec",
    "Topology",
    "Violation",
    "ChannelDims",
    "ChannelSet",
    "FadingKind",
    "FadingSpec",
    "LinkDistances",
    "ParameterBlocks",
    "CapacitanceChoice",
    "Codebook",
    "ComplexityOptimum",
    "DistributedBounds",
    "GainReport",
    "OptimizeResult",
    "PatternSet",
    "ScalingLaws",
    "SusceptanceFit",
    "VaractorCircuit",
    "ExperimentConfig",
    "ExperimentKind",
    "ExperimentResult",
    "SweepSpec",
]
