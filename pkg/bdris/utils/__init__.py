"""
Utilities package for the BD-RIS toolkit.

This package contains helper functions shared by the services.
"""

from bdris.utils.helpers import (
    fro,
    relative_residual,
    within,
    make_rng,
    crandn,
    mean_stderr,
    encode_matrix,
    decode_matrix,
    sorted_edges,
    format_duration,
)

__all__ = [
    "fro",
    "relative_residual",
    "within",
    "make_rng",
    "crandn",
    "mean_stderr",
    "encode_matrix",
    "decode_matrix",
    "sorted_edges",
    "format_duration",
]
