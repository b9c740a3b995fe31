"""
Helper utilities for the BD-RIS toolkit.

This module provides small helpers used throughout the package: matrix
norms and tolerances, seeded random streams, compensated statistics,
JSON-friendly complex matrix encoding and formatting.
"""

import math
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np

from bdris.config import ABS_ZERO


def fro(a: np.ndarray) -> float:
    """Frobenius norm of an array."""
    return float(np.linalg.norm(a))


def relative_residual(residual: np.ndarray, reference: np.ndarray) -> float:
    """
    Relative Frobenius residual ``‖residual‖ / ‖reference‖``.

    When the reference is numerically zero the absolute residual is
    returned instead.

    Args:
        residual: Difference array
        reference: Array the residual is measured against

    Returns:
        Scale-free residual
    """
    scale = fro(reference)
    err = fro(residual)
    if scale <= ABS_ZERO:
        return err
    return err / scale


def within(residual: float, scale: float, tol: float) -> bool:
    """Check a residual against ``tol`` relative to ``scale``, absolute near zero."""
    if scale <= ABS_ZERO:
        return residual <= max(tol, ABS_ZERO)
    return residual <= tol * scale


def make_rng(*entropy: int) -> np.random.Generator:
    """
    Create an independent random stream from integer entropy.

    ``make_rng(seed, trial_index)`` gives the per-trial stream used by the
    experiment runner; different tuples give statistically independent
    streams.
    """
    return np.random.default_rng(np.random.SeedSequence([int(e) for e in entropy]))


def crandn(rng: np.random.Generator, *shape: int) -> np.ndarray:
    """Draw i.i.d. circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def mean_stderr(values: Sequence[float]) -> Tuple[float, float]:
    """
    Mean and standard error with compensated summation.

    ``math.fsum`` is exact up to the final rounding, so the result does not
    depend on the order the values were produced in.

    Args:
        values: Per-trial samples

    Returns:
        Tuple of (mean, standard error); the standard error is 0 for a
        single sample
    """
    n = len(values)
    if n == 0:
        return float("nan"), float("nan")
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


def encode_matrix(a: np.ndarray) -> Dict[str, Any]:
    """
    Encode a complex array as interleaved real/imaginary values.

    Args:
        a: Array of any shape

    Returns:
        Dictionary with ``shape`` and row-major ``data`` [re0, im0, re1, ...]
    """
    arr = np.asarray(a, dtype=complex)
    flat = arr.ravel(order="C")
    data = np.empty(2 * flat.size)
    data[0::2] = flat.real
    data[1::2] = flat.imag
    return {"shape": list(arr.shape), "data": data.tolist()}


def decode_matrix(doc: Dict[str, Any]) -> np.ndarray:
    """Inverse of :func:`encode_matrix`."""
    data = np.asarray(doc["data"], dtype=float)
    shape = tuple(int(s) for s in doc["shape"])
    if data.size != 2 * int(np.prod(shape)):
        raise ValueError(f"Encoded matrix has {data.size} values for shape {shape}")
    return (data[0::2] + 1j * data[1::2]).reshape(shape)


def sorted_edges(edges: Iterable[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Normalize port pairs to ``(low, high)`` and sort lexicographically."""
    return sorted({(min(a, b), max(a, b)) for a, b in edges})


def format_duration(seconds: float) -> str:
    """Wall-clock time of a run: "850ms", "12.4s" or "3m 07s"."""
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, rest = divmod(int(round(seconds)), 60)
    return f"{minutes}m {rest:02d}s"
