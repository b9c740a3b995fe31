"""
Network parameter service.

This module converts multi-port network matrices between impedance,
admittance and scattering representations and evaluates the reciprocity,
losslessness and passivity predicates.
"""

import logging
from typing import Optional

import numpy as np
from scipy import linalg

from bdris.config import settings
from bdris.errors import DimensionMismatchError, InvalidInputError, SingularMatrixError
from bdris.models.network import NetworkKind, NetworkMatrix, NetworkReport
from bdris.utils.helpers import fro, within

logger = logging.getLogger(__name__)


def checked_solve(a: np.ndarray, b: np.ndarray, what: str, cond_limit: Optional[float] = None) -> np.ndarray:
    """
    Solve ``a x = b`` after checking the condition number of ``a``.

    Raises:
        SingularMatrixError: If ``cond(a)`` exceeds the singularity threshold
    """
    limit = cond_limit or settings.cond_limit
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > limit:
        raise SingularMatrixError(f"{what} is singular (condition number {cond:.3g})")
    return linalg.solve(a, b)


def checked_inv(a: np.ndarray, what: str, cond_limit: Optional[float] = None) -> np.ndarray:
    """Inverse of ``a`` with the same singularity check as :func:`checked_solve`."""
    return checked_solve(a, np.eye(a.shape[0], dtype=complex), what, cond_limit)


class NetworkService:
    """
    Service for multi-port network algebra.

    Attributes:
        tolerance: Default predicate tolerance
        cond_limit: Condition number above which an inverse is refused
    """

    def __init__(self, tolerance: Optional[float] = None, cond_limit: Optional[float] = None):
        self.tolerance = tolerance or settings.tolerance
        self.cond_limit = cond_limit or settings.cond_limit

    def convert(self, n: NetworkMatrix, target: NetworkKind) -> NetworkMatrix:
        """
        Convert a network matrix to another representation.

        Args:
            n: Source network
            target: Requested representation

        Returns:
            Network in the target representation with the same z0

        Raises:
            SingularMatrixError: If the inverse the conversion needs does not exist
        """
        target = NetworkKind(target)
        if target == n.kind:
            return n

        values = n.values
        eye = np.eye(n.m, dtype=complex)
        z0, y0 = n.z0, n.y0

        if n.kind == NetworkKind.IMPEDANCE and target == NetworkKind.SCATTERING:
            out = checked_solve(values + z0 * eye, values - z0 * eye, "Z + Z0·I", self.cond_limit)
        elif n.kind == NetworkKind.ADMITTANCE and target == NetworkKind.SCATTERING:
            out = checked_solve(y0 * eye + values, y0 * eye - values, "Y0·I + Y", self.cond_limit)
        elif n.kind == NetworkKind.SCATTERING and target == NetworkKind.IMPEDANCE:
            # Z = Z0 (I + S)(I − S)⁻¹, solved as a right division
            out = z0 * checked_solve((eye - values).T, (eye + values).T, "I − S", self.cond_limit).T
        elif n.kind == NetworkKind.SCATTERING and target == NetworkKind.ADMITTANCE:
            out = y0 * checked_solve((eye + values).T, (eye - values).T, "I + S", self.cond_limit).T
        elif n.kind == NetworkKind.IMPEDANCE:
            out = checked_inv(values, "Z", self.cond_limit)
        else:
            out = checked_inv(values, "Y", self.cond_limit)

        return NetworkMatrix(out, target, z0)

    def predicates(self, n: NetworkMatrix, tol: Optional[float] = None) -> NetworkReport:
        """
        Evaluate reciprocity, losslessness and (scattering only) passivity.

        Args:
            n: Network to test
            tol: Relative tolerance (absolute when the matrix is near zero)

        Returns:
            NetworkReport with ``passive`` set only for scattering matrices
        """
        tol = tol or self.tolerance
        if tol <= 0:
            raise InvalidInputError(f"Tolerance must be positive, got {tol}")

        values = n.values
        scale = fro(values)
        reciprocal = within(fro(values - values.T), scale, tol)

        if n.kind == NetworkKind.SCATTERING:
            gram = values.conj().T @ values
            eye = np.eye(n.m)
            lossless = fro(gram - eye) <= tol
            eigs = linalg.eigvalsh(eye - gram)
            passive = bool(np.min(eigs) >= -tol)
            return NetworkReport(reciprocal=reciprocal, lossless=lossless, passive=passive)

        lossless = within(fro(values.real), scale, tol)
        return NetworkReport(reciprocal=reciprocal, lossless=lossless)

    def net_power(self, v: np.ndarray, i: np.ndarray) -> float:
        """
        Net real power delivered to a network, ½·Re{vᵀ·conj(i)}.

        Raises:
            DimensionMismatchError: If ``v`` and ``i`` differ in length
        """
        v = np.asarray(v, dtype=complex).ravel()
        i = np.asarray(i, dtype=complex).ravel()
        if v.shape != i.shape:
            raise DimensionMismatchError(f"Voltage and current lengths differ: {v.size} vs {i.size}")
        return 0.5 * float(np.real(v @ i.conj()))

    def scattering(self, n: NetworkMatrix) -> np.ndarray:
        """Scattering values of ``n`` (converted when necessary)."""
        return self.convert(n, NetworkKind.SCATTERING).values


# Singleton instance
_network_service: Optional[NetworkService] = None


def get_network_service() -> NetworkService:
    """
    Get the singleton NetworkService instance.

    Returns:
        NetworkService instance
    """
    global _network_service
    if _network_service is None:
        _network_service = NetworkService()
    return _network_service
