"""
Channel estimation service.

This module designs training reflection patterns for BD-RIS (clock-and-
shift unitaries for fully-connected surfaces, DFT-phased block versions
for group-connected surfaces), runs the least-squares cascaded-channel
estimator and evaluates its theoretical and empirical mean squared error.
"""

import logging
import math
from typing import List, Optional, Union

import numpy as np
from scipy import linalg

from bdris.config import settings
from bdris.errors import DimensionMismatchError, InvalidInputError, NumericalError
from bdris.models.channel import ChannelSet
from bdris.models.results import PatternSet
from bdris.models.topology import ConstraintFamily
from bdris.services.topology_service import InvalidParamsError, block_mask
from bdris.utils.helpers import crandn, make_rng

logger = logging.getLogger(__name__)


class RankDeficientPatternsError(NumericalError):
    """Exception raised when a pattern set cannot identify every unknown."""
    pass


def clock_and_shift(m: int) -> List[np.ndarray]:
    """The M² generalized Pauli unitaries XᵃZᵇ, index a·M + b."""
    shift = np.roll(np.eye(m, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(-2j * np.pi * np.arange(m) / m))
    out = []
    for a in range(m):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(m):
            out.append(xa @ np.linalg.matrix_power(clock, b))
    return out


class EstimateService:
    """
    Service for least-squares BD-RIS channel estimation.

    Attributes:
        cond_limit: Gram condition number above which patterns are rejected
    """

    def __init__(self, cond_limit: Optional[float] = None):
        self.cond_limit = cond_limit or settings.cond_limit

    # ------------------------------------------------------------------
    # Pattern design
    # ------------------------------------------------------------------

    def wh_patterns(self, m: int) -> PatternSet:
        """
        Clock-and-shift pattern set of a fully-connected (unitary) surface.

        The J = M² patterns are mutually trace-orthogonal, so the stacked
        pattern matrix P satisfies P·Pᴴ = M·I and tr((P·Pᴴ)⁻¹) = M.
        """
        if m < 1:
            raise InvalidParamsError(f"Port count must be at least 1, got {m}")
        patterns = tuple(clock_and_shift(m))
        family = ConstraintFamily.DIAGONAL if m == 1 else ConstraintFamily.UNITARY
        return PatternSet(patterns, family, m, np.arange(m * m))

    def group_patterns(self, m: int, group_size: int) -> PatternSet:
        """
        Block-diagonal pattern set of a group-connected surface.

        Pattern (g', k) puts ω_G^{g·g'}·W_k in group g, with W_k the
        M̄-dimensional clock-and-shift basis and ω_G = e^{−j2π/G}. The
        J = M·M̄ patterns restricted to the block-diagonal rows satisfy
        P·Pᴴ = G·M̄·I, so tr((P·Pᴴ)⁻¹) = M̄.

        Raises:
            InvalidParamsError: If the group size does not divide M
        """
        if m < 1 or group_size < 1 or m % group_size:
            raise InvalidParamsError(f"Group size {group_size} does not divide M={m}")
        if group_size == m:
            return self.wh_patterns(m)

        groups = m // group_size
        basis = clock_and_shift(group_size)
        patterns = []
        for g_prime in range(groups):
            for w in basis:
                theta = np.zeros((m, m), dtype=complex)
                for g in range(groups):
                    block = slice(g * group_size, (g + 1) * group_size)
                    theta[block, block] = np.exp(-2j * np.pi * g * g_prime / groups) * w
                patterns.append(theta)

        family = ConstraintFamily.DIAGONAL if group_size == 1 else ConstraintFamily.BLOCK_UNITARY
        admissible = np.flatnonzero(block_mask(m, group_size).ravel(order="F"))
        return PatternSet(tuple(patterns), family, group_size, admissible)

    # ------------------------------------------------------------------
    # Estimation
    # ------------------------------------------------------------------

    @staticmethod
    def cascaded_channel(ch: ChannelSet) -> np.ndarray:
        """
        Cascaded channel H_cas = h_ITᵀ ⊗ H_RI (N×M²).

        h_RI·Θ·h_IT = H_cas·vec(Θ) with column-major vec.

        Raises:
            DimensionMismatchError: If the transmitter has more than one antenna
        """
        if ch.n_t != 1:
            raise DimensionMismatchError(f"Cascaded estimation expects a single-antenna user, got {ch.n_t}")
        return np.kron(ch.h_it.T, ch.h_ri)

    def gram(self, p: PatternSet) -> np.ndarray:
        """
        Gram matrix P·Pᴴ of the admissible rows.

        Raises:
            RankDeficientPatternsError: If it is singular or J is below the unknown count
        """
        reduced = p.reduced
        if reduced.shape[1] < reduced.shape[0]:
            raise RankDeficientPatternsError(f"{reduced.shape[1]} patterns cannot identify {reduced.shape[0]} unknowns")
        g = reduced @ reduced.conj().T
        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or cond > self.cond_limit:
            raise RankDeficientPatternsError(f"Pattern Gram matrix is singular (condition number {cond:.3g})")
        return g

    def ls_estimate(self, y_all: np.ndarray, p: PatternSet, pu: float) -> np.ndarray:
        """
        Least-squares estimate of the cascaded channel.

        Ĥ = P_u^{−1/2}·Y·Pᴴ(P·Pᴴ)⁻¹ on the admissible columns; the other
        columns of the N×M² result are zero.

        Raises:
            RankDeficientPatternsError: If the patterns do not identify the channel
        """
        if pu <= 0:
            raise InvalidInputError(f"Pilot power must be positive, got {pu}")
        y_all = np.atleast_2d(np.asarray(y_all, dtype=complex))
        if y_all.shape[1] != p.j:
            raise DimensionMismatchError(f"Received {y_all.shape[1]} pilot slots for {p.j} patterns")

        reduced = p.reduced
        g = self.gram(p)
        # Y·Pᴴ·G⁻¹ = (G⁻¹·P·Yᴴ)ᴴ since G is Hermitian
        estimate = linalg.solve(g, reduced @ y_all.conj().T, assume_a="her").conj().T / math.sqrt(pu)

        full = np.zeros((y_all.shape[0], p.m * p.m), dtype=complex)
        full[:, p.admissible] = estimate
        return full

    def theoretical_mse(self, p: PatternSet, n: int, sigma2: float, pu: float) -> float:
        """
        Theoretical LS error (N·σ²/P_u)·tr((P·Pᴴ)⁻¹).

        Equals (σ²/P_u)·N·M̄ for the clock-and-shift and group designs.
        """
        if pu <= 0 or sigma2 < 0 or n < 1:
            raise InvalidInputError(f"Need N >= 1, σ² >= 0 and P_u > 0, got N={n}, σ²={sigma2}, P_u={pu}")
        trace = float(np.real(np.trace(np.linalg.inv(self.gram(p)))))
        return n * sigma2 / pu * trace

    def estimation_trial(
        self,
        ch: ChannelSet,
        p: PatternSet,
        sigma2: float,
        pu: float,
        seed: Union[int, np.random.Generator] = 0,
    ) -> float:
        """
        Simulate one training phase and return the squared estimation error.

        y_j = √P_u·H_cas·vec(Θ_j) + n_j with unit pilots and CN(0, σ²) noise;
        the error ‖H − Ĥ‖_F² is taken over the admissible columns.
        """
        rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
        h_cas = self.cascaded_channel(ch)
        if h_cas.shape[1] != p.m * p.m:
            raise DimensionMismatchError(f"Channel has M={ch.m}, patterns have M={p.m}")

        noise = math.sqrt(sigma2) * crandn(rng, h_cas.shape[0], p.j)
        y_all = math.sqrt(pu) * h_cas @ p.stacked + noise
        estimate = self.ls_estimate(y_all, p, pu)

        error = h_cas[:, p.admissible] - estimate[:, p.admissible]
        return float(np.sum(np.abs(error) ** 2))


# Singleton instance
_estimate_service: Optional[EstimateService] = None


def get_estimate_service() -> EstimateService:
    """
    Get the singleton EstimateService instance.

    Returns:
        EstimateService instance
    """
    global _estimate_service
    if _estimate_service is None:
        _estimate_service = EstimateService()
    return _estimate_service
