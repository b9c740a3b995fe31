"""
Closed-form analysis service.

Scaling laws and analytical gains of BD-RIS over D-RIS: average SISO
channel gains under i.i.d. Rayleigh fading, group-connected gain ratios,
least circuit complexity, mutual coupling, distributed deployment and
dual-polarization limits.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln

from bdris.errors import NumericalError
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.results import ComplexityOptimum, DistributedBounds, GainReport, ScalingLaws
from bdris.services.channel_service import InvalidGeometryError
from bdris.services.impair_service import OutOfRangeError
from bdris.services.topology_service import InvalidParamsError

logger = logging.getLogger(__name__)

# Γ(3/2)⁴ = π²/16, the fourth power of the mean Rayleigh amplitude
GAMMA_1P5_POW4 = math.pi ** 2 / 16


class SingularRealPartError(NumericalError):
    """Exception raised when Re{Z_II} cannot be inverted."""
    pass


class AnalysisService:
    """Service evaluating the closed-form gain expressions."""

    def scaling_laws(self, m: int) -> ScalingLaws:
        """
        Average SISO channel gains for i.i.d. Rayleigh channels.

        D-RIS: M + (π²/16)·M(M−1). BD-RIS: M².
        """
        if m < 1:
            raise InvalidParamsError(f"Element count must be at least 1, got {m}")
        dris = m + GAMMA_1P5_POW4 * m * (m - 1)
        bdris = float(m * m)
        return ScalingLaws(dris=dris, bdris=bdris, ratio=bdris / dris)

    @staticmethod
    def _group_numerator(m: int, m_bar: int) -> float:
        # (Γ(M̄+½)/Γ(M̄))⁴ through log-gamma so large groups do not overflow
        ratio4 = math.exp(4 * (gammaln(m_bar + 0.5) - gammaln(m_bar)))
        return m_bar + (m - m_bar) / m_bar ** 2 * ratio4

    def group_gain_ratio(self, m: int, m_bar: int, variant: str = "corrected") -> GainReport:
        """
        Gain of a group-connected surface with group size M̄ over D-RIS.

        The numerator is M̄ + ((M−M̄)/M̄²)·(Γ(M̄+½)/Γ(M̄))⁴. The ``corrected``
        denominator 1 + (M−1)·Γ⁴(3/2) gives 1 for M̄ = 1 and the BD-RIS
        over D-RIS ratio for M̄ = M; ``printed`` uses 1 + (M̄−1)·Γ⁴(3/2).

        Raises:
            InvalidParamsError: If M̄ does not divide M or the variant is unknown
        """
        if m < 1 or m_bar < 1 or m % m_bar:
            raise InvalidParamsError(f"Group size {m_bar} does not divide M={m}")
        if variant == "corrected":
            denominator = 1 + (m - 1) * GAMMA_1P5_POW4
        elif variant == "printed":
            denominator = 1 + (m_bar - 1) * GAMMA_1P5_POW4
        else:
            raise InvalidParamsError(f"Unknown group gain variant '{variant}'")
        value = self._group_numerator(m, m_bar) / denominator
        return GainReport(value=value, inputs={"m": m, "mBar": m_bar, "variant": variant}, formula="groupGainRatio")

    def group_gain(self, m: int, m_bar: int) -> float:
        """Average SISO channel gain M·(numerator) of a group-connected surface."""
        if m < 1 or m_bar < 1 or m % m_bar:
            raise InvalidParamsError(f"Group size {m_bar} does not divide M={m}")
        return m * self._group_numerator(m, m_bar)

    def optimal_complexity(self, m: int, n_tx: int, user_antennas: Sequence[int]) -> ComplexityOptimum:
        """
        Least circuit complexity reaching the optimum.

        MISO: 2M − 1. MU-MIMO with D = min(ΣN_k, N) and d = min(D, ⌊M/2⌋):
        d·(2M − 2d + 1).
        """
        if m < 1 or n_tx < 1 or any(n < 1 for n in user_antennas):
            raise InvalidParamsError("Element, transmit and user antenna counts must be positive")
        d = min(min(sum(user_antennas), n_tx), m // 2)
        return ComplexityOptimum(miso=2 * m - 1, mu_mimo=d * (2 * m - 2 * d + 1))

    def mc_gain(self, z_ii: NetworkMatrix) -> GainReport:
        """
        Average channel gain increase brought by mutual coupling.

        With R = Re{Z_II}⁻¹ and Z the common self-resistance,
        G = Z²·(tr(R²) + tr²(R) + √(π·tr(R²))·tr(R)) / (M + M² + √(πM)·M).

        Raises:
            SingularRealPartError: If Re{Z_II} is singular or the diagonal is not uniform
        """
        if z_ii.kind != NetworkKind.IMPEDANCE:
            raise InvalidParamsError(f"Coupling gain expects an impedance matrix, got {z_ii.kind.value}")
        real = z_ii.values.real
        m = z_ii.m
        diagonal = np.diag(real)
        self_resistance = float(diagonal[0])
        if not np.allclose(diagonal, self_resistance, rtol=1e-9, atol=0):
            raise SingularRealPartError("Self impedances must share a common value")
        cond = np.linalg.cond(real)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularRealPartError(f"Re{{Z_II}} is singular (condition number {cond:.3g})")

        r = np.linalg.inv(real)
        tr_r = float(np.trace(r))
        tr_r2 = float(np.trace(r @ r))
        numerator = tr_r2 + tr_r ** 2 + math.sqrt(math.pi * tr_r2) * tr_r
        denominator = m + m * m + math.sqrt(math.pi * m) * m
        value = self_resistance ** 2 * numerator / denominator
        return GainReport(value=value, inputs={"m": m, "selfResistance": self_resistance}, formula="mcGain")

    def distributed_bounds(
        self,
        d_r: float,
        d_t: float,
        d_r_elements: Sequence[float],
        d_t_elements: Sequence[float],
        a: float,
    ) -> DistributedBounds:
        """
        Bounds on the gain of a distributed over a localized surface.

        lower = (d_R·d_T/(M^{2/a}·min d_R,m·min d_T,m))^a and
        upper = (d_R·d_T/(min d_R,m·min d_T,m))^a; both are 1 when a = 0.

        Raises:
            InvalidGeometryError: On non-positive distances or a negative exponent
        """
        r_elems = np.asarray(d_r_elements, dtype=float)
        t_elems = np.asarray(d_t_elements, dtype=float)
        if r_elems.size == 0 or r_elems.size != t_elems.size:
            raise InvalidGeometryError("Per-element distance lists must be nonempty and of equal length")
        if d_r <= 0 or d_t <= 0 or np.any(r_elems <= 0) or np.any(t_elems <= 0):
            raise InvalidGeometryError("Distances must be positive")
        if a < 0:
            raise InvalidGeometryError(f"Pathloss exponent must be non-negative, got {a}")
        if a == 0:
            return DistributedBounds(lower=1.0, upper=1.0)

        m = r_elems.size
        base = d_r * d_t / (r_elems.min() * t_elems.min())
        upper = base ** a
        lower = upper / m ** 2
        return DistributedBounds(lower=lower, upper=upper)

    def dual_pol_limit(self, chi: float, fading: str, same_polarization: bool) -> GainReport:
        """
        Large-M gain of BD-RIS over D-RIS with dual-polarized elements.

        Same polarization: 16/π². Opposite polarization: 4(1+χ)²/(π²χ)
        (Rayleigh) or (1+χ)²/(4χ) (LoS).

        Raises:
            OutOfRangeError: If χ is outside (0, 1] or the fading kind is unknown
        """
        if fading not in ("rayleigh", "los"):
            raise OutOfRangeError(f"Dual-polarization limit is defined for rayleigh or los, got '{fading}'")
        if not 0 < chi <= 1:
            raise OutOfRangeError(f"Cross-polar ratio must lie in (0, 1], got {chi}")
        if same_polarization:
            value = 16 / math.pi ** 2
        elif fading == "rayleigh":
            value = 4 * (1 + chi) ** 2 / (math.pi ** 2 * chi)
        else:
            value = (1 + chi) ** 2 / (4 * chi)
        inputs = {"chi": chi, "fading": fading, "samePolarization": same_polarization}
        return GainReport(value=value, inputs=inputs, formula="dualPolLimit")

    @staticmethod
    def achievable_rate(gain: float, power: float, sigma2: float) -> float:
        """Achievable rate log2(1 + P·gain/σ²) in bit/s/Hz."""
        if gain < 0 or power < 0 or sigma2 <= 0:
            raise InvalidParamsError("Need gain >= 0, power >= 0 and sigma2 > 0")
        return math.log2(1 + power * gain / sigma2)


# Singleton instance
_analysis_service: Optional[AnalysisService] = None


def get_analysis_service() -> AnalysisService:
    """
    Get the singleton AnalysisService instance.

    Returns:
        AnalysisService instance
    """
    global _analysis_service
    if _analysis_service is None:
        _analysis_service = AnalysisService()
    return _analysis_service
