"""
Hardware impairment service.

This module models the non-idealities of BD-RIS hardware: lossy and
frequency-dependent varactor components, lossy transmission-line
interconnections, and discrete-value susceptances with an offline-learned
codebook and an online coordinate search.
"""

import logging
import math
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.cluster.vq import vq

from bdris.config import ABS_ZERO, settings
from bdris.errors import InvalidInputError
from bdris.models.channel import ChannelSet
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.results import CapacitanceChoice, Codebook, OptimizeResult, SusceptanceFit, VaractorCircuit
from bdris.models.topology import ComponentValues, ConstraintFamily, Edge, ScatteringSpec, Topology
from bdris.services.network_service import checked_solve, get_network_service
from bdris.services.optimize_service import get_optimize_service
from bdris.services.topology_service import get_topology_service
from bdris.utils.helpers import make_rng

logger = logging.getLogger(__name__)


class OutOfRangeError(InvalidInputError):
    """Exception raised when a hardware parameter lies outside its admissible range."""
    pass


class EmptyTrainingError(InvalidInputError):
    """Exception raised when codebook learning receives no usable training data."""
    pass


class DiagonalRule(str, Enum):
    """
    How ζ⁺ enters the diagonal of a lossy-line admittance matrix.

    PER_EDGE weighs each term [Y_I]_{m,n} with the ζ⁺ of its own line (m, n).
    UNIFORM applies one ζ⁺ to every term of row m. Read literally that factor
    belongs to a line (m, m) the circuit does not have, so UNIFORM
    approximates it with the ζ⁺ of the mean active line length; the two
    rules coincide when every line has the same length.
    """

    PER_EDGE = "perEdge"
    UNIFORM = "uniform"


Lengths = Union[float, Dict[Edge, float]]


class ImpairService:
    """
    Service for BD-RIS hardware impairments.

    Attributes:
        z0: Reference impedance in ohms
    """

    def __init__(self, z0: Optional[float] = None):
        self.z0 = z0 or settings.z0
        self.network = get_network_service()
        self.topology = get_topology_service()
        self.optimizer = get_optimize_service()

    # ------------------------------------------------------------------
    # Varactor components
    # ------------------------------------------------------------------

    def varactor_admittance(
        self, v: VaractorCircuit, c: Union[float, np.ndarray], f: Union[float, np.ndarray]
    ) -> Union[complex, np.ndarray]:
        """
        Admittance of the varactor circuit.

        Y = 1/(jωL₁) + 1/(jωL₂ + 1/(jωC) + R), ω = 2πf.

        Raises:
            OutOfRangeError: If C leaves the tunable range or f is not positive
        """
        c_arr = np.asarray(c, dtype=float)
        f_arr = np.asarray(f, dtype=float)
        c_min, c_max = v.c_range
        slack = 1e-9 * c_max
        if np.any(c_arr < c_min - slack) or np.any(c_arr > c_max + slack):
            raise OutOfRangeError(f"Capacitance outside tunable range [{c_min:.3g}, {c_max:.3g}] F")
        if np.any(f_arr <= 0):
            raise OutOfRangeError("Frequency must be positive")

        w = 2 * math.pi * f_arr
        y = 1 / (1j * w * v.l1) + 1 / (1j * w * v.l2 + 1 / (1j * w * c_arr) + v.r)
        return complex(y) if y.ndim == 0 else y

    def varactor_circle(self, v: VaractorCircuit, f: float) -> Tuple[complex, float]:
        """
        Locus of the lossy varactor admittance as C varies.

        Returns:
            Tuple of (centre 1/(2R) − j/(ωL₁), radius 1/(2R))
        """
        if v.r <= 0:
            raise OutOfRangeError("The admittance locus is a circle only for R > 0")
        w = 2 * math.pi * f
        return complex(1 / (2 * v.r), -1 / (w * v.l1)), 1 / (2 * v.r)

    def susceptance_linearity(
        self,
        v: VaractorCircuit,
        c: float,
        f_center: float,
        half_band: float,
        n_points: int = 101,
    ) -> SusceptanceFit:
        """
        Fit Im{Y(C, f)} of the lossless circuit linearly over a band.

        Returns:
            SusceptanceFit with slope (S/Hz), intercept and r²
        """
        if not 0 < half_band < f_center:
            raise OutOfRangeError(f"Half band {half_band} must lie in (0, {f_center})")
        lossless = VaractorCircuit(v.l1, v.l2, 0.0, v.c_range)
        freqs = np.linspace(f_center - half_band, f_center + half_band, n_points)
        b = np.imag(self.varactor_admittance(lossless, c, freqs))

        slope, intercept = np.polyfit(freqs, b, 1)
        residual = b - (slope * freqs + intercept)
        total = np.sum((b - b.mean()) ** 2)
        r2 = 1.0 if total <= ABS_ZERO * max(1.0, float(np.sum(b ** 2))) else 1.0 - float(np.sum(residual ** 2) / total)
        return SusceptanceFit(slope_per_hz=float(slope), intercept=float(intercept), r2=r2)

    def capacitance_for_susceptance(self, v: VaractorCircuit, target_b: float, f: float) -> CapacitanceChoice:
        """
        Capacitance whose lossless admittance has susceptance ``target_b``.

        With B' = B + 1/(ωL₁), C = 1/(ω(ωL₂ + 1/B')). Targets outside the
        reachable range are clamped to the closer end of the tunable range.
        """
        w = 2 * math.pi * f
        lossless = VaractorCircuit(v.l1, v.l2, 0.0, v.c_range)
        c_min, c_max = v.c_range
        shifted = target_b + 1 / (w * v.l1)

        c = None
        if abs(shifted) > ABS_ZERO:
            denom = w * (w * v.l2 + 1 / shifted)
            if denom > 0:
                c = 1 / denom
        if c is not None and c_min <= c <= c_max:
            return CapacitanceChoice(c, False, float(np.imag(self.varactor_admittance(lossless, c, f))))

        ends = [(abs(np.imag(self.varactor_admittance(lossless, x, f)) - target_b), x) for x in (c_min, c_max)]
        _, best = min(ends)
        return CapacitanceChoice(best, True, float(np.imag(self.varactor_admittance(lossless, best, f))))

    def component_admittances(
        self,
        t: Topology,
        v: VaractorCircuit,
        ground_c: Sequence[float],
        inter_c: Dict[Edge, float],
        f: float,
    ) -> ComponentValues:
        """Component values of a topology built from varactors with the given capacitances."""
        ground = np.array([self.varactor_admittance(v, c, f) for c in ground_c])
        inter = {edge: self.varactor_admittance(v, inter_c[edge], f) for edge in t.active_edges}
        return ComponentValues(ground=ground, inter=inter)

    def design_capacitances(
        self, t: Topology, y: NetworkMatrix, v: VaractorCircuit, f: float
    ) -> Tuple[np.ndarray, Dict[Edge, float]]:
        """Capacitances realizing the lossless admittance matrix ``y`` at frequency ``f``."""
        components = self.topology.components_from_admittance(t, y)
        ground = np.array([self.capacitance_for_susceptance(v, g.imag, f).capacitance for g in components.ground])
        inter = {e: self.capacitance_for_susceptance(v, val.imag, f).capacitance for e, val in components.inter.items()}
        return ground, inter

    def wideband_response(
        self,
        t: Topology,
        v: VaractorCircuit,
        ground_c: Sequence[float],
        inter_c: Dict[Edge, float],
        freqs: Sequence[float],
        z0: Optional[float] = None,
    ) -> np.ndarray:
        """Scattering matrix Θ(f) of fixed capacitances at each frequency (K×M×M)."""
        z0 = z0 or self.z0
        out = []
        for f in freqs:
            y = self.topology.assemble_admittance(t, self.component_admittances(t, v, ground_c, inter_c, f), z0)
            out.append(self.network.scattering(y))
        return np.stack(out)

    def wideband_gain_profile(
        self,
        h_ri: np.ndarray,
        h_it: np.ndarray,
        t: Topology,
        v: VaractorCircuit,
        ground_c: Sequence[float],
        inter_c: Dict[Edge, float],
        freqs: Sequence[float],
    ) -> np.ndarray:
        """SISO channel gain |h_RI·Θ(f)·h_IT|² across frequency for a fixed design."""
        a = np.asarray(h_ri, dtype=complex).ravel()
        b = np.asarray(h_it, dtype=complex).ravel()
        thetas = self.wideband_response(t, v, ground_c, inter_c, freqs)
        return np.array([abs(a @ theta @ b) ** 2 for theta in thetas])

    # ------------------------------------------------------------------
    # Lossy interconnections
    # ------------------------------------------------------------------

    def lossy_line_admittance(
        self,
        t: Topology,
        c: ComponentValues,
        lengths: Lengths,
        alpha: float,
        beta: float,
        z0: Optional[float] = None,
        rule: DiagonalRule = DiagonalRule.PER_EDGE,
    ) -> NetworkMatrix:
        """
        Admittance matrix with lossy transmission-line interconnections.

        Off the diagonal, [Y_I]_{m,m'} = −2/(Y_{m,m'}⁻¹·ζ⁺ + Z₀·ζ⁻) with
        ζ± = e^{ζℓ} ± e^{−ζℓ}, ζ = α + jβ; edges with a zero component give 0.
        The diagonal is Y_m − Σ_n (ζ⁺/2)·[Y_I]_{m,n}, with ζ⁺ of edge (m, n)
        (``perEdge``) or of the mean active line length (``uniform``, an
        approximation that is exact for equal line lengths).

        Raises:
            OutOfRangeError: If α or a length is negative
        """
        z0 = z0 or self.z0
        rule = DiagonalRule(rule)
        if alpha < 0:
            raise OutOfRangeError(f"Attenuation constant must be non-negative, got {alpha}")
        edge_lengths = {e: float(lengths if np.isscalar(lengths) else lengths[e]) for e in t.active_edges}
        if any(length < 0 for length in edge_lengths.values()):
            raise OutOfRangeError("Line lengths must be non-negative")
        if c.ground.size != t.m:
            raise InvalidInputError(f"Expected {t.m} ground admittances, got {c.ground.size}")

        zeta = complex(alpha, beta)

        def plus_minus(length: float) -> Tuple[complex, complex]:
            grow, decay = np.exp(zeta * length), np.exp(-zeta * length)
            return complex(grow + decay), complex(grow - decay)

        y = np.zeros((t.m, t.m), dtype=complex)
        plus: Dict[Edge, complex] = {}
        for edge, length in edge_lengths.items():
            zp, zm = plus_minus(length)
            plus[edge] = zp
            value = c.inter[edge]
            if abs(value) <= ABS_ZERO:
                continue
            a, b = edge
            y[a, b] = y[b, a] = -2 / (zp / value + z0 * zm)

        if rule == DiagonalRule.UNIFORM and edge_lengths:
            common, _ = plus_minus(float(np.mean(list(edge_lengths.values()))))
            plus = {e: common for e in plus}

        for k in range(t.m):
            total = c.ground[k]
            for (a, b), zp in plus.items():
                if k in (a, b):
                    total -= zp / 2 * y[a, b]
            y[k, k] = total
        return NetworkMatrix(y, NetworkKind.ADMITTANCE, z0)

    @staticmethod
    def lossy_line_circle(alpha: float, length: float, z0: float, half_waves: int) -> Tuple[float, float]:
        """
        Circle on which a half-wavelength lossy-line entry lies.

        For ℓ = (π/β)·A and lossless components the entry is
        −(−1)^A/(Y⁻¹cosh(αℓ) + Z₀sinh(αℓ)), a circle of centre
        −(−1)^A/(2Z₀sinh(αℓ)) on the real axis and radius 1/(2Z₀sinh(αℓ)).
        """
        if alpha <= 0 or length <= 0:
            raise OutOfRangeError("The locus is a circle only for α > 0 and ℓ > 0")
        radius = 1 / (2 * z0 * math.sinh(alpha * length))
        return -((-1) ** half_waves) * radius, radius

    # ------------------------------------------------------------------
    # Discrete susceptances
    # ------------------------------------------------------------------

    def learn_codebook(
        self,
        training: Sequence[ChannelSet],
        t: Topology,
        bits: int,
        iters: int = 50,
        seed: int = 0,
    ) -> Codebook:
        """
        Learn a susceptance codebook offline.

        The continuous least-squares admittance solution of every training
        channel is computed, the magnitudes of its free susceptances are
        pooled, and 1-D Lloyd iterations with 2^B centroids (initialized at
        the pooled quantiles) refine the codebook. An iteration is kept only
        if it raises the mean training gain after quantization, so the
        recorded objective trace never decreases. When the pool holds at
        most 2^B distinct magnitudes they form the codebook directly.

        Raises:
            EmptyTrainingError: If there is no training channel or no nonzero susceptance
        """
        if not training:
            raise EmptyTrainingError("Codebook learning needs at least one training channel")
        if bits < 1:
            raise InvalidInputError(f"Codebook resolution must be at least 1 bit, got {bits}")

        mask = np.triu(t.mask())
        continuous = []
        pooled: List[np.ndarray] = []
        for ch in training:
            result = self.optimizer.admittance_align_ls(t, ch.h_ri, ch.h_it, 1 / self.z0)
            susceptance = result.control.values.imag
            continuous.append(susceptance)
            pooled.append(np.abs(susceptance[mask]))
        values = np.concatenate(pooled)
        values = values[values > ABS_ZERO]
        if values.size == 0:
            raise EmptyTrainingError("Training channels produced no nonzero susceptance")

        k = 2 ** bits
        distinct = np.unique(values)
        if distinct.size <= k:
            cb = Codebook(bits, tuple(distinct))
            return Codebook(bits, cb.values, trace=(self._codebook_objective(training, t, continuous, cb),))

        rng = make_rng(seed)
        centroids = np.quantile(values, (np.arange(k) + 0.5) / k)
        best_cb = self._centroids_to_codebook(bits, centroids)
        best = self._codebook_objective(training, t, continuous, best_cb)
        trace = [best]

        for iteration in range(iters):
            labels, _ = vq(values[:, None], centroids[:, None])
            updated = centroids.copy()
            for j in range(k):
                members = values[labels == j]
                updated[j] = members.mean() if members.size else values[rng.integers(values.size)]
            updated.sort()
            if np.allclose(updated, centroids, rtol=1e-12, atol=0):
                break
            centroids = updated
            candidate = self._centroids_to_codebook(bits, centroids)
            value = self._codebook_objective(training, t, continuous, candidate)
            if value > best:
                best_cb, best = candidate, value
            trace.append(best)
            logger.debug(f"Codebook iteration {iteration + 1}: mean training gain {best:.6g}")

        return Codebook(bits, best_cb.values, trace=tuple(trace))

    @staticmethod
    def _centroids_to_codebook(bits: int, centroids: np.ndarray) -> Codebook:
        values = np.unique(centroids[centroids > ABS_ZERO])
        return Codebook(bits, tuple(values))

    def _codebook_objective(
        self, training: Sequence[ChannelSet], t: Topology, continuous: List[np.ndarray], cb: Codebook
    ) -> float:
        gains = []
        for ch, susceptance in zip(training, continuous):
            quantized = self._quantize_susceptance(t, susceptance, cb)
            gains.append(self._gain(ch, quantized, 1 / self.z0))
        return math.fsum(gains) / len(gains)

    def quantize_admittance(self, t: Topology, y: NetworkMatrix, cb: Codebook) -> NetworkMatrix:
        """Replace every free susceptance by ± its nearest codebook magnitude."""
        quantized = self._quantize_susceptance(t, y.values.imag, cb)
        return NetworkMatrix(1j * quantized, NetworkKind.ADMITTANCE, y.z0)

    @staticmethod
    def _quantize_susceptance(t: Topology, susceptance: np.ndarray, cb: Codebook) -> np.ndarray:
        mask = t.mask()
        codes = np.asarray(cb.values)
        nearest = codes[np.argmin(np.abs(np.abs(susceptance)[..., None] - codes), axis=-1)]
        signs = np.where(susceptance < 0, -1.0, 1.0)
        return np.where(mask, signs * nearest, 0.0)

    def discrete_optimize(
        self,
        ch: ChannelSet,
        t: Topology,
        cb: Codebook,
        sweeps: int = 10,
        y0: Optional[float] = None,
    ) -> OptimizeResult:
        """
        Online discrete optimization by cyclic coordinate search.

        Starts from the quantized continuous solution, then sets each free
        susceptance in turn to the signed codebook level maximizing
        ‖H_RT + H_RI·Θ(B)·H_IT‖_F². An entry changes only if the objective
        strictly improves; the search stops after ``sweeps`` passes or a
        pass without change.
        """
        y0 = y0 or 1 / self.z0
        continuous = self.optimizer.admittance_align_ls(t, ch.h_ri, ch.h_it, y0).control.values.imag
        susceptance = self._quantize_susceptance(t, continuous, cb)
        best = self._gain(ch, susceptance, y0)
        trace = [best]
        levels = cb.levels
        positions = list(zip(*np.nonzero(np.triu(t.mask()))))

        done = 0
        for done in range(1, sweeps + 1):
            changed = False
            for i, j in positions:
                current = susceptance[i, j]
                choice = current
                for level in levels:
                    if level == current:
                        continue
                    susceptance[i, j] = susceptance[j, i] = level
                    value = self._gain(ch, susceptance, y0)
                    if value > best:
                        best, choice, changed = value, level, True
                susceptance[i, j] = susceptance[j, i] = choice
            trace.append(best)
            logger.debug(f"Discrete sweep {done}: objective {best:.6g}")
            if not changed:
                break

        y = NetworkMatrix(1j * susceptance, NetworkKind.ADMITTANCE, 1 / y0)
        spec = ScatteringSpec(self.network.scattering(y), ConstraintFamily.SYMMETRIC_UNITARY)
        return OptimizeResult(
            control=y,
            objective=best,
            iterations=done,
            trace=trace,
            residuals=dict(self.topology.check_constraint(spec).residuals),
            diagnostics={"scattering": spec, "continuous_objective": self._gain(ch, continuous, y0)},
        )

    @staticmethod
    def _gain(ch: ChannelSet, susceptance: np.ndarray, y0: float) -> float:
        eye = np.eye(susceptance.shape[0])
        y = 1j * susceptance
        reflected = checked_solve(y0 * eye + y, (y0 * eye - y) @ ch.h_it, "Y0·I + Y_I")
        h = ch.h_rt + ch.h_ri @ reflected
        return float(np.sum(np.abs(h) ** 2))


# Singleton instance
_impair_service: Optional[ImpairService] = None


def get_impair_service() -> ImpairService:
    """
    Get the singleton ImpairService instance.

    Returns:
        ImpairService instance
    """
    global _impair_service
    if _impair_service is None:
        _impair_service = ImpairService()
    return _impair_service
