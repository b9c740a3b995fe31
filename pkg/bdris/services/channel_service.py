"""
Channel service.

This module generates random channels, evaluates the cascaded channel
model and the physics-consistent (mutual-coupling aware) channel model in
its scattering, impedance and admittance forms, maps the parameter blocks
between representations, and builds mutual-coupling impedance matrices for
isotropic radiators and thin-wire dipoles.
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from bdris.config import ABS_ZERO, ETA0, settings
from bdris.errors import DimensionMismatchError, InvalidInputError, NumericalError
from bdris.models.channel import ChannelDims, ChannelSet, FadingKind, FadingSpec, ParameterBlocks
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.topology import ScatteringSpec
from bdris.services.network_service import checked_inv, checked_solve, get_network_service
from bdris.utils.helpers import crandn, make_rng

logger = logging.getLogger(__name__)


class InvalidSpecError(InvalidInputError):
    """Exception raised when a fading specification or channel dimensions are invalid."""
    pass


class InvalidGeometryError(InvalidInputError):
    """Exception raised when array geometry or wavelength is not physical."""
    pass


class QuadratureNotConvergedError(NumericalError):
    """Exception raised when doubling the quadrature order changes the result too much."""
    pass


Control = Union[ScatteringSpec, NetworkMatrix, np.ndarray]


def linear_array_positions(m: int, spacing: float) -> np.ndarray:
    """M×3 centre coordinates of a uniform linear array along x."""
    if m < 1 or spacing <= 0:
        raise InvalidGeometryError(f"Need M >= 1 and positive spacing, got M={m}, spacing={spacing}")
    positions = np.zeros((m, 3))
    positions[:, 0] = spacing * np.arange(m)
    return positions


class ChannelService:
    """
    Service for channel generation and evaluation.

    Attributes:
        quadrature_order: Base Gauss–Legendre order of the dipole model
        quadrature_rtol: Allowed relative change when the order is doubled
    """

    def __init__(self, quadrature_order: Optional[int] = None, quadrature_rtol: Optional[float] = None):
        self.quadrature_order = quadrature_order or settings.quadrature_order
        self.quadrature_rtol = quadrature_rtol or settings.quadrature_rtol
        self.network = get_network_service()

    # ------------------------------------------------------------------
    # Random channels
    # ------------------------------------------------------------------

    def sample_channels(
        self,
        spec: FadingSpec,
        dims: ChannelDims,
        rng: Optional[np.random.Generator] = None,
    ) -> ChannelSet:
        """
        Draw a channel set.

        Rayleigh entries are i.i.d. CN(0, 1); Rician entries are
        √(κ/(1+κ))·1 + √(1/(1+κ))·CN(0, 1) with an all-ones LoS component;
        LoS links are the all-ones matrix. Each link's amplitude is scaled by
        d^{−a/2}. The direct link is zero unless ``spec.direct_link``.

        Args:
            spec: Fading description
            dims: Antenna and element counts
            rng: Random stream (defaults to one seeded with ``spec.seed``)

        Returns:
            ChannelSet of the cascaded model

        Raises:
            InvalidSpecError: If the dimensions are not positive
        """
        if min(dims.n_r, dims.n_t, dims.m) < 1:
            raise InvalidSpecError(f"Channel dimensions must be positive, got {dims}")
        rng = rng if rng is not None else make_rng(spec.seed)

        h_ri = self._link(spec, rng, (dims.n_r, dims.m), spec.distances.ri)
        h_it = self._link(spec, rng, (dims.m, dims.n_t), spec.distances.it)
        if spec.direct_link:
            h_rt = self._link(spec, rng, (dims.n_r, dims.n_t), spec.distances.rt)
        else:
            h_rt = np.zeros((dims.n_r, dims.n_t), dtype=complex)
        return ChannelSet(h_rt=h_rt, h_ri=h_ri, h_it=h_it)

    @staticmethod
    def _link(spec: FadingSpec, rng: np.random.Generator, shape: Tuple[int, int], distance: float) -> np.ndarray:
        scale = distance ** (-spec.pathloss_exponent / 2.0)
        los = np.ones(shape, dtype=complex)
        if spec.kind == FadingKind.LOS:
            return scale * los
        nlos = crandn(rng, *shape)
        if spec.kind == FadingKind.RAYLEIGH:
            return scale * nlos
        kappa = 10.0 ** (spec.rician_factor_db / 10.0)
        return scale * (math.sqrt(kappa / (1 + kappa)) * los + math.sqrt(1 / (1 + kappa)) * nlos)

    # ------------------------------------------------------------------
    # Cascaded model
    # ------------------------------------------------------------------

    def cascade(self, ch: ChannelSet, theta: Control) -> np.ndarray:
        """
        Evaluate H_RT + H_RI·Θ·H_IT.

        Raises:
            DimensionMismatchError: If Θ does not match the channel
        """
        if ch.coupling is not None:
            raise InvalidInputError("Cascaded model applies to channel sets without a coupling block")
        theta = self._matrix(theta)
        if theta.shape != (ch.m, ch.m):
            raise DimensionMismatchError(f"Control is {theta.shape}, channel has M={ch.m}")
        return ch.h_rt + ch.h_ri @ (theta @ ch.h_it)

    # ------------------------------------------------------------------
    # Physics-consistent model
    # ------------------------------------------------------------------

    def coupled_channel(self, ch: ChannelSet, control: Control) -> np.ndarray:
        """
        Evaluate the mutual-coupling aware channel.

        A scattering control (Θ) uses H_S = S_RT + S_RI(I − Θ S_II)⁻¹Θ S_IT,
        an impedance control uses H_Z = (Z_RT − Z_RI(Z_II + Z_I)⁻¹Z_IT)/(2Z0)
        and an admittance control uses H_Y = (−Y_RT + Y_RI(Y_II + Y_I)⁻¹Y_IT)/(2Y0).
        The channel blocks are mapped to the control's representation first.

        Raises:
            SingularMatrixError: At a resonance (I − Θ S_II or Z_II + Z_I singular)
        """
        if ch.coupling is None:
            raise InvalidInputError("Coupled model needs a channel set with a coupling block")
        kind = control.kind if isinstance(control, NetworkMatrix) else NetworkKind.SCATTERING
        x = self._matrix(control)
        if x.shape != (ch.m, ch.m):
            raise DimensionMismatchError(f"Control is {x.shape}, channel has M={ch.m}")

        blocks = self.blocks(ch, kind)
        eye = np.eye(ch.m, dtype=complex)

        if kind == NetworkKind.SCATTERING:
            if not np.any(blocks.ii):
                return blocks.rt + blocks.ri @ (x @ blocks.it)
            inner = checked_solve(eye - x @ blocks.ii, x @ blocks.it, "I − Θ·S_II")
            return blocks.rt + blocks.ri @ inner
        if kind == NetworkKind.IMPEDANCE:
            inner = checked_solve(blocks.ii + x, blocks.it, "Z_II + Z_I")
            return (blocks.rt - blocks.ri @ inner) / (2 * blocks.z0)
        inner = checked_solve(blocks.ii + x, blocks.it, "Y_II + Y_I")
        return (-blocks.rt + blocks.ri @ inner) * blocks.z0 / 2

    def blocks(self, ch: ChannelSet, kind: NetworkKind) -> ParameterBlocks:
        """Parameter blocks of ``ch`` in the requested representation."""
        source = ParameterBlocks.from_channel(ch)
        if source.kind == kind:
            return source
        z_blocks = self._to_impedance(source)
        if kind == NetworkKind.IMPEDANCE:
            return z_blocks
        s_blocks, y_blocks = self.map_z_to_s(z_blocks, need_admittance=kind == NetworkKind.ADMITTANCE)
        return s_blocks if kind == NetworkKind.SCATTERING else y_blocks

    def map_z_to_s(
        self, z: ParameterBlocks, z0: Optional[float] = None, need_admittance: bool = True
    ) -> Tuple[ParameterBlocks, Optional[ParameterBlocks]]:
        """
        Map impedance blocks to scattering and admittance blocks.

        With A = Z_II + Z0·I:
        S_RT = Z_RT/(2Z0) − Z_RI·A⁻¹·Z_IT/(2Z0), S_RI = Z_RI·A⁻¹,
        S_IT = A⁻¹·Z_IT, S_II = A⁻¹(Z_II − Z0·I);
        Y_RT = (−Z_RT + Z_RI·Z_II⁻¹·Z_IT)/Z0², Y_RI = −Z_RI·Z_II⁻¹/Z0,
        Y_IT = −Z_II⁻¹·Z_IT/Z0, Y_II = Z_II⁻¹.

        Returns:
            Tuple of (scattering blocks, admittance blocks or None)

        Raises:
            SingularMatrixError: If A (or Z_II for the admittance map) is singular
        """
        if z.kind != NetworkKind.IMPEDANCE:
            raise InvalidInputError(f"Expected impedance blocks, got {z.kind.value}")
        z0 = z0 or z.z0
        eye = np.eye(z.ii.shape[0], dtype=complex)

        a_inv = checked_inv(z.ii + z0 * eye, "Z_II + Z0·I")
        s_blocks = ParameterBlocks(
            kind=NetworkKind.SCATTERING,
            rt=z.rt / (2 * z0) - z.ri @ a_inv @ z.it / (2 * z0),
            ri=z.ri @ a_inv,
            it=a_inv @ z.it,
            ii=a_inv @ (z.ii - z0 * eye),
            z0=z0,
        )
        if not need_admittance:
            return s_blocks, None

        zii_inv = checked_inv(z.ii, "Z_II")
        y_blocks = ParameterBlocks(
            kind=NetworkKind.ADMITTANCE,
            rt=(-z.rt + z.ri @ zii_inv @ z.it) / z0 ** 2,
            ri=-z.ri @ zii_inv / z0,
            it=-zii_inv @ z.it / z0,
            ii=zii_inv,
            z0=z0,
        )
        return s_blocks, y_blocks

    def _to_impedance(self, b: ParameterBlocks) -> ParameterBlocks:
        """Inverse block maps from scattering or admittance to impedance blocks."""
        z0 = b.z0
        eye = np.eye(b.ii.shape[0], dtype=complex)
        if b.kind == NetworkKind.IMPEDANCE:
            return b
        if b.kind == NetworkKind.SCATTERING:
            zii = self.network.convert(NetworkMatrix(b.ii, NetworkKind.SCATTERING, z0), NetworkKind.IMPEDANCE).values
            a = zii + z0 * eye
            z_ri = b.ri @ a
            z_it = a @ b.it
            return ParameterBlocks(
                NetworkKind.IMPEDANCE, 2 * z0 * b.rt + b.ri @ a @ b.it, z_ri, z_it, zii, z0
            )
        zii = checked_inv(b.ii, "Y_II")
        return ParameterBlocks(
            NetworkKind.IMPEDANCE,
            rt=-(z0 ** 2) * b.rt + (z0 ** 2) * b.ri @ zii @ b.it,
            ri=-z0 * b.ri @ zii,
            it=-z0 * zii @ b.it,
            ii=zii,
            z0=z0,
        )

    @staticmethod
    def _matrix(control: Control) -> np.ndarray:
        if isinstance(control, ScatteringSpec):
            return control.theta
        if isinstance(control, NetworkMatrix):
            return control.values
        return np.atleast_2d(np.asarray(control, dtype=complex))

    # ------------------------------------------------------------------
    # Mutual coupling models
    # ------------------------------------------------------------------

    def isotropic_coupling(
        self, m: int, spacing: float, wavelength: float, self_impedance: complex = settings.z0
    ) -> NetworkMatrix:
        """
        Coupling impedance of a linear array of isotropic radiators.

        [Z]_{m,m'} = −Z_self·e^{−jκ₀d|m−m'|}/(jκ₀d|m−m'|) off the diagonal,
        κ₀ = 2π/λ.

        Raises:
            InvalidGeometryError: If spacing or wavelength is not positive
        """
        if m < 1 or spacing <= 0 or wavelength <= 0:
            raise InvalidGeometryError(f"Need M >= 1, d > 0 and λ > 0, got M={m}, d={spacing}, λ={wavelength}")
        k0 = 2 * math.pi / wavelength
        sep = np.abs(np.subtract.outer(np.arange(m), np.arange(m))).astype(float)
        z = np.full((m, m), complex(self_impedance))
        off = sep > 0
        phase = k0 * spacing * sep[off]
        z[off] = -complex(self_impedance) * np.exp(-1j * phase) / (1j * phase)
        return NetworkMatrix(z, NetworkKind.IMPEDANCE)

    def dipole_coupling(
        self,
        positions: np.ndarray,
        radius: float,
        length: float,
        wavelength: float,
        order: Optional[int] = None,
    ) -> NetworkMatrix:
        """
        Coupling impedance of parallel z-directed thin-wire dipoles.

        Each entry is the double integral of the induced-EMF kernel over
        the two dipole axes weighted by sinusoidal current distributions.
        Both integrals use Gauss–Legendre rules split at the current kink
        (the dipole centre). The inner integral is mapped through
        n' = n + ρ·sinh(u), ρ the horizontal distance, to resolve the
        near-singular self term; the outer one is graded toward the dipole
        ends on the scale of the wire radius.

        Args:
            positions: M×3 dipole centre coordinates in meters
            radius: Wire radius r (horizontal distance of the self term)
            length: Dipole length ι
            wavelength: Wavelength λ
            order: Nodes per segment (defaults to the configured order)

        Returns:
            Symmetric impedance matrix

        Raises:
            InvalidGeometryError: On non-physical geometry
            QuadratureNotConvergedError: If order and doubled order disagree
        """
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise InvalidGeometryError(f"Positions must be M×3, got {positions.shape}")
        if radius <= 0 or length <= 0 or wavelength <= 0:
            raise InvalidGeometryError("Radius, length and wavelength must be positive")
        k0 = 2 * math.pi / wavelength
        if abs(math.sin(k0 * length / 2)) < ABS_ZERO:
            raise InvalidGeometryError(f"Dipole length {length} is a whole number of wavelengths")

        m = positions.shape[0]
        xy = positions[:, :2]
        horizontal = np.sqrt(np.sum((xy[:, None, :] - xy[None, :, :]) ** 2, axis=-1))
        for a in range(m):
            for b in range(a + 1, m):
                if horizontal[a, b] < radius:
                    raise InvalidGeometryError(f"Dipoles {a} and {b} overlap (horizontal distance {horizontal[a, b]:.3g})")

        q = order or self.quadrature_order
        coarse = self._dipole_matrix(positions, horizontal, radius, length, k0, q)
        fine = self._dipole_matrix(positions, horizontal, radius, length, k0, 2 * q)

        change = np.abs(fine - coarse) / np.maximum(np.abs(fine), ABS_ZERO)
        worst = float(np.max(change))
        if worst > self.quadrature_rtol:
            raise QuadratureNotConvergedError(
                f"Dipole coupling changed by {worst:.3g} (relative) between orders {q} and {2 * q}"
            )
        logger.debug(f"Dipole coupling converged: M={m}, order {2 * q}, max relative change {worst:.2e}")
        return NetworkMatrix(fine, NetworkKind.IMPEDANCE)

    def _dipole_matrix(
        self,
        positions: np.ndarray,
        horizontal: np.ndarray,
        radius: float,
        length: float,
        k0: float,
        q: int,
    ) -> np.ndarray:
        m = positions.shape[0]
        z = np.zeros((m, m), dtype=complex)
        nodes, weights = leggauss(q)
        for a in range(m):
            for b in range(a, m):
                rho = radius if a == b else horizontal[a, b]
                z[a, b] = self._dipole_entry(positions[a, 2], positions[b, 2], rho, radius, length, k0, nodes, weights)
                z[b, a] = z[a, b]
        return z

    @staticmethod
    def _dipole_entry(
        mz: float,
        mz2: float,
        rho: float,
        radius: float,
        length: float,
        k0: float,
        nodes: np.ndarray,
        weights: np.ndarray,
    ) -> complex:
        half = length / 2

        # Outer axis: two halves graded toward the ends, n = end ∓ r·sinh(u)
        top = math.asinh(half / radius)
        u = 0.5 * top * (nodes + 1)
        w = 0.5 * top * weights * radius * np.cosh(u)
        offset = radius * np.sinh(u)
        n = np.concatenate([mz - half + offset, mz + half - offset])
        wn = np.concatenate([w, w])

        # Inner axis: n' = n + ρ·sinh(u), split at the centre of the second dipole
        inner_n = []
        inner_w = []
        for lo, hi in ((mz2 - half, mz2), (mz2, mz2 + half)):
            u_lo = np.arcsinh((lo - n) / rho)[:, None]
            u_hi = np.arcsinh((hi - n) / rho)[:, None]
            uu = 0.5 * (u_hi - u_lo) * nodes[None, :] + 0.5 * (u_hi + u_lo)
            inner_n.append(n[:, None] + rho * np.sinh(uu))
            inner_w.append(0.5 * (u_hi - u_lo) * weights[None, :] * rho * np.cosh(uu))
        n2 = np.concatenate(inner_n, axis=1)
        w2 = np.concatenate(inner_w, axis=1)

        dz = n[:, None] - n2
        d = np.sqrt(rho ** 2 + dz ** 2)
        kernel = (
            (1j * ETA0 / (4 * math.pi * k0))
            * ((dz ** 2 / d ** 2) * (3 / d ** 2 + 3j * k0 / d - k0 ** 2) - (1j * k0 + 1 / d) / d + k0 ** 2)
            * np.exp(-1j * k0 * d)
            / d
        )
        current2 = np.sin(k0 * (half - np.abs(n2 - mz2))) / math.sin(k0 * half) ** 2
        current = np.sin(k0 * (half - np.abs(n - mz)))

        inner = np.sum(kernel * current2 * w2, axis=1)
        return complex(np.sum(inner * current * wn))


# Singleton instance
_channel_service: Optional[ChannelService] = None


def get_channel_service() -> ChannelService:
    """
    Get the singleton ChannelService instance.

    Returns:
        ChannelService instance
    """
    global _channel_service
    if _channel_service is None:
        _channel_service = ChannelService()
    return _channel_service
