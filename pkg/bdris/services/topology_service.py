"""
Topology service for BD-RIS architectures.

This module builds the circuit topology of every reciprocal BD-RIS
family, maps component values to the admittance matrix, counts circuit
complexity, checks scattering matrices against their constraint family,
constructs non-diagonal (permuted) scattering matrices and extracts the
hybrid and multi-sector mode blocks.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from bdris.config import settings
from bdris.errors import DimensionMismatchError, InvalidInputError
from bdris.models.network import NetworkKind, NetworkMatrix
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
from bdris.utils.helpers import fro, relative_residual, sorted_edges

logger = logging.getLogger(__name__)


class InvalidParamsError(InvalidInputError):
    """Exception raised when topology parameters are inconsistent with the port count."""
    pass


class MissingComponentError(InvalidInputError):
    """Exception raised when a component value is missing for an active edge or port."""
    pass


class InvalidPermutationError(InvalidInputError):
    """Exception raised when a port permutation is not a permutation of 0..M-1."""
    pass


# Constraint family implied by each reciprocal circuit family
CONSTRAINT_FAMILIES: Dict[Family, ConstraintFamily] = {
    Family.SINGLE: ConstraintFamily.DIAGONAL,
    Family.GROUP: ConstraintFamily.BLOCK_SYMMETRIC_UNITARY,
    Family.FOREST: ConstraintFamily.BLOCK_SYMMETRIC_UNITARY,
}


def block_mask(m: int, group_size: int) -> np.ndarray:
    """Boolean block-diagonal mask with consecutive blocks of ``group_size``."""
    groups = np.arange(m) // group_size
    return groups[:, None] == groups[None, :]


def haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw an M×M unitary from the Haar measure."""
    if m == 1:
        return np.exp(2j * np.pi * rng.random((1, 1)))
    return unitary_group.rvs(m, random_state=rng)


def validate_permutation(perm: Sequence[int], m: int, name: str = "permutation") -> Tuple[int, ...]:
    """
    Check that ``perm`` is a permutation of ``0..m-1``.

    Raises:
        InvalidPermutationError: If it is not
    """
    perm = tuple(int(p) for p in perm)
    if len(perm) != m or sorted(perm) != list(range(m)):
        raise InvalidPermutationError(f"{name} {list(perm)} is not a permutation of 0..{m - 1}")
    return perm


class TopologyService:
    """
    Service for BD-RIS circuit topologies and scattering constraints.

    Attributes:
        tolerance: Default tolerance for constraint checks
    """

    def __init__(self, tolerance: Optional[float] = None):
        self.tolerance = tolerance or settings.tolerance

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    def build_topology(
        self,
        family: Union[Family, str],
        m: int,
        group_size: Optional[int] = None,
        band_width: Optional[int] = None,
        stem_width: Optional[int] = None,
        switch_mask: Optional[Dict[Edge, bool]] = None,
        permutation: Optional[Sequence[int]] = None,
    ) -> Topology:
        """
        Build the topology of a BD-RIS family.

        Args:
            family: Architecture family
            m: Port count
            group_size: Group size M̄ (group and forest)
            band_width: Band width q (band)
            stem_width: Stem width q (stem)
            switch_mask: Per-edge switch state (dynamic); all on by default
            permutation: Port permutation realizing interlaced groups (group and forest)

        Returns:
            Topology with the family's edge set

        Raises:
            InvalidParamsError: If a parameter is out of range
        """
        family = Family(family)
        if m < 1:
            raise InvalidParamsError(f"Port count must be at least 1, got {m}")

        params: Dict[str, object] = {}
        switches = None

        if family == Family.SINGLE:
            edges: List[Edge] = []
        elif family in (Family.FULLY, Family.DYNAMIC):
            edges = [(a, b) for a in range(m) for b in range(a + 1, m)]
        elif family in (Family.GROUP, Family.FOREST):
            size = self._group_size(m, group_size)
            params["groupSize"] = size
            edges = []
            for start in range(0, m, size):
                if family == Family.GROUP:
                    edges += [(a, b) for a in range(start, start + size) for b in range(a + 1, start + size)]
                else:
                    edges += [(a, a + 1) for a in range(start, start + size - 1)]
            if permutation is not None:
                perm = validate_permutation(permutation, m)
                params["permutation"] = list(perm)
                edges = [(perm[a], perm[b]) for a, b in edges]
        elif family == Family.TREE_TRIDIAGONAL:
            edges = [(a, a + 1) for a in range(m - 1)]
        elif family == Family.TREE_ARROWHEAD:
            edges = [(0, a) for a in range(1, m)]
        elif family == Family.BAND:
            q = self._width(m, band_width, "band width")
            params["bandWidth"] = q
            edges = [(a, b) for a in range(m) for b in range(a + 1, min(a + q, m - 1) + 1)]
        else:
            q = self._width(m, stem_width, "stem width")
            params["stemWidth"] = q
            edges = [(a, b) for a in range(m) for b in range(a + 1, m) if a < q]

        edges = sorted_edges(edges)
        if family == Family.DYNAMIC:
            switches = {e: True for e in edges}
            for (a, b), on in (switch_mask or {}).items():
                key = (min(a, b), max(a, b))
                if key not in switches:
                    raise InvalidParamsError(f"Switch edge {key} is not a port pair of an M={m} surface")
                switches[key] = bool(on)

        topology = Topology(m=m, family=family, edges=tuple(edges), params=params, switches=switches)
        logger.debug(f"Built {family.value} topology: M={m}, {len(edges)} inter-port edges")
        return topology

    def structure_mask(self, family: Union[Family, str], m: int, **params) -> np.ndarray:
        """Boolean M×M matrix of admissible nonzero positions of Y_I."""
        return self.build_topology(family, m, **params).mask()

    def circuit_complexity(self, t: Topology) -> ComplexityReport:
        """
        Count tunable admittance components (plus switches for dynamic).

        The dynamic family reports every possible component and a switch per
        inter-port pair regardless of the current switch state.
        """
        if t.family == Family.DYNAMIC:
            return ComplexityReport(components=t.m * (t.m + 1) // 2, switches=t.m * (t.m - 1) // 2)
        return ComplexityReport(components=t.m + len(t.edges))

    @staticmethod
    def constraint_family_for(family: Union[Family, str]) -> ConstraintFamily:
        """Constraint family of the lossless scattering matrix a circuit family realizes."""
        return CONSTRAINT_FAMILIES.get(Family(family), ConstraintFamily.SYMMETRIC_UNITARY)

    # ------------------------------------------------------------------
    # Component values <-> admittance matrix
    # ------------------------------------------------------------------

    def assemble_admittance(self, t: Topology, c: ComponentValues, z0: Optional[float] = None) -> NetworkMatrix:
        """
        Build Y_I from component values.

        Off-diagonal entries are −Y_{m,m'} on active edges, diagonal entries are
        Y_m plus the admittances of every active edge incident to port m.

        Raises:
            MissingComponentError: If a ground or active-edge value is absent
        """
        if c.ground.size != t.m:
            raise MissingComponentError(f"Expected {t.m} ground admittances, got {c.ground.size}")

        y = np.diag(c.ground.astype(complex))
        for edge in t.active_edges:
            if edge not in c.inter:
                raise MissingComponentError(f"No admittance value for edge {edge}")
            a, b = edge
            value = c.inter[edge]
            y[a, b] -= value
            y[b, a] -= value
            y[a, a] += value
            y[b, b] += value
        return NetworkMatrix(y, NetworkKind.ADMITTANCE, z0 or settings.z0)

    def components_from_admittance(self, t: Topology, y: NetworkMatrix) -> ComponentValues:
        """Recover component values from an admittance matrix on ``t``'s active edges."""
        if y.m != t.m:
            raise DimensionMismatchError(f"Admittance is {y.m}x{y.m}, topology has M={t.m}")
        values = y.values
        inter = {(a, b): complex(-values[a, b]) for a, b in t.active_edges}
        ground = np.diag(values).copy()
        for (a, b), v in inter.items():
            ground[a] -= v
            ground[b] -= v
        return ComponentValues(ground=ground, inter=inter)

    # ------------------------------------------------------------------
    # Constraint checks
    # ------------------------------------------------------------------

    def family_mask(self, spec: ScatteringSpec) -> np.ndarray:
        """Admissible nonzero positions of a scattering matrix of ``spec``'s family."""
        m = spec.m
        if spec.family == ConstraintFamily.DIAGONAL:
            return np.eye(m, dtype=bool)
        if spec.family.blocked:
            return block_mask(m, spec.group_size or m)
        if spec.family == ConstraintFamily.PERMUTED_DIAGONAL:
            mask = np.zeros((m, m), dtype=bool)
            if spec.permutations is not None:
                perm_r, perm_t = spec.permutations
                mask[np.arange(m), [perm_t[perm_r[i]] for i in range(m)]] = True
            else:
                mask[np.arange(m), np.argmax(np.abs(spec.theta), axis=1)] = True
            return mask
        return np.ones((m, m), dtype=bool)

    def check_constraint(
        self,
        target: Union[ScatteringSpec, NetworkMatrix],
        tol: Optional[float] = None,
        topology: Optional[Topology] = None,
    ) -> ConstraintReport:
        """
        Check a scattering spec or network matrix against its constraints.

        Scattering specs are checked for (a) zero pattern outside the family
        mask, (b) symmetry for reciprocal families and (c) unitarity per
        block (unit modulus for diagonal). Admittance matrices are checked
        against the mask of ``topology``, symmetry and losslessness.
        Scattering-kind network matrices are tagged with the constraint
        family of ``topology`` (symmetric-unitary when absent).

        Returns:
            ConstraintReport with a residual per clause and the violated ones
        """
        tol = tol or self.tolerance

        if isinstance(target, NetworkMatrix):
            if target.kind == NetworkKind.SCATTERING:
                family = ConstraintFamily.SYMMETRIC_UNITARY
                group_size = None
                if topology is not None:
                    family = self.constraint_family_for(topology.family)
                    group_size = topology.params.get("groupSize")
                target = ScatteringSpec(target.values, family, group_size)
            else:
                return self._check_network(target, tol, topology)

        theta = target.theta
        residuals: Dict[str, float] = {}

        mask = self.family_mask(target)
        residuals["zero_pattern"] = relative_residual(np.where(mask, 0, theta), theta)

        if target.family.reciprocal:
            residuals["symmetry"] = relative_residual(theta - theta.T, theta)

        if target.family == ConstraintFamily.DIAGONAL:
            residuals["unitarity"] = float(np.max(np.abs(np.abs(np.diag(theta)) - 1.0)))
        elif target.family.blocked:
            size = target.group_size or target.m
            residuals["unitarity"] = max(
                fro(block.conj().T @ block - np.eye(size)) for block in self.blocks(theta, size)
            )
        else:
            residuals["unitarity"] = fro(theta.conj().T @ theta - np.eye(target.m))

        return self._report(residuals, tol)

    def _check_network(self, n: NetworkMatrix, tol: float, topology: Optional[Topology]) -> ConstraintReport:
        values = n.values
        residuals: Dict[str, float] = {}
        if topology is not None:
            if topology.m != n.m:
                raise DimensionMismatchError(f"Matrix is {n.m}x{n.m}, topology has M={topology.m}")
            residuals["zero_pattern"] = relative_residual(np.where(topology.mask(), 0, values), values)
        residuals["symmetry"] = relative_residual(values - values.T, values)
        residuals["lossless"] = relative_residual(values.real, values)
        return self._report(residuals, tol)

    @staticmethod
    def _report(residuals: Dict[str, float], tol: float) -> ConstraintReport:
        violations = [Violation(clause, r) for clause, r in residuals.items() if r > tol]
        return ConstraintReport(passed=not violations, residuals=residuals, violations=violations)

    @staticmethod
    def blocks(theta: np.ndarray, size: int) -> List[np.ndarray]:
        """Diagonal blocks of ``theta`` of the given size."""
        return [theta[s:s + size, s:s + size] for s in range(0, theta.shape[0], size)]

    # ------------------------------------------------------------------
    # Scattering-level constructions
    # ------------------------------------------------------------------

    def non_diagonal_scattering(
        self, phases: Sequence[float], perm_r: Sequence[int], perm_t: Sequence[int]
    ) -> ScatteringSpec:
        """
        Build Θ = Γ_r·diag(e^{jθ})·Γ_t with [Γ]_{i, perm[i]} = 1.

        Phases are reduced modulo 2π.

        Raises:
            InvalidPermutationError: If a permutation is invalid
        """
        phases = np.mod(np.asarray(phases, dtype=float).ravel(), 2 * math.pi)
        m = phases.size
        if m == 0 or not np.all(np.isfinite(phases)):
            raise InvalidInputError("Phases must be a nonempty finite vector")
        perm_r = validate_permutation(perm_r, m, "row permutation")
        perm_t = validate_permutation(perm_t, m, "column permutation")

        theta = np.zeros((m, m), dtype=complex)
        for i in range(m):
            k = perm_r[i]
            theta[i, perm_t[k]] = np.exp(1j * phases[k])
        return ScatteringSpec(theta, ConstraintFamily.PERMUTED_DIAGONAL, permutations=(perm_r, perm_t))

    def random_scattering(
        self,
        family: Union[ConstraintFamily, str],
        m: int,
        rng: np.random.Generator,
        group_size: Optional[int] = None,
    ) -> ScatteringSpec:
        """
        Draw a random lossless scattering matrix of a constraint family.

        Symmetric unitary matrices are drawn as U·Uᵀ with U Haar distributed.
        """
        family = ConstraintFamily(family)
        if family == ConstraintFamily.DIAGONAL:
            return ScatteringSpec(np.diag(np.exp(2j * np.pi * rng.random(m))), family)
        if family == ConstraintFamily.PERMUTED_DIAGONAL:
            return self.non_diagonal_scattering(2 * np.pi * rng.random(m), rng.permutation(m), rng.permutation(m))

        size = group_size or m
        if m % size:
            raise InvalidParamsError(f"Group size {size} does not divide M={m}")
        theta = np.zeros((m, m), dtype=complex)
        for start in range(0, m, size):
            u = haar_unitary(size, rng)
            if family.reciprocal:
                u = u @ u.T
            theta[start:start + size, start:start + size] = u
        return ScatteringSpec(theta, family, group_size if family.blocked else None)

    def mode_blocks(
        self,
        spec: ScatteringSpec,
        mode: str,
        sectors: int = 2,
        groups: int = 1,
    ) -> ModeBlocks:
        """
        Extract mode-specific blocks and their power-conservation residuals.

        hybrid: Θ_r is the top-left and Θ_t the bottom-left M/2×M/2 block;
        each is split into ``groups`` diagonal sub-blocks and group g gets
        the residual ‖Θ_r,gᴴΘ_r,g + Θ_t,gᴴΘ_t,g − I‖_F. Reciprocity of the
        reflected part is reported separately as ‖Θ_r,g − Θ_r,gᵀ‖_F per group.

        multiSector: with n = M/L, sector l's coefficients are
        Θ[l·n:(l+1)·n, :n]; element i gets the residual of the power it
        scatters into all sectors, |Σ_l ‖Θ_l[:, i]‖² − 1|.

        Raises:
            DimensionMismatchError: If M is not divisible as the mode requires
        """
        theta = spec.theta
        m = spec.m

        if mode == "hybrid":
            if m % 2:
                raise DimensionMismatchError(f"Hybrid mode needs an even port count, got M={m}")
            half = m // 2
            if groups < 1 or half % groups:
                raise DimensionMismatchError(f"{groups} groups do not divide M/2={half}")
            size = half // groups
            theta_r = theta[:half, :half]
            theta_t = theta[half:, :half]
            pairs = []
            residuals = []
            symmetry = []
            for start in range(0, half, size):
                block = slice(start, start + size)
                r_g, t_g = theta_r[block, block], theta_t[block, block]
                pairs.append((r_g, t_g))
                residuals.append(fro(r_g.conj().T @ r_g + t_g.conj().T @ t_g - np.eye(size)))
                symmetry.append(fro(r_g - r_g.T))
            return ModeBlocks(mode, pairs, np.asarray(residuals), np.asarray(symmetry))

        if mode == "multiSector":
            if sectors < 1 or m % sectors:
                raise DimensionMismatchError(f"{sectors} sectors do not divide M={m}")
            n = m // sectors
            column = [theta[l * n:(l + 1) * n, :n] for l in range(sectors)]
            power = sum(np.sum(np.abs(b) ** 2, axis=0) for b in column)
            return ModeBlocks(mode, column, np.abs(power - 1.0))

        raise InvalidInputError(f"Unknown mode '{mode}'; expected 'hybrid' or 'multiSector'")

    # ------------------------------------------------------------------
    # Helpers
    # ------------------------------------------------------------------

    @staticmethod
    def _group_size(m: int, group_size: Optional[int]) -> int:
        size = m if group_size is None else int(group_size)
        if size < 1 or m % size:
            raise InvalidParamsError(f"Group size {size} does not divide M={m}")
        return size

    @staticmethod
    def _width(m: int, width: Optional[int], name: str) -> int:
        if width is None or not 1 <= int(width) <= m - 1:
            raise InvalidParamsError(f"{name} must lie in [1, {m - 1}], got {width}")
        return int(width)


# Singleton instance
_topology_service: Optional[TopologyService] = None


def get_topology_service() -> TopologyService:
    """
    Get the singleton TopologyService instance.

    Returns:
        TopologyService instance
    """
    global _topology_service
    if _topology_service is None:
        _topology_service = TopologyService()
    return _topology_service
