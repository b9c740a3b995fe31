"""
Optimization service for BD-RIS received-power maximization.

This module provides the SISO solvers for every constraint family
(closed-form phase alignment, unitary alignment, admittance-domain
alignment on tree and arbitrary topologies, Givens-rotation search,
symmetric-unitary projection and a penalty method), the MISO alternating
solver, and group-wise solving on block-diagonal architectures.
"""

import logging
import math
from itertools import combinations
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from bdris.config import ABS_ZERO, settings
from bdris.errors import DimensionMismatchError, InvalidInputError, NumericalError
from bdris.models.channel import ChannelSet
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.results import OptimizeResult
from bdris.models.topology import ConstraintFamily, Family, ScatteringSpec, Topology
from bdris.services.network_service import get_network_service
from bdris.services.topology_service import InvalidParamsError, get_topology_service
from bdris.utils.helpers import fro, make_rng

logger = logging.getLogger(__name__)


class DegenerateChannelError(NumericalError):
    """Exception raised when a channel makes a closed-form solve divide by zero."""
    pass


class RankDeficientError(NumericalError):
    """Exception raised when a symmetric-unitary projection is not unique."""
    pass


SisoSolver = Callable[[np.ndarray, np.ndarray], OptimizeResult]


def siso_vectors(h_ri: np.ndarray, h_it: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flatten SISO channels to vectors.

    Raises:
        DimensionMismatchError: If the channels are not 1×M and M×1
    """
    h_ri = np.asarray(h_ri, dtype=complex)
    h_it = np.asarray(h_it, dtype=complex)
    if h_ri.ndim == 2 and h_ri.shape[0] != 1:
        raise DimensionMismatchError(f"SISO receiver channel must be 1×M, got {h_ri.shape}")
    if h_it.ndim == 2 and h_it.shape[1] != 1:
        raise DimensionMismatchError(f"SISO transmitter channel must be M×1, got {h_it.shape}")
    a, b = h_ri.ravel(), h_it.ravel()
    if a.size != b.size:
        raise DimensionMismatchError(f"Channel lengths differ: {a.size} vs {b.size}")
    return a, b


def siso_gain(a: np.ndarray, theta: np.ndarray, b: np.ndarray) -> float:
    """|a·Θ·b|² for flattened SISO channels."""
    return float(abs(a @ theta @ b) ** 2)


def polar_unitary(a: np.ndarray) -> np.ndarray:
    """Unitary polar factor U·Vᴴ of ``a`` (nearest unitary in Frobenius norm)."""
    u, _, vh = linalg.svd(a)
    return u @ vh


def complete_basis(x: np.ndarray) -> np.ndarray:
    """
    Unitary matrix whose first column is ``x / ‖x‖``.

    Built as −φ·H with H the Householder reflector exchanging φ̄·x̂ and −e₁,
    where φ is the phase of x̂₀ (1 when x̂₀ = 0). Column k ≥ 1 is then
    −φ·(e_k − 2v·v̄_k/‖v‖²) with v = φ̄·x̂ + e₁, a fixed function of the
    canonical basis, so equal inputs always give equal bases.
    """
    unit = np.asarray(x, dtype=complex).ravel()
    unit = unit / np.linalg.norm(unit)
    phase = unit[0] / abs(unit[0]) if abs(unit[0]) > ABS_ZERO else 1.0
    v = np.conj(phase) * unit
    v[0] += 1.0
    h = np.eye(unit.size, dtype=complex) - (2.0 / np.real(np.vdot(v, v))) * np.outer(v, v.conj())
    return -phase * h


class OptimizeService:
    """
    Service for SISO/MISO received-power maximization.

    Attributes:
        max_iters: Default iteration budget of the iterative solvers
        tolerance: Constraint tolerance used for residual reporting
    """

    def __init__(self, max_iters: Optional[int] = None, tolerance: Optional[float] = None):
        self.max_iters = max_iters or settings.max_iters
        self.tolerance = tolerance or settings.tolerance
        self.network = get_network_service()
        self.topology = get_topology_service()

    # ------------------------------------------------------------------
    # Closed forms
    # ------------------------------------------------------------------

    def dris_phase_align(self, h_ri: np.ndarray, h_it: np.ndarray) -> OptimizeResult:
        """
        Co-phase every element: θ_m = −∠([h_RI]_m·[h_IT]_m).

        Elements with a zero cascaded coefficient get θ_m = 0.
        """
        a, b = siso_vectors(h_ri, h_it)
        products = a * b
        phases = np.where(np.abs(products) > ABS_ZERO, -np.angle(products), 0.0)
        spec = ScatteringSpec(np.diag(np.exp(1j * phases)), ConstraintFamily.DIAGONAL)
        return OptimizeResult(
            control=spec,
            objective=siso_gain(a, spec.theta, b),
            residuals=self._constraint_residuals(spec),
        )

    def unitary_align(self, h_ri: np.ndarray, h_it: np.ndarray) -> OptimizeResult:
        """
        Globally optimal unitary Θ = V_RI·U_ITᴴ.

        The first columns of V_RI and U_IT are h_RIᴴ/‖h_RI‖ and h_IT/‖h_IT‖;
        the complements come from :func:`complete_basis`. A zero channel
        gives the identity, flagged in the residuals.
        """
        a, b = siso_vectors(h_ri, h_it)
        if np.linalg.norm(a) <= ABS_ZERO or np.linalg.norm(b) <= ABS_ZERO:
            logger.warning("Zero channel passed to unitary alignment; returning identity")
            spec = ScatteringSpec(np.eye(a.size, dtype=complex), ConstraintFamily.UNITARY)
            residuals = self._constraint_residuals(spec)
            residuals["degenerate"] = 1.0
            return OptimizeResult(spec, siso_gain(a, spec.theta, b), residuals=residuals, diagnostics={"degenerate": True})

        v = complete_basis(a.conj())
        u = complete_basis(b)
        spec = ScatteringSpec(v @ u.conj().T, ConstraintFamily.UNITARY)
        return OptimizeResult(spec, siso_gain(a, spec.theta, b), residuals=self._constraint_residuals(spec))

    def tree_admittance_align(
        self, h_ri: np.ndarray, h_it: np.ndarray, y0: Optional[float] = None
    ) -> OptimizeResult:
        """
        Tridiagonal purely imaginary Y_I achieving the unitary bound.

        With u = h̄_IT, v = h̄_RIᴴ (unit-norm channels), s = v + u and
        Y_I = jB, the optimality condition Y_I·s = Y0·(u − v) becomes the
        real tridiagonal system B·s = q, q = −jY0(u − v). Row m fixes
        b_{m,m+1} from the imaginary part and b_m from the real part given
        b_{m−1,m}; the last row is redundant and its imaginary part is
        reported as a consistency residual.

        Raises:
            DegenerateChannelError: If an entry of s is below 1e−12 in magnitude
        """
        a, b = siso_vectors(h_ri, h_it)
        y0 = y0 or settings.y0
        s, q = self._alignment_target(a, b, y0)
        m = s.size

        small = np.flatnonzero(np.abs(s) < ABS_ZERO)
        if small.size:
            raise DegenerateChannelError(
                f"Entry {int(small[0])} of h̄_RIᴴ + h̄_IT vanishes; rotate the phase of h_IT and retry"
            )

        diag = np.zeros(m)
        off = np.zeros(max(m - 1, 0))
        prev = 0.0
        fallback = False
        for k in range(m):
            rhs = q[k] - (prev * s[k - 1] if k > 0 else 0.0)
            proj = np.conj(s[k]) * rhs
            if k == m - 1:
                diag[k] = proj.real / abs(s[k]) ** 2
                final_row = abs(proj.imag) / abs(s[k])
                break
            cross = np.conj(s[k]) * s[k + 1]
            if abs(cross.imag) < 1e-9 * abs(s[k]) * abs(s[k + 1]):
                fallback = True
                break
            off[k] = proj.imag / cross.imag
            diag[k] = (proj.real - off[k] * cross.real) / abs(s[k]) ** 2
            prev = off[k]

        if fallback:
            logger.debug("Tridiagonal forward solve is ill-conditioned; refining by least squares")
            t = self.topology.build_topology(Family.TREE_TRIDIAGONAL, m)
            return self.admittance_align_ls(t, h_ri, h_it, y0)

        susceptance = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
        y = NetworkMatrix(1j * susceptance, NetworkKind.ADMITTANCE, 1.0 / y0)
        result = self._admittance_result(y, a, b, s, q)
        result.residuals["final_row"] = float(final_row)

        if result.residuals["alignment"] > 1e-8:
            t = self.topology.build_topology(Family.TREE_TRIDIAGONAL, m)
            refined = self.admittance_align_ls(t, h_ri, h_it, y0)
            if refined.residuals["alignment"] < result.residuals["alignment"]:
                return refined
        return result

    def admittance_align_ls(
        self, t: Topology, h_ri: np.ndarray, h_it: np.ndarray, y0: Optional[float] = None
    ) -> OptimizeResult:
        """
        Least-squares admittance alignment on an arbitrary topology.

        The free susceptances on the diagonal and on the active edges are
        the unknowns of the 2M real equations Im/Re of B·s = q. The
        alignment residual ‖B·s − q‖ is reported; a residual below 1e−8
        means the unitary bound is reached. The D-RIS closed-form objective
        is reported alongside in the diagnostics.
        """
        a, b = siso_vectors(h_ri, h_it)
        if t.m != a.size:
            raise DimensionMismatchError(f"Topology has M={t.m}, channels have M={a.size}")
        y0 = y0 or settings.y0
        s, q = self._alignment_target(a, b, y0)

        positions = [(k, k) for k in range(t.m)] + list(t.active_edges)
        columns = np.zeros((t.m, len(positions)), dtype=complex)
        for p, (i, j) in enumerate(positions):
            columns[i, p] += s[j]
            if i != j:
                columns[j, p] += s[i]
        system = np.vstack([columns.real, columns.imag])
        rhs = np.concatenate([q.real, q.imag])
        values, *_ = linalg.lstsq(system, rhs)

        susceptance = np.zeros((t.m, t.m))
        for value, (i, j) in zip(values, positions):
            susceptance[i, j] = susceptance[j, i] = value
        y = NetworkMatrix(1j * susceptance, NetworkKind.ADMITTANCE, 1.0 / y0)

        result = self._admittance_result(y, a, b, s, q)
        result.diagnostics["dris_objective"] = self.dris_phase_align(h_ri, h_it).objective
        result.diagnostics["topology"] = t.family.value
        return result

    def _alignment_target(self, a: np.ndarray, b: np.ndarray, y0: float) -> Tuple[np.ndarray, np.ndarray]:
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if na <= ABS_ZERO or nb <= ABS_ZERO:
            raise DegenerateChannelError("Admittance alignment needs nonzero channels")
        u = b / nb
        v = a.conj() / na
        return v + u, -1j * y0 * (u - v)

    def _admittance_result(
        self, y: NetworkMatrix, a: np.ndarray, b: np.ndarray, s: np.ndarray, q: np.ndarray
    ) -> OptimizeResult:
        theta = self.network.scattering(y)
        spec = ScatteringSpec(theta, ConstraintFamily.SYMMETRIC_UNITARY)
        residuals = self._constraint_residuals(spec)
        residuals["alignment"] = float(np.linalg.norm(y.values.imag @ s - q))
        return OptimizeResult(
            control=y,
            objective=siso_gain(a, theta, b),
            residuals=residuals,
            diagnostics={"scattering": spec},
        )

    # ------------------------------------------------------------------
    # Iterative solvers
    # ------------------------------------------------------------------

    def givens_search(
        self,
        objective_fn: Callable[[np.ndarray], float],
        m: int,
        max_iters: Optional[int] = None,
        seed: int = 0,
        theta0: Optional[np.ndarray] = None,
        tol: float = 1e-12,
    ) -> OptimizeResult:
        """
        Maximize an objective over unitary matrices by Givens rotations.

        Each outer pass visits every port pair (p, q) in a seed-dependent
        order and right-multiplies Θ by a complex rotation R(φ, ψ) with
        R[p,p] = R[q,q] = cos φ, R[p,q] = −e^{jψ} sin φ, R[q,p] = e^{−jψ} sin φ.
        The two angles are chosen by a coarse grid, then bounded
        golden-section/Brent searches per coordinate, then a
        finite-difference Newton refinement. A rotation is kept only if it
        improves the objective, so the objective never decreases.

        Args:
            objective_fn: Maps an M×M unitary to a real score
            m: Matrix size
            max_iters: Outer pass budget
            seed: Seed of the pair visiting order
            theta0: Starting unitary (identity by default)
            tol: Relative improvement below which the search stops

        Returns:
            OptimizeResult with the best unitary found
        """
        max_iters = self.max_iters if max_iters is None else max_iters
        theta = np.eye(m, dtype=complex) if theta0 is None else np.array(theta0, dtype=complex)
        rng = make_rng(seed)
        pairs = list(combinations(range(m), 2))
        best = float(objective_fn(theta))
        trace = [best]
        converged = max_iters == 0 or not pairs

        passes = 0
        while passes < max_iters and pairs:
            passes += 1
            start = best
            for idx in rng.permutation(len(pairs)):
                p, q = pairs[idx]
                angles, value = self._best_rotation(objective_fn, theta, p, q, best)
                if value > best:
                    theta = theta @ self._rotation(m, p, q, *angles)
                    best = value
            trace.append(best)
            logger.debug(f"Givens pass {passes}: objective {best:.12g}")
            if best - start <= tol * max(1.0, abs(best)):
                converged = True
                break

        if not converged:
            logger.warning(f"Givens search stopped after {passes} passes without converging")

        spec = ScatteringSpec(theta, ConstraintFamily.UNITARY)
        return OptimizeResult(
            control=spec,
            objective=best,
            iterations=passes,
            residuals=self._constraint_residuals(spec),
            converged=converged,
            trace=trace,
        )

    @staticmethod
    def _rotation(m: int, p: int, q: int, phi: float, psi: float) -> np.ndarray:
        r = np.eye(m, dtype=complex)
        c, s = math.cos(phi), math.sin(phi)
        r[p, p] = r[q, q] = c
        r[p, q] = -np.exp(1j * psi) * s
        r[q, p] = np.exp(-1j * psi) * s
        return r

    def _best_rotation(
        self,
        objective_fn: Callable[[np.ndarray], float],
        theta: np.ndarray,
        p: int,
        q: int,
        current: float,
    ) -> Tuple[Tuple[float, float], float]:
        m = theta.shape[0]

        def score(phi: float, psi: float) -> float:
            return float(objective_fn(theta @ self._rotation(m, p, q, phi, psi)))

        phi_grid = np.linspace(-math.pi / 2, math.pi / 2, 9)
        psi_grid = np.linspace(0, 2 * math.pi, 8, endpoint=False)
        value, phi, psi = max((score(f, g), f, g) for f in phi_grid for g in psi_grid)

        phi_step = phi_grid[1] - phi_grid[0]
        psi_step = psi_grid[1] - psi_grid[0]
        for _ in range(2):
            found = minimize_scalar(
                lambda x: -score(x, psi), bounds=(phi - phi_step, phi + phi_step), method="bounded",
                options={"xatol": 1e-10},
            )
            if -found.fun > value:
                value, phi = -found.fun, float(found.x)
            found = minimize_scalar(
                lambda x: -score(phi, x), bounds=(psi - psi_step, psi + psi_step), method="bounded",
                options={"xatol": 1e-10},
            )
            if -found.fun > value:
                value, psi = -found.fun, float(found.x)

        # Finite-difference Newton refinement, one coordinate at a time
        h = 1e-5
        for _ in range(3):
            for axis in (0, 1):
                x = [phi, psi]
                up, down = list(x), list(x)
                up[axis] += h
                down[axis] -= h
                f_up, f_down = score(*up), score(*down)
                curvature = (f_up - 2 * value + f_down) / h ** 2
                if curvature >= 0:
                    continue
                x[axis] -= ((f_up - f_down) / (2 * h)) / curvature
                candidate = score(*x)
                if candidate > value:
                    value, phi, psi = candidate, x[0], x[1]

        if value <= current:
            return (0.0, 0.0), current
        return (phi, psi), value

    def project_sym_unitary(self, a: np.ndarray, strict: bool = False) -> ScatteringSpec:
        """
        Project onto symmetric unitary matrices.

        Θ_sym = (A + Aᵀ)/2 is replaced by its unitary polar factor U·Vᴴ. For
        a nonsingular Θ_sym the factor is unique and symmetric; otherwise
        the projection is not unique, which is logged (or raised when
        ``strict``) and the result is re-symmetrized and re-projected until
        both residuals fall below 1e−10.

        Raises:
            RankDeficientError: If ``strict`` and Θ_sym has a singular value below 1e−12
        """
        a = np.asarray(a, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"Projection needs a square matrix, got {a.shape}")
        sym = (a + a.T) / 2
        u, sv, vh = linalg.svd(sym)
        if sv.size and sv[-1] < ABS_ZERO:
            message = f"Symmetric part is rank deficient (smallest singular value {sv[-1]:.3g})"
            if strict:
                raise RankDeficientError(message)
            logger.warning(message)
        theta = u @ vh

        for _ in range(10):
            if fro(theta - theta.T) <= 1e-10:
                break
            theta = polar_unitary((theta + theta.T) / 2)
        return ScatteringSpec(theta, ConstraintFamily.SYMMETRIC_UNITARY)

    def penalty_sym_unitary(
        self,
        h_ri: np.ndarray,
        h_it: np.ndarray,
        rho: float = 10.0,
        max_iters: Optional[int] = None,
        feasibility_tol: float = 1e-6,
    ) -> OptimizeResult:
        """
        Penalty (augmented Lagrangian) method for symmetric unitary Θ.

        Θ is kept symmetric, an auxiliary Φ unitary, and Θ = Φ is enforced
        through the multiplier Λ and penalty ρ:

        - Θ ← sym(Φ − Λ/ρ + (2c/ρ)·aᴴbᴴ), a minorize-maximize step of
          |aΘb|² around the current c = aΘb,
        - Φ ← polar(ρΘ + Λ),
        - Λ ← Λ + ρ(Θ − Φ).

        Channels are normalized to unit norm and ρ grows geometrically after
        the first iterations. The returned control is the symmetric-unitary
        projection of Φ, or the D-RIS starting point if that is better.

        Raises:
            InvalidInputError: If ρ is not positive
        """
        if rho <= 0:
            raise InvalidInputError(f"Penalty parameter must be positive, got {rho}")
        a, b = siso_vectors(h_ri, h_it)
        max_iters = max_iters or self.max_iters
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        start = self.dris_phase_align(h_ri, h_it)
        if na <= ABS_ZERO or nb <= ABS_ZERO:
            return start
        an, bn = a / na, b / nb

        theta = start.theta.astype(complex)
        phi = theta.copy()
        lam = np.zeros_like(theta)
        outer = np.outer(an.conj(), bn.conj())
        trace: List[float] = [siso_gain(a, theta, b)]
        converged = False

        iteration = 0
        for iteration in range(1, max_iters + 1):
            c = an @ theta @ bn
            step = phi - lam / rho + (2 * c / rho) * outer
            theta = (step + step.T) / 2
            phi = polar_unitary(rho * theta + lam)
            lam = lam + rho * (theta - phi)

            gap = fro(theta - phi)
            trace.append(siso_gain(a, phi, b))
            if gap <= feasibility_tol and abs(trace[-1] - trace[-2]) <= 1e-10 * max(1.0, trace[-1]):
                converged = True
                break
            if iteration > 20:
                rho = min(rho * 1.05, 1e8)

        if not converged:
            logger.warning(f"Penalty method stopped after {iteration} iterations, gap {fro(theta - phi):.3g}")

        spec = self.project_sym_unitary(phi)
        objective = siso_gain(a, spec.theta, b)
        if objective < start.objective:
            spec, objective = start.control, start.objective

        residuals = self._constraint_residuals(spec)
        residuals["coupling"] = fro(theta - phi)
        return OptimizeResult(
            control=spec,
            objective=objective,
            iterations=iteration,
            residuals=residuals,
            converged=converged,
            trace=trace,
            diagnostics={"rho": rho},
        )

    # ------------------------------------------------------------------
    # Solver registry
    # ------------------------------------------------------------------

    def get_siso_solver(self, name: str) -> SisoSolver:
        """
        Look up a SISO solver by name.

        Names: ``dris``, ``unitary``, ``tree``, ``penalty``, ``givens``.
        Every solver returns a result whose :meth:`scattering_of` is the
        scattering matrix to apply.
        """
        solvers: Dict[str, SisoSolver] = {
            "dris": self.dris_phase_align,
            "unitary": self.unitary_align,
            "tree": self._tree_with_retry,
            "penalty": self.penalty_sym_unitary,
            "givens": self._givens_siso,
        }
        if name not in solvers:
            raise InvalidInputError(f"Unknown solver '{name}'; expected one of {sorted(solvers)}")
        return solvers[name]

    @staticmethod
    def solver_family(name: str) -> ConstraintFamily:
        """Constraint family of the scattering matrices a named solver returns."""
        if name == "dris":
            return ConstraintFamily.DIAGONAL
        if name in ("unitary", "givens"):
            return ConstraintFamily.UNITARY
        return ConstraintFamily.SYMMETRIC_UNITARY

    @staticmethod
    def scattering_of(result: OptimizeResult) -> ScatteringSpec:
        """Scattering spec behind a result (converted admittance solutions included)."""
        if isinstance(result.control, ScatteringSpec):
            return result.control
        return result.diagnostics["scattering"]

    def _tree_with_retry(self, h_ri: np.ndarray, h_it: np.ndarray) -> OptimizeResult:
        a, b = siso_vectors(h_ri, h_it)
        for k in range(8):
            rotation = np.exp(1j * math.pi * k / 4)
            try:
                return self.tree_admittance_align(a, b * rotation)
            except DegenerateChannelError:
                if np.linalg.norm(a) <= ABS_ZERO or np.linalg.norm(b) <= ABS_ZERO:
                    break
                logger.debug(f"Degenerate tree solve, retrying with h_IT rotated by {k + 1}π/4")
        logger.warning("Tree alignment degenerate for every phase rotation; falling back to the D-RIS solution")
        result = self.dris_phase_align(a, b)
        result.diagnostics["degenerate"] = True
        return result

    def _givens_siso(self, h_ri: np.ndarray, h_it: np.ndarray) -> OptimizeResult:
        a, b = siso_vectors(h_ri, h_it)
        return self.givens_search(lambda theta: siso_gain(a, theta, b), a.size, max_iters=50)

    # ------------------------------------------------------------------
    # MISO and group-wise
    # ------------------------------------------------------------------

    def miso_alternate(
        self,
        ch: ChannelSet,
        power: float = 1.0,
        solver: str = "unitary",
        max_iters: Optional[int] = None,
        tol: float = 1e-8,
    ) -> Tuple[np.ndarray, OptimizeResult]:
        """
        Alternate MRT precoding and SISO scattering updates.

        With the precoder fixed, the effective SISO channels are h_RI and
        H_IT·w, plus the direct term h_RT·w; the SISO solver's Θ is rotated
        by a global phase so the RIS path adds coherently to the direct
        path. With Θ fixed, w = √P·h(Θ)ᴴ/‖h(Θ)‖. Updates are kept only if
        they raise the received power |h(Θ)·w|², so the trace never
        decreases.

        Returns:
            Tuple of (precoder w of length N, result with received power)
        """
        if ch.n_r != 1:
            raise DimensionMismatchError(f"MISO solver expects a single receive antenna, got {ch.n_r}")
        if power <= 0:
            raise InvalidInputError(f"Transmit power must be positive, got {power}")
        max_iters = max_iters or self.max_iters
        siso = self.get_siso_solver(solver)
        a = ch.h_ri.ravel()

        def channel(theta: np.ndarray) -> np.ndarray:
            return (ch.h_rt + ch.h_ri @ theta @ ch.h_it).ravel()

        def mrt(theta: np.ndarray) -> np.ndarray:
            h = channel(theta)
            norm = np.linalg.norm(h)
            if norm <= ABS_ZERO:
                return np.full(ch.n_t, math.sqrt(power / ch.n_t), dtype=complex)
            return math.sqrt(power) * h.conj() / norm

        spec = ScatteringSpec(np.eye(ch.m, dtype=complex), self.solver_family(solver))
        w = mrt(spec.theta)
        best = float(abs(channel(spec.theta) @ w) ** 2)
        trace = [best]
        converged = False

        iteration = 0
        for iteration in range(1, max_iters + 1):
            b = ch.h_it @ w
            direct = complex(ch.h_rt.ravel() @ w)
            candidate = self.scattering_of(siso(a, b))
            ris = complex(a @ candidate.theta @ b)
            if abs(direct) > ABS_ZERO and abs(ris) > ABS_ZERO:
                rotated = candidate.theta * np.exp(1j * (np.angle(direct) - np.angle(ris)))
                candidate = ScatteringSpec(rotated, candidate.family, candidate.group_size)
            value = float(abs(channel(candidate.theta) @ w) ** 2)
            if value > best:
                spec, best = candidate, value

            w_next = mrt(spec.theta)
            value = float(abs(channel(spec.theta) @ w_next) ** 2)
            if value >= best:
                w, best = w_next, value

            previous = trace[-1]
            trace.append(best)
            logger.debug(f"MISO iteration {iteration}: received power {best:.12g}")
            if best - previous <= tol * max(abs(best), ABS_ZERO):
                converged = True
                break

        if not converged:
            logger.warning(f"MISO alternation hit the iteration limit ({max_iters})")

        result = OptimizeResult(
            control=spec,
            objective=best,
            iterations=iteration,
            residuals=self._constraint_residuals(spec),
            converged=converged,
            trace=trace,
            diagnostics={"solver": solver, "power": power},
        )
        return w, result

    def groupwise_solve(self, ch: ChannelSet, group_size: int, solver: str = "tree") -> OptimizeResult:
        """
        Solve each group of a block-diagonal architecture independently.

        Each block's Θ_g is rotated by a phase so its contribution
        h_RI,g·Θ_g·h_IT,g is real positive, making the blocks add
        coherently.

        Raises:
            InvalidParamsError: If the group size does not divide M
        """
        a, b = siso_vectors(ch.h_ri, ch.h_it)
        m = a.size
        if group_size < 1 or m % group_size:
            raise InvalidParamsError(f"Group size {group_size} does not divide M={m}")
        siso = self.get_siso_solver(solver)

        theta = np.zeros((m, m), dtype=complex)
        for start in range(0, m, group_size):
            block = slice(start, start + group_size)
            sub = self.scattering_of(siso(a[block], b[block])).theta
            contribution = a[block] @ sub @ b[block]
            if abs(contribution) > ABS_ZERO:
                sub = sub * np.exp(-1j * np.angle(contribution))
            theta[block, block] = sub

        family = (
            ConstraintFamily.BLOCK_SYMMETRIC_UNITARY
            if self.solver_family(solver).reciprocal
            else ConstraintFamily.BLOCK_UNITARY
        )
        spec = ScatteringSpec(theta, family, group_size)
        return OptimizeResult(
            control=spec,
            objective=siso_gain(a, theta, b),
            residuals=self._constraint_residuals(spec),
            diagnostics={"solver": solver, "groupSize": group_size},
        )

    # ------------------------------------------------------------------
    # Utilities
    # ------------------------------------------------------------------

    @staticmethod
    def optimality_ratio(h_ri: np.ndarray, theta: np.ndarray, h_it: np.ndarray) -> float:
        """|h_RI·Θ·h_IT|² / (‖h_RI‖²‖h_IT‖²), 1 at the unitary optimum."""
        a, b = siso_vectors(h_ri, h_it)
        bound = np.linalg.norm(a) ** 2 * np.linalg.norm(b) ** 2
        if bound <= ABS_ZERO:
            return 0.0
        return siso_gain(a, np.asarray(theta), b) / bound

    @staticmethod
    def quantize_phases(theta: np.ndarray, bits: int) -> ScatteringSpec:
        """Round the phases of a diagonal Θ to the uniform 2^B-level grid."""
        if bits < 1:
            raise InvalidInputError(f"Phase resolution must be at least 1 bit, got {bits}")
        levels = 2 ** bits
        step = 2 * math.pi / levels
        phases = np.mod(np.angle(np.diag(np.asarray(theta))), 2 * math.pi)
        quantized = np.mod(np.round(phases / step), levels) * step
        return ScatteringSpec(np.diag(np.exp(1j * quantized)), ConstraintFamily.DIAGONAL)

    def _constraint_residuals(self, spec: ScatteringSpec) -> Dict[str, float]:
        return dict(self.topology.check_constraint(spec).residuals)


# Singleton instance
_optimize_service: Optional[OptimizeService] = None


def get_optimize_service() -> OptimizeService:
    """
    Get the singleton OptimizeService instance.

    Returns:
        OptimizeService instance
    """
    global _optimize_service
    if _optimize_service is None:
        _optimize_service = OptimizeService()
    return _optimize_service
