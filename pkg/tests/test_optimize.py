"""
Tests for the SISO/MISO solvers and their optimality certificates.
"""

import math

import numpy as np
import pytest

from bdris.errors import DimensionMismatchError, InvalidInputError
from bdris.models.channel import ChannelSet
from bdris.models.network import NetworkKind
from bdris.models.topology import ConstraintFamily, Family
from bdris.services.optimize_service import DegenerateChannelError, RankDeficientError, complete_basis
from bdris.services.topology_service import InvalidParamsError
from bdris.utils.helpers import crandn, fro, make_rng


def unitary_bound(h_ri, h_it):
    return float(np.linalg.norm(h_ri) ** 2 * np.linalg.norm(h_it) ** 2)


class TestClosedForms:
    def test_dris_co_phases_every_element(self, optimizer, siso_pair):
        h_ri, h_it = siso_pair
        result = optimizer.dris_phase_align(h_ri, h_it)
        expected = np.sum(np.abs(h_ri.ravel() * h_it.ravel())) ** 2
        assert result.objective == pytest.approx(expected, rel=1e-12)
        assert result.control.family == ConstraintFamily.DIAGONAL

    def test_unitary_reaches_the_bound(self, optimizer, rng):
        for _ in range(100):
            h_ri, h_it = crandn(rng, 1, 8), crandn(rng, 8, 1)
            result = optimizer.unitary_align(h_ri, h_it)
            assert optimizer.optimality_ratio(h_ri, result.control.theta, h_it) >= 1 - 1e-8
            assert result.residuals["unitarity"] < 1e-10

    def test_unitary_zero_channel_is_flagged(self, optimizer):
        result = optimizer.unitary_align(np.zeros((1, 3)), np.ones((3, 1)))
        assert result.diagnostics["degenerate"]
        np.testing.assert_array_equal(result.control.theta, np.eye(3))

    def test_tree_reaches_the_bound(self, optimizer, topology, rng):
        mask = topology.structure_mask(Family.TREE_TRIDIAGONAL, 8)
        for _ in range(100):
            h_ri, h_it = crandn(rng, 1, 8), crandn(rng, 8, 1)
            result = optimizer.tree_admittance_align(h_ri, h_it)
            y = result.control
            assert y.kind == NetworkKind.ADMITTANCE
            assert np.all(y.values.real == 0)
            np.testing.assert_allclose(y.values, y.values.T)
            assert not np.any(y.values[~mask])

            theta = optimizer.scattering_of(result).theta
            assert optimizer.optimality_ratio(h_ri, theta, h_it) >= 1 - 1e-8
            assert topology.check_constraint(optimizer.scattering_of(result), tol=1e-9).passed

    def test_tree_degenerate_entry(self, optimizer):
        h_ri = np.array([[1.0, 1.0]])
        h_it = np.array([[-1.0], [1.0]])
        with pytest.raises(DegenerateChannelError):
            optimizer.tree_admittance_align(h_ri, h_it)

        # The registered solver retries with a rotated transmitter channel
        result = optimizer.get_siso_solver("tree")(h_ri, h_it)
        theta = optimizer.scattering_of(result).theta
        assert optimizer.optimality_ratio(h_ri, theta, h_it) == pytest.approx(1.0, abs=1e-8)

    def test_least_squares_on_fully_connected(self, optimizer, topology, siso_pair):
        h_ri, h_it = siso_pair
        t = topology.build_topology(Family.FULLY, 8)
        result = optimizer.admittance_align_ls(t, h_ri, h_it)
        assert result.residuals["alignment"] < 1e-8
        assert result.objective == pytest.approx(unitary_bound(h_ri, h_it), rel=1e-8)
        assert result.objective >= result.diagnostics["dris_objective"]

    def test_least_squares_on_single_connected_is_not_optimal(self, optimizer, topology, siso_pair):
        h_ri, h_it = siso_pair
        t = topology.build_topology(Family.SINGLE, 8)
        result = optimizer.admittance_align_ls(t, h_ri, h_it)
        assert result.residuals["alignment"] > 1e-6


class TestDominance:
    def test_more_connections_never_lose(self, optimizer):
        for seed in range(100):
            rng = make_rng(seed)
            ch = ChannelSet(np.zeros((1, 1)), crandn(rng, 1, 8), crandn(rng, 8, 1))
            single = optimizer.dris_phase_align(ch.h_ri, ch.h_it).objective
            pairs = optimizer.groupwise_solve(ch, 2).objective
            quads = optimizer.groupwise_solve(ch, 4).objective
            fully = optimizer.unitary_align(ch.h_ri, ch.h_it).objective
            tree = optimizer.tree_admittance_align(ch.h_ri, ch.h_it).objective
            assert single <= pairs * (1 + 1e-9)
            assert pairs <= quads * (1 + 1e-9)
            assert quads <= fully * (1 + 1e-9)
            assert abs(tree - fully) <= 1e-8 * fully

    def test_group_result_is_block_symmetric(self, optimizer, topology, siso_pair):
        h_ri, h_it = siso_pair
        ch = ChannelSet(np.zeros((1, 1)), h_ri, h_it)
        result = optimizer.groupwise_solve(ch, 4)
        assert result.control.family == ConstraintFamily.BLOCK_SYMMETRIC_UNITARY
        assert topology.check_constraint(result.control, tol=1e-9).passed

    def test_group_size_must_divide(self, optimizer, siso_pair):
        ch = ChannelSet(np.zeros((1, 1)), *siso_pair)
        with pytest.raises(InvalidParamsError):
            optimizer.groupwise_solve(ch, 3)


class TestIterativeSolvers:
    def test_givens_is_monotone_and_near_optimal(self, optimizer, rng):
        h_ri, h_it = crandn(rng, 1, 4), crandn(rng, 4, 1)
        result = optimizer.get_siso_solver("givens")(h_ri, h_it)
        assert all(later >= earlier for earlier, later in zip(result.trace, result.trace[1:]))
        assert optimizer.optimality_ratio(h_ri, result.control.theta, h_it) > 0.99
        assert result.residuals["unitarity"] < 1e-9

    def test_givens_without_passes(self, optimizer):
        result = optimizer.givens_search(lambda theta: float(theta[0, 0].real), 3, max_iters=0)
        assert result.converged
        assert result.iterations == 0

    def test_penalty_is_feasible_and_beats_dris(self, optimizer, topology, siso_pair):
        h_ri, h_it = siso_pair
        result = optimizer.penalty_sym_unitary(h_ri, h_it)
        assert topology.check_constraint(result.control, tol=1e-8).passed
        assert result.objective >= optimizer.dris_phase_align(h_ri, h_it).objective

    def test_penalty_rejects_bad_rho(self, optimizer, siso_pair):
        with pytest.raises(InvalidInputError):
            optimizer.penalty_sym_unitary(*siso_pair, rho=0.0)

    def test_projection_is_symmetric_unitary(self, optimizer, rng):
        spec = optimizer.project_sym_unitary(crandn(rng, 5, 5))
        assert fro(spec.theta - spec.theta.T) < 1e-10
        assert fro(spec.theta.conj().T @ spec.theta - np.eye(5)) < 1e-10

    def test_projection_strict_rank_deficiency(self, optimizer):
        with pytest.raises(RankDeficientError):
            optimizer.project_sym_unitary(np.zeros((2, 2)), strict=True)


class TestMiso:
    def test_trace_is_monotone(self, optimizer, rng):
        ch = ChannelSet(crandn(rng, 1, 4), crandn(rng, 1, 8), crandn(rng, 8, 4))
        w, result = optimizer.miso_alternate(ch, power=2.0)
        assert all(later >= earlier for earlier, later in zip(result.trace, result.trace[1:]))
        assert np.linalg.norm(w) ** 2 == pytest.approx(2.0)
        h = ch.h_rt + ch.h_ri @ result.control.theta @ ch.h_it
        assert abs((h @ w)[0]) ** 2 == pytest.approx(result.objective)

    def test_rejects_multiple_receive_antennas(self, optimizer, rng):
        ch = ChannelSet(crandn(rng, 2, 2), crandn(rng, 2, 4), crandn(rng, 4, 2))
        with pytest.raises(DimensionMismatchError) as info:
            optimizer.miso_alternate(ch)
        assert "single receive antenna" in str(info.value)


class TestUtilities:
    def test_quantize_phases(self, optimizer):
        theta = np.diag(np.exp(1j * np.array([0.1, 1.7, 3.0, -0.2])))
        spec = optimizer.quantize_phases(theta, 2)
        expected = np.exp(1j * np.array([0.0, math.pi / 2, math.pi, 0.0]))
        np.testing.assert_allclose(np.diag(spec.theta), expected, atol=1e-12)

    def test_quantize_needs_a_bit(self, optimizer):
        with pytest.raises(InvalidInputError):
            optimizer.quantize_phases(np.eye(2), 0)

    def test_unknown_solver(self, optimizer):
        with pytest.raises(InvalidInputError):
            optimizer.get_siso_solver("exhaustive")

    @pytest.mark.parametrize("m", [1, 2, 8, 64])
    def test_complete_basis_is_unitary_with_given_first_column(self, rng, m):
        x = crandn(rng, m)
        basis = complete_basis(x)
        np.testing.assert_allclose(basis[:, 0], x / np.linalg.norm(x), atol=1e-12)
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(m), atol=1e-12)

    def test_complete_basis_is_deterministic(self, rng):
        x = crandn(rng, 16)
        np.testing.assert_array_equal(complete_basis(x), complete_basis(x.copy()))

    @pytest.mark.parametrize("k", [0, 3])
    def test_complete_basis_of_canonical_vector(self, k):
        x = np.zeros(4, dtype=complex)
        x[k] = 2.0
        basis = complete_basis(x)
        np.testing.assert_allclose(basis[:, 0], np.eye(4)[:, k], atol=1e-15)
        np.testing.assert_allclose(basis.conj().T @ basis, np.eye(4), atol=1e-14)


class TestSmallCases:
    def test_single_element_dris(self, optimizer):
        result = optimizer.dris_phase_align(np.array([[1.0]]), np.array([[1j]]))
        assert np.angle(result.control.theta[0, 0]) == pytest.approx(-math.pi / 2)
        assert result.objective == pytest.approx(1.0)

    def test_single_element_tree_is_imaginary(self, optimizer):
        result = optimizer.tree_admittance_align(np.array([[0.6 + 0.8j]]), np.array([[1j]]))
        assert result.control.values[0, 0].real == 0
        assert result.objective == pytest.approx(1.0)

    def test_givens_matches_unitary_for_two_elements(self, optimizer, rng):
        h_ri, h_it = crandn(rng, 1, 2), crandn(rng, 2, 1)
        found = optimizer.get_siso_solver("givens")(h_ri, h_it)
        assert found.objective == pytest.approx(optimizer.unitary_align(h_ri, h_it).objective, rel=1e-6)

    def test_projection_of_positive_diagonal_is_identity(self, optimizer):
        spec = optimizer.project_sym_unitary(np.diag([2.0, 0.5]))
        np.testing.assert_allclose(spec.theta, np.eye(2), atol=1e-12)

    def test_single_antenna_miso_is_siso(self, optimizer, rng):
        ch = ChannelSet(np.zeros((1, 1)), crandn(rng, 1, 4), crandn(rng, 4, 1))
        w, result = optimizer.miso_alternate(ch, power=4.0, solver="unitary")
        assert abs(w[0]) == pytest.approx(2.0)
        assert result.objective == pytest.approx(4.0 * optimizer.unitary_align(ch.h_ri, ch.h_it).objective)
