"""
Tests for varactor circuits, lossy interconnections and discrete susceptances.
"""

import math

import numpy as np
import pytest

from bdris.models.channel import ChannelSet
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.results import Codebook, VaractorCircuit
from bdris.models.topology import ComponentValues, Family
from bdris.services.impair_service import DiagonalRule, EmptyTrainingError, OutOfRangeError
from bdris.utils.helpers import crandn, make_rng

F0 = 2.4e9
CIRCUIT = VaractorCircuit(l1=6e-9, l2=0.7e-9, r=1.0)
LOSSLESS = VaractorCircuit(l1=6e-9, l2=0.7e-9)


def lossless_components(t, rng):
    return ComponentValues(
        ground=1j * rng.standard_normal(t.m) / 50,
        inter={e: 1j * rng.standard_normal() / 50 for e in t.active_edges},
    )


def siso_channels(rng, m, count):
    return [ChannelSet(np.zeros((1, 1)), crandn(rng, 1, m), crandn(rng, m, 1)) for _ in range(count)]


class TestVaractor:
    def test_admittance_lies_on_circle(self, impair):
        centre, radius = impair.varactor_circle(CIRCUIT, F0)
        caps = np.linspace(*CIRCUIT.c_range, 200)
        y = impair.varactor_admittance(CIRCUIT, caps, F0)
        np.testing.assert_allclose(np.abs(y - centre), radius, atol=1e-10)
        assert centre.imag == pytest.approx(-1 / (2 * math.pi * F0 * 6e-9))

    def test_scalar_input_gives_complex(self, impair):
        assert isinstance(impair.varactor_admittance(CIRCUIT, 1e-12, F0), complex)

    @pytest.mark.parametrize("c", [0.5e-12, 1e-12, 2e-12])
    def test_susceptance_is_linear_over_band(self, impair, c):
        fit = impair.susceptance_linearity(CIRCUIT, c, F0, 100e6)
        assert fit.r2 > 0.99
        assert fit.slope_per_hz != 0

    def test_capacitance_for_susceptance(self, impair):
        target = impair.varactor_admittance(LOSSLESS, 1.5e-12, F0).imag
        choice = impair.capacitance_for_susceptance(CIRCUIT, target, F0)
        assert not choice.clamped
        assert choice.capacitance == pytest.approx(1.5e-12, rel=1e-9)
        assert choice.achieved == pytest.approx(target, rel=1e-9)

    def test_unreachable_susceptance_is_clamped(self, impair):
        choice = impair.capacitance_for_susceptance(CIRCUIT, 10.0, F0)
        assert choice.clamped
        assert choice.capacitance in CIRCUIT.c_range

    def test_out_of_range(self, impair):
        with pytest.raises(OutOfRangeError):
            impair.varactor_admittance(CIRCUIT, 5e-12, F0)
        with pytest.raises(OutOfRangeError):
            impair.varactor_admittance(CIRCUIT, 1e-12, 0.0)
        with pytest.raises(OutOfRangeError):
            impair.varactor_circle(LOSSLESS, F0)
        with pytest.raises(OutOfRangeError):
            impair.susceptance_linearity(CIRCUIT, 1e-12, F0, F0)


class TestWideband:
    def test_design_round_trip(self, impair, topology):
        t = topology.build_topology(Family.TREE_TRIDIAGONAL, 4)
        ground = [0.8e-12, 1.2e-12, 2.0e-12, 2.6e-12]
        inter = {e: 1.0e-12 + 0.3e-12 * k for k, e in enumerate(t.active_edges)}
        c = impair.component_admittances(t, LOSSLESS, ground, inter, F0)
        y = topology.assemble_admittance(t, c)

        ground_back, inter_back = impair.design_capacitances(t, y, LOSSLESS, F0)
        np.testing.assert_allclose(ground_back, ground, rtol=1e-8)
        for edge, value in inter.items():
            assert inter_back[edge] == pytest.approx(value, rel=1e-8)

    def test_lossless_response_is_unitary_at_every_frequency(self, impair, topology):
        t = topology.build_topology(Family.FULLY, 3)
        ground = [1e-12] * 3
        inter = {e: 2e-12 for e in t.active_edges}
        freqs = np.linspace(2.3e9, 2.5e9, 5)
        thetas = impair.wideband_response(t, LOSSLESS, ground, inter, freqs)
        assert thetas.shape == (5, 3, 3)
        for theta in thetas:
            np.testing.assert_allclose(theta.conj().T @ theta, np.eye(3), atol=1e-10)
            np.testing.assert_allclose(theta, theta.T, atol=1e-12)

    def test_gain_profile_is_bounded(self, impair, topology, optimizer, rng):
        t = topology.build_topology(Family.TREE_TRIDIAGONAL, 4)
        h_ri, h_it = crandn(rng, 1, 4), crandn(rng, 4, 1)
        y = optimizer.admittance_align_ls(t, h_ri, h_it).control
        ground, inter = impair.design_capacitances(t, y, LOSSLESS, F0)
        freqs = [2.2e9, F0, 2.6e9]
        profile = impair.wideband_gain_profile(h_ri, h_it, t, LOSSLESS, ground, inter, freqs)
        assert profile.shape == (3,)
        bound = np.linalg.norm(h_ri) ** 2 * np.linalg.norm(h_it) ** 2
        assert np.all(profile <= bound * (1 + 1e-9))


class TestLossyLines:
    def test_zero_length_reproduces_lumped_admittance(self, impair, topology, rng):
        t = topology.build_topology(Family.FULLY, 4)
        c = lossless_components(t, rng)
        lossy = impair.lossy_line_admittance(t, c, 0.0, alpha=0.3, beta=2 * math.pi)
        np.testing.assert_allclose(lossy.values, topology.assemble_admittance(t, c).values, atol=1e-15)

    @pytest.mark.parametrize("rule", [DiagonalRule.PER_EDGE, DiagonalRule.UNIFORM])
    def test_lossless_half_wave_lines_stay_lossless(self, impair, topology, network, rng, rule):
        t = topology.build_topology(Family.FULLY, 4)
        c = lossless_components(t, rng)
        y = impair.lossy_line_admittance(t, c, 0.5, alpha=0.0, beta=2 * math.pi, rule=rule)
        assert np.max(np.abs(y.values.real)) < 1e-12 * np.max(np.abs(y.values))
        assert network.predicates(y, tol=1e-9).lossless

    def test_lossy_entries_lie_on_circle(self, impair, topology):
        t = topology.build_topology(Family.FULLY, 2)
        z0, alpha, beta = 50.0, 0.5, 2 * math.pi
        for half_waves, length in ((1, 0.5), (2, 1.0)):
            centre, radius = impair.lossy_line_circle(alpha, length, z0, half_waves)
            for b in np.linspace(-0.1, 0.1, 11):
                if abs(b) < 1e-9:
                    continue
                c = ComponentValues(ground=np.zeros(2, dtype=complex), inter={(0, 1): 1j * b})
                y = impair.lossy_line_admittance(t, c, length, alpha, beta, z0=z0)
                assert abs(y.values[0, 1] - centre) == pytest.approx(radius, rel=1e-9)

    def test_per_edge_lengths(self, impair, topology, rng):
        t = topology.build_topology(Family.TREE_TRIDIAGONAL, 3)
        c = lossless_components(t, rng)
        uniform = impair.lossy_line_admittance(t, c, 0.1, alpha=0.2, beta=1.0)
        per_edge = impair.lossy_line_admittance(t, c, {(0, 1): 0.1, (1, 2): 0.1}, alpha=0.2, beta=1.0)
        np.testing.assert_allclose(per_edge.values, uniform.values)

    def test_diagonal_rules_agree_for_equal_lengths(self, impair, topology, rng):
        t = topology.build_topology(Family.FULLY, 4)
        c = lossless_components(t, rng)
        per_edge = impair.lossy_line_admittance(t, c, 0.3, alpha=0.2, beta=1.0, rule=DiagonalRule.PER_EDGE)
        uniform = impair.lossy_line_admittance(t, c, 0.3, alpha=0.2, beta=1.0, rule=DiagonalRule.UNIFORM)
        np.testing.assert_allclose(uniform.values, per_edge.values, rtol=1e-12)

    def test_diagonal_rules_differ_for_unequal_lengths(self, impair, topology, rng):
        t = topology.build_topology(Family.TREE_TRIDIAGONAL, 3)
        c = lossless_components(t, rng)
        lengths = {(0, 1): 0.1, (1, 2): 0.5}
        per_edge = impair.lossy_line_admittance(t, c, lengths, alpha=0.2, beta=1.0, rule=DiagonalRule.PER_EDGE)
        uniform = impair.lossy_line_admittance(t, c, lengths, alpha=0.2, beta=1.0, rule=DiagonalRule.UNIFORM)
        off = ~np.eye(3, dtype=bool)
        np.testing.assert_allclose(uniform.values[off], per_edge.values[off])
        assert not np.allclose(np.diag(uniform.values), np.diag(per_edge.values))

    def test_zero_component_gives_no_coupling(self, impair, topology):
        t = topology.build_topology(Family.FULLY, 2)
        c = ComponentValues(ground=np.ones(2) * 1j, inter={(0, 1): 0j})
        y = impair.lossy_line_admittance(t, c, 0.3, alpha=0.1, beta=1.0)
        assert y.values[0, 1] == 0

    def test_invalid_line_parameters(self, impair, topology, rng):
        t = topology.build_topology(Family.FULLY, 2)
        c = lossless_components(t, rng)
        with pytest.raises(OutOfRangeError):
            impair.lossy_line_admittance(t, c, 0.1, alpha=-0.1, beta=1.0)
        with pytest.raises(OutOfRangeError):
            impair.lossy_line_admittance(t, c, -0.1, alpha=0.1, beta=1.0)
        with pytest.raises(OutOfRangeError):
            impair.lossy_line_circle(0.0, 0.5, 50.0, 1)


class TestDiscreteSusceptances:
    def test_codebook_trace_is_monotone(self, impair, topology):
        t = topology.build_topology(Family.FULLY, 4)
        cb = impair.learn_codebook(siso_channels(make_rng(1), 4, 20), t, bits=2)
        assert 1 <= len(cb.values) <= 4
        assert len(cb.trace) >= 1
        assert all(later >= earlier for earlier, later in zip(cb.trace, cb.trace[1:]))

    def test_few_distinct_values_form_the_codebook(self, impair, topology):
        t = topology.build_topology(Family.SINGLE, 1)
        training = [ChannelSet(np.zeros((1, 1)), np.ones((1, 1)), np.full((1, 1), 1j))]
        cb = impair.learn_codebook(training, t, bits=1)
        assert len(cb.values) == 1
        assert len(cb.trace) == 1

    def test_empty_training(self, impair, topology):
        with pytest.raises(EmptyTrainingError):
            impair.learn_codebook([], topology.build_topology(Family.FULLY, 2), bits=1)

    def test_quantize_admittance(self, impair, topology):
        t = topology.build_topology(Family.TREE_TRIDIAGONAL, 3)
        b = np.array([[0.011, -0.004, 0.0], [-0.004, -0.02, 0.03], [0.0, 0.03, 0.002]])
        cb = Codebook(1, (0.005, 0.02))
        y = impair.quantize_admittance(t, NetworkMatrix(1j * b, NetworkKind.ADMITTANCE), cb)
        expected = np.array([[0.005, -0.005, 0.0], [-0.005, -0.02, 0.02], [0.0, 0.02, 0.005]])
        np.testing.assert_allclose(y.values.imag, expected)

    def test_one_bit_discrete_is_close_to_continuous(self, impair, topology):
        rng = make_rng(5)
        t = topology.build_topology(Family.FULLY, 16)
        cb = impair.learn_codebook(siso_channels(rng, 16, 20), t, bits=1)

        discrete, continuous = [], []
        for ch in siso_channels(rng, 16, 5):
            result = impair.discrete_optimize(ch, t, cb)
            assert all(later >= earlier for earlier, later in zip(result.trace, result.trace[1:]))
            assert np.all(result.control.values.real == 0)
            discrete.append(result.objective)
            continuous.append(result.diagnostics["continuous_objective"])
        assert np.mean(discrete) >= 0.85 * np.mean(continuous)
