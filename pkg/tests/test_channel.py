"""
Tests for channel generation, the cascaded and coupled models, and coupling matrices.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from bdris.errors import InvalidInputError
from bdris.models.channel import ChannelDims, ChannelSet, FadingKind, FadingSpec
from bdris.models.network import NetworkKind, NetworkMatrix
from bdris.models.topology import ConstraintFamily, ScatteringSpec
from bdris.services.channel_service import (
    ChannelService,
    InvalidGeometryError,
    InvalidSpecError,
    QuadratureNotConvergedError,
    linear_array_positions,
)
from bdris.utils.helpers import crandn, make_rng, relative_residual

WAVELENGTH = 0.125


def coupled_impedance_channel(channels, rng, m=4):
    z_ii = channels.isotropic_coupling(m, WAVELENGTH / 4, WAVELENGTH)
    return ChannelSet(
        h_rt=crandn(rng, 1, 1),
        h_ri=10 * crandn(rng, 1, m),
        h_it=10 * crandn(rng, m, 1),
        coupling=z_ii,
    )


class TestSampleChannels:
    def test_rayleigh_power(self, channels):
        ch = channels.sample_channels(FadingSpec(seed=3), ChannelDims(1, 1, 20000))
        assert np.mean(np.abs(ch.h_ri) ** 2) == pytest.approx(1.0, rel=0.05)
        assert np.mean(np.abs(ch.h_it) ** 2) == pytest.approx(1.0, rel=0.05)
        assert abs(np.mean(ch.h_ri)) < 0.05

    def test_shapes_and_direct_link(self, channels):
        ch = channels.sample_channels(FadingSpec(), ChannelDims(2, 3, 5))
        assert ch.h_ri.shape == (2, 5)
        assert ch.h_it.shape == (5, 3)
        assert ch.h_rt.shape == (2, 3)
        assert not np.any(ch.h_rt)

        with_direct = channels.sample_channels(FadingSpec(direct_link=True), ChannelDims(2, 3, 5))
        assert np.all(with_direct.h_rt != 0)

    def test_same_seed_same_channels(self, channels):
        spec = FadingSpec(seed=11)
        a = channels.sample_channels(spec, ChannelDims(1, 1, 8))
        b = channels.sample_channels(spec, ChannelDims(1, 1, 8))
        np.testing.assert_array_equal(a.h_ri, b.h_ri)
        c = channels.sample_channels(spec, ChannelDims(1, 1, 8), rng=make_rng(12))
        assert not np.allclose(a.h_ri, c.h_ri)

    def test_los_with_pathloss(self, channels):
        spec = FadingSpec(kind=FadingKind.LOS, pathloss_exponent=2.0, distances={"ri": 10.0, "it": 2.0})
        ch = channels.sample_channels(spec, ChannelDims(1, 1, 4))
        np.testing.assert_allclose(ch.h_ri, np.full((1, 4), 0.1))
        np.testing.assert_allclose(ch.h_it, np.full((4, 1), 0.5))

    def test_strong_rician_approaches_los(self, channels):
        spec = FadingSpec(kind="rician", rician_factor_db=60.0)
        ch = channels.sample_channels(spec, ChannelDims(1, 1, 16))
        np.testing.assert_allclose(ch.h_ri, np.ones((1, 16)), atol=0.01)

    def test_rejects_empty_dimensions(self, channels):
        with pytest.raises(InvalidSpecError):
            channels.sample_channels(FadingSpec(), ChannelDims(1, 1, 0))

    def test_spec_aliases_and_unknown_keys(self):
        spec = FadingSpec.model_validate({"kind": "rician", "ricianFactorDb": 3.0, "directLink": True})
        assert spec.rician_factor_db == 3.0 and spec.direct_link
        with pytest.raises(ValidationError):
            FadingSpec.model_validate({"kind": "rayleigh", "shadowing": 8})
        with pytest.raises(ValidationError):
            FadingSpec(pathloss_exponent=-1)


class TestCascade:
    def test_matches_direct_evaluation(self, channels, rng):
        ch = ChannelSet(crandn(rng, 2, 3), crandn(rng, 2, 4), crandn(rng, 4, 3))
        theta = crandn(rng, 4, 4)
        np.testing.assert_allclose(channels.cascade(ch, theta), ch.h_rt + ch.h_ri @ theta @ ch.h_it)

    def test_accepts_a_spec(self, channels, rng):
        ch = ChannelSet(np.zeros((1, 1)), crandn(rng, 1, 3), crandn(rng, 3, 1))
        spec = ScatteringSpec(np.eye(3), ConstraintFamily.DIAGONAL)
        assert channels.cascade(ch, spec)[0, 0] == pytest.approx((ch.h_ri @ ch.h_it)[0, 0])

    def test_rejects_coupled_channel(self, channels, rng):
        with pytest.raises(InvalidInputError):
            channels.cascade(coupled_impedance_channel(channels, rng), np.eye(4))


class TestCoupledChannel:
    def test_zero_coupling_reduces_to_cascade(self, channels, rng, topology):
        plain = ChannelSet(crandn(rng, 1, 1), crandn(rng, 1, 6), crandn(rng, 6, 1))
        coupled = ChannelSet(
            plain.h_rt, plain.h_ri, plain.h_it, coupling=NetworkMatrix(np.zeros((6, 6)), NetworkKind.SCATTERING)
        )
        spec = topology.random_scattering(ConstraintFamily.SYMMETRIC_UNITARY, 6, rng)
        np.testing.assert_array_equal(channels.coupled_channel(coupled, spec), channels.cascade(plain, spec))

    def test_impedance_scattering_admittance_forms_agree(self, channels, network, rng):
        for _ in range(50):
            ch = coupled_impedance_channel(channels, rng)
            x = rng.standard_normal((4, 4)) * 30
            z_i = NetworkMatrix(1j * (x + x.T), NetworkKind.IMPEDANCE)
            theta = ScatteringSpec(network.scattering(z_i), ConstraintFamily.SYMMETRIC_UNITARY)
            y_i = network.convert(z_i, NetworkKind.ADMITTANCE)

            h_z = channels.coupled_channel(ch, z_i)
            h_s = channels.coupled_channel(ch, theta)
            h_y = channels.coupled_channel(ch, y_i)
            assert relative_residual(h_s - h_z, h_z) < 1e-9
            assert relative_residual(h_y - h_z, h_z) < 1e-9

    def test_block_maps_round_trip(self, channels, rng):
        ch = coupled_impedance_channel(channels, rng)
        z_blocks = channels.blocks(ch, NetworkKind.IMPEDANCE)
        s_blocks = channels.blocks(ch, NetworkKind.SCATTERING)
        back = channels._to_impedance(s_blocks)
        for name in ("rt", "ri", "it", "ii"):
            np.testing.assert_allclose(getattr(back, name), getattr(z_blocks, name), rtol=1e-9, atol=1e-9)

    def test_requires_coupling(self, channels, rng):
        ch = ChannelSet(np.zeros((1, 1)), crandn(rng, 1, 2), crandn(rng, 2, 1))
        with pytest.raises(InvalidInputError):
            channels.coupled_channel(ch, np.eye(2))


class TestCoupling:
    def test_isotropic_is_symmetric(self, channels):
        z = channels.isotropic_coupling(5, WAVELENGTH / 2, WAVELENGTH)
        np.testing.assert_allclose(z.values, z.values.T)
        np.testing.assert_allclose(np.diag(z.values), np.full(5, 50.0))

    def test_positions(self):
        positions = linear_array_positions(3, 0.5)
        np.testing.assert_allclose(positions, [[0, 0, 0], [0.5, 0, 0], [1.0, 0, 0]])

    def test_dipole_matrix(self, channels):
        positions = linear_array_positions(4, WAVELENGTH / 4)
        z = channels.dipole_coupling(positions, WAVELENGTH / 100, WAVELENGTH / 2, WAVELENGTH)
        assert z.kind == NetworkKind.IMPEDANCE
        np.testing.assert_allclose(z.values, z.values.T)
        np.testing.assert_allclose(np.diag(z.values), np.full(4, z.values[0, 0]))
        # Radiation resistance of a thin half-wave dipole is close to 73 ohms
        assert z.values[0, 0].real == pytest.approx(73.0, rel=0.05)
        assert abs(z.values[0, 1]) < abs(z.values[0, 0])

    def test_dipole_geometry_errors(self, channels):
        overlapping = np.zeros((2, 3))
        with pytest.raises(InvalidGeometryError):
            channels.dipole_coupling(overlapping, 0.001, WAVELENGTH / 2, WAVELENGTH)
        with pytest.raises(InvalidGeometryError):
            channels.dipole_coupling(linear_array_positions(2, 0.1), 0.001, WAVELENGTH, WAVELENGTH)
        with pytest.raises(InvalidGeometryError):
            channels.isotropic_coupling(3, 0.0, WAVELENGTH)

    def test_dipole_quadrature_orders_agree(self):
        positions = linear_array_positions(3, WAVELENGTH / 2)
        service = ChannelService(quadrature_order=32, quadrature_rtol=1e-6)
        coarse = service.dipole_coupling(positions, WAVELENGTH / 100, WAVELENGTH / 2, WAVELENGTH, order=32)
        fine = service.dipole_coupling(positions, WAVELENGTH / 100, WAVELENGTH / 2, WAVELENGTH, order=64)
        np.testing.assert_allclose(coarse.values, fine.values, rtol=1e-6)

    def test_dipole_quadrature_not_converged(self):
        service = ChannelService(quadrature_rtol=1e-12)
        positions = linear_array_positions(2, WAVELENGTH / 2)
        with pytest.raises(QuadratureNotConvergedError):
            service.dipole_coupling(positions, WAVELENGTH / 100, WAVELENGTH / 2, WAVELENGTH, order=1)


class TestChannelSet:
    def test_json_round_trip(self, tmp_path, rng):
        ch = ChannelSet(crandn(rng, 1, 1), crandn(rng, 1, 3), crandn(rng, 3))
        path = tmp_path / "channel.json"
        ch.save(path)
        back = ChannelSet.load(path)
        np.testing.assert_array_equal(back.h_it, ch.h_it)
        assert back.h_it.shape == (3, 1)
        assert back.coupling is None

    def test_dimension_mismatch(self, rng):
        with pytest.raises(InvalidInputError):
            ChannelSet(np.zeros((1, 1)), crandn(rng, 1, 3), crandn(rng, 4, 1))
