"""Network-parameter algebra: reflection maps, conversions, channel models."""

from __future__ import annotations

import numpy as np
import pytest

from bdris.architecture import TunableImpedance, make_architecture
from bdris.errors import (AssumptionViolation, SingularMatrixError,
                          ThetaNearIdentity)
from bdris.network import (ChannelTerms, ImpedanceParams, ScatteringParams,
                           channel_gain, channel_general, channel_impedance,
                           channel_scattering, impedance_from_theta,
                           reflection_matrix, s_blocks_from_z_blocks, s_from_z,
                           theta_from_impedance)

Z0 = 50.0


def random_tunable(arch, rng, scale=Z0):
    """Random valid (symmetric purely imaginary block-diagonal) tuning."""
    z = TunableImpedance.zeros(arch)
    z.packed[:] = scale * rng.standard_normal(z.packed.shape)
    return z


def random_unilateral_z(n, m, k, rng, z0=Z0):
    """Random impedance blocks satisfying the matched/unilateral structure."""
    z_ii = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    z_ii = 0.5 * (z_ii + z_ii.T) * z0
    z_ii += np.diag(np.full(m, 2.0 * z0))  # keep the real diagonal solidly positive
    blocks = dict(
        tt=z0 * np.eye(n), ti=np.zeros((n, m)), tr=np.zeros((n, k)),
        it=z0 * (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))),
        ii=z_ii, ir=np.zeros((m, k)),
        rt=z0 * (rng.standard_normal((k, n)) + 1j * rng.standard_normal((k, n))),
        ri=z0 * (rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))),
        rr=z0 * np.eye(k),
    )
    return ImpedanceParams(**blocks, z0=z0)


class TestReflectionMatrix:
    def test_matched_termination_gives_zero(self):
        assert np.allclose(reflection_matrix(Z0 * np.eye(3), Z0), 0.0)

    def test_scalar_reactive_termination_has_unit_modulus(self):
        gamma = reflection_matrix(np.array([[1j * Z0]]), Z0)
        assert gamma.shape == (1, 1)
        assert gamma[0, 0] == pytest.approx(1j)

    def test_imaginary_symmetric_termination_is_unitary_and_symmetric(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((4, 4))
        z_term = 1j * Z0 * (x + x.T)
        gamma = reflection_matrix(z_term, Z0)
        assert np.linalg.norm(gamma.conj().T @ gamma - np.eye(4)) < 1e-10
        assert np.linalg.norm(gamma - gamma.T) < 1e-12

    def test_singular_termination_raises(self):
        with pytest.raises(SingularMatrixError):
            reflection_matrix(-Z0 * np.eye(2), Z0)


class TestThetaMaps:
    def test_zero_impedance_reflects_minus_identity(self):
        arch = make_architecture(3, 3)
        theta = theta_from_impedance(TunableImpedance.zeros(arch), Z0)
        assert np.array_equal(theta, -np.eye(3))

    def test_scalar_matches_reflection(self):
        arch = make_architecture(1, 1)
        z = TunableImpedance.from_diagonal([Z0], arch)
        assert theta_from_impedance(z, Z0)[0, 0] == pytest.approx(1j)

    def test_group_connected_structure(self):
        arch = make_architecture(4, 2)
        rng = np.random.default_rng(3)
        z = random_tunable(arch, rng)
        theta = theta_from_impedance(z, Z0)
        assert np.linalg.norm(theta.conj().T @ theta - np.eye(4)) < 1e-10
        assert np.linalg.norm(theta - theta.T) < 1e-12
        assert np.all(theta[:2, 2:] == 0)
        assert np.all(theta[2:, :2] == 0)

    def test_impedance_from_theta_inverts(self):
        assert np.allclose(impedance_from_theta(-np.eye(3), Z0).matrix(), 0.0)
        z = impedance_from_theta(np.array([[1j]]), Z0)
        assert z.matrix()[0, 0] == pytest.approx(1j * Z0)

    def test_round_trip(self):
        arch = make_architecture(4, 1)
        rng = np.random.default_rng(11)
        z = random_tunable(arch, rng)
        theta = theta_from_impedance(z, Z0)
        back = impedance_from_theta(theta, Z0, arch)
        residual = np.max(np.abs(theta_from_impedance(back, Z0) - theta))
        assert residual < 1e-9

    def test_near_identity_raises(self):
        with pytest.raises(ThetaNearIdentity):
            impedance_from_theta(np.eye(2) * (1.0 - 1e-9), Z0)


class TestSFromZ:
    def test_matched_network_scatters_nothing(self):
        z = ImpedanceParams.from_full(Z0 * np.eye(4), 1, 2, 1, Z0)
        s = s_from_z(z)
        assert np.allclose(s.assemble(), 0.0)

    def test_one_port(self):
        z = ImpedanceParams.from_full(np.array([[3.0 * Z0]]), 0, 1, 0, Z0)
        s = s_from_z(z)
        assert s.ii[0, 0] == pytest.approx(0.5)

    def test_reciprocity_preserved(self):
        rng = np.random.default_rng(5)
        full = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        full = Z0 * (full + full.T) + 3 * Z0 * np.eye(6)
        z = ImpedanceParams.from_full(full, 2, 2, 2, Z0)
        s = s_from_z(z).assemble()
        assert np.max(np.abs(s - s.T)) < 1e-10


class TestSBlocksFromZBlocks:
    def test_identity_surface_block(self):
        rng = np.random.default_rng(2)
        n, m, k = 1, 3, 1
        z = random_unilateral_z(n, m, k, rng)
        z.ii = Z0 * np.eye(m)
        s = s_blocks_from_z_blocks(z)
        assert np.allclose(s.ii, 0.0)
        assert np.allclose(s.ri, z.ri / (2 * Z0))
        assert np.allclose(s.it, z.it / (2 * Z0))
        assert np.allclose(s.rt, z.rt / (2 * Z0) - z.ri @ z.it / (4 * Z0 ** 2))

    def test_matches_full_conversion(self):
        rng = np.random.default_rng(9)
        z = random_unilateral_z(1, 4, 1, rng)
        s_fast = s_blocks_from_z_blocks(z)
        s_full = s_from_z(z)
        for name in ("ri", "ii", "it", "rt"):
            num = np.max(np.abs(getattr(s_fast, name) - getattr(s_full, name)))
            den = max(np.max(np.abs(getattr(s_full, name))), 1e-300)
            assert num / den < 1e-10, name
        for name in ("tt", "ti", "tr", "ir", "rr"):
            assert np.max(np.abs(getattr(s_full, name))) < 1e-12, name

    def test_no_surface_to_receiver_path(self):
        rng = np.random.default_rng(4)
        z = random_unilateral_z(1, 2, 1, rng)
        z.ri = np.zeros((1, 2))
        s = s_blocks_from_z_blocks(z)
        assert np.allclose(s.ri, 0.0)
        assert np.allclose(s.rt, z.rt / (2 * Z0))

    def test_violated_assumption_raises(self):
        rng = np.random.default_rng(6)
        z = random_unilateral_z(1, 2, 1, rng)
        z.ti = np.full((1, 2), 0.5)
        with pytest.raises(AssumptionViolation):
            s_blocks_from_z_blocks(z)


def _scattering_zeros(n, m, k, s_it, s_ii, s_rt, s_ri, z0=Z0):
    zeros = np.zeros
    return ScatteringParams(zeros((n, n)), zeros((n, m)), zeros((n, k)),
                            s_it, s_ii, zeros((m, k)),
                            s_rt, s_ri, zeros((k, k)), z0)


class TestChannelModels:
    def test_general_with_zero_scattering(self):
        s = ScatteringParams.from_full(np.zeros((4, 4)), 1, 2, 1, Z0)
        rng = np.random.default_rng(0)
        gamma_t = 0.3 * np.eye(1)
        gamma_r = -0.2 * np.eye(1)
        theta = theta_from_impedance(random_tunable(make_architecture(2, 1), rng), Z0)
        h = channel_general(s, gamma_t, theta, gamma_r)
        assert np.allclose(h, 0.0)

    def test_general_reduces_to_scattering_form(self, terms_m16):
        rng = np.random.default_rng(1)
        z = random_unilateral_z(2, 4, 3, rng)
        s = s_blocks_from_z_blocks(z)
        theta = theta_from_impedance(random_tunable(make_architecture(4, 2), rng), Z0)
        h_gen = channel_general(s, np.zeros((2, 2)), theta, np.zeros((3, 3)))
        h_sc = channel_scattering(s, theta)
        assert np.max(np.abs(h_gen - h_sc)) / np.max(np.abs(h_sc)) < 1e-12

    def test_single_element_truncates_to_one_bounce(self):
        rng = np.random.default_rng(8)
        s_ri = rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1))
        s_it = rng.standard_normal((1, 1)) + 1j * rng.standard_normal((1, 1))
        theta = np.array([[np.exp(1j * 0.7)]])
        s = _scattering_zeros(1, 1, 1, s_it, np.zeros((1, 1)), np.zeros((1, 1)), s_ri)
        h = channel_general(s, np.zeros((1, 1)), theta, np.zeros((1, 1)))
        assert np.allclose(h, s_ri @ theta @ s_it)

    def test_scattering_theta_zero(self):
        rng = np.random.default_rng(10)
        z = random_unilateral_z(1, 3, 1, rng)
        s = s_blocks_from_z_blocks(z)
        assert np.allclose(channel_scattering(s, np.zeros((3, 3))), s.rt)

    def test_scattering_no_surface_self_coupling(self):
        rng = np.random.default_rng(12)
        s_ri = rng.standard_normal((1, 2)) + 1j * rng.standard_normal((1, 2))
        s_it = rng.standard_normal((2, 1)) + 1j * rng.standard_normal((2, 1))
        s_rt = rng.standard_normal((1, 1)) + 0j
        theta = theta_from_impedance(random_tunable(make_architecture(2, 1),
                                                    np.random.default_rng(3)), Z0)
        s = _scattering_zeros(1, 2, 1, s_it, np.zeros((2, 2)), s_rt, s_ri)
        h = channel_scattering(s, theta)
        assert np.allclose(h, s_rt + s_ri @ theta @ s_it)

    def test_impedance_no_surface_path(self):
        terms = ChannelTerms(z_rt=3 - 2j, z_ri=np.zeros(2),
                             z_ii=Z0 * np.eye(2), z_it=np.ones(2), z0=Z0)
        h = channel_impedance(terms, np.zeros((2, 2)))
        assert h[0, 0] == pytest.approx((3 - 2j) / (2 * Z0))

    def test_impedance_scalar_example(self):
        terms = ChannelTerms(z_rt=0.0, z_ri=[2 * Z0], z_ii=[[Z0]], z_it=[2 * Z0], z0=Z0)
        h = channel_impedance(terms, np.zeros((1, 1)))
        assert h[0, 0] == pytest.approx(-2.0)
        assert channel_gain(terms, np.zeros((1, 1))) == pytest.approx(16 * Z0 ** 2)

    def test_gain_without_surface(self):
        terms = ChannelTerms(z_rt=1.0, z_ri=np.zeros(2),
                             z_ii=Z0 * np.eye(2), z_it=np.ones(2), z0=Z0)
        assert channel_gain(terms, np.zeros((2, 2))) == pytest.approx(1.0)

    def test_gain_matches_impedance_channel(self, terms_m16):
        rng = np.random.default_rng(14)
        arch = make_architecture(16, 4)
        z_i = random_tunable(arch, rng, scale=200.0)
        h = channel_impedance(terms_m16, z_i)
        gain = channel_gain(terms_m16, z_i)
        assert gain == pytest.approx(abs(2 * Z0 * h[0, 0]) ** 2, rel=1e-12)

    def test_three_models_agree(self):
        rng = np.random.default_rng(15)
        for m, g in ((1, 1), (2, 1), (4, 2), (8, 8)):
            z = random_unilateral_z(1, m, 1, rng)
            arch = make_architecture(m, g)
            z_i = random_tunable(arch, rng, scale=120.0)
            theta = theta_from_impedance(z_i, Z0)
            s = s_blocks_from_z_blocks(z)
            h_gen = channel_general(s, np.zeros((1, 1)), theta, np.zeros((1, 1)))
            h_sc = channel_scattering(s, theta)
            h_z = channel_impedance(z, z_i)
            scale = np.max(np.abs(h_z))
            assert np.max(np.abs(h_gen - h_sc)) / scale < 1e-10
            assert np.max(np.abs(h_sc - h_z)) / scale < 1e-10


class TestCircuitSolveOracle:
    """All three channel models against a direct solve of the terminated circuit.

    The L-port equations V = Z I with a unit source behind Z0 at the
    transmitter port, the tunable network across the surface ports and a Z0
    load at the receiver give (Z + blkdiag(Z0, Z_I, Z0)) I = [1; 0; 0] and
    H = V_R / V_T, a derivation independent of every closed-form model.
    """

    @pytest.mark.parametrize("m,g", [(1, 1), (4, 2), (8, 1), (16, 4)])
    def test_models_match_terminated_circuit(self, m, g):
        from bdris.architecture import assemble_block_diagonal

        rng = np.random.default_rng(42 + m)
        z = random_unilateral_z(1, m, 1, rng)
        arch = make_architecture(m, g)
        z_i = random_tunable(arch, rng, scale=120.0)

        full = z.assemble()
        termination = assemble_block_diagonal(
            [Z0 * np.eye(1), z_i.matrix(), Z0 * np.eye(1)])
        rhs = np.zeros(full.shape[0], dtype=complex)
        rhs[0] = 1.0
        currents = np.linalg.solve(full + termination, rhs)
        voltages = full @ currents
        h_circuit = voltages[-1] / (1.0 - Z0 * currents[0])

        theta = theta_from_impedance(z_i, Z0)
        s = s_blocks_from_z_blocks(z)
        h_imp = channel_impedance(z, z_i)[0, 0]
        h_sc = channel_scattering(s, theta)[0, 0]
        h_gen = channel_general(s, np.zeros((1, 1)), theta, np.zeros((1, 1)))[0, 0]
        for h_model in (h_imp, h_sc, h_gen):
            assert abs(h_model - h_circuit) / abs(h_circuit) < 1e-12


class TestChannelTermsValidation:
    def test_asymmetric_surface_rejected(self):
        z_ii = np.array([[Z0, 1.0], [2.0, Z0]])
        with pytest.raises(AssumptionViolation):
            ChannelTerms(z_rt=0, z_ri=np.ones(2), z_ii=z_ii, z_it=np.ones(2), z0=Z0)

    def test_passive_diagonal_required(self):
        z_ii = np.array([[-1.0 + 0j, 0], [0, Z0]])
        with pytest.raises(AssumptionViolation):
            ChannelTerms(z_rt=0, z_ri=np.ones(2), z_ii=z_ii, z_it=np.ones(2), z0=Z0)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            ChannelTerms(z_rt=0, z_ri=[np.inf], z_ii=[[Z0]], z_it=[1.0], z0=Z0)
