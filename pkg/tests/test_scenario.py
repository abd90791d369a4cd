"""Dipole geometry, the mutual-impedance integral, and scenario assembly."""

from __future__ import annotations

import json

import numpy as np
import pytest

from bdris.errors import ConfigError, InvalidGeometry, QuadratureNotConverged
from bdris.scenario import (DIPOLE_LENGTH_FRACTION, DIPOLE_RADIUS_FRACTION,
                            DerivedConstants, Dipole, ScenarioConfig,
                            build_scenario, config_hash, decouple,
                            default_grid_layout, load_or_build,
                            mutual_impedance, place_ris_grid, terms_from_dict,
                            terms_to_dict)

from conftest import paper_config, paper_terms

FREQ = 28e9

# Self impedance of the reference dipole (length lambda/32, radius lambda/500)
# at 28 GHz, converged under quadrature refinement.  Regression anchor: the
# real part matches the analytic short-dipole radiation resistance
# 20 pi^2 (l / lambda)^2 = 0.1928 ohm to three digits.
SELF_IMPEDANCE_28GHZ = 0.1930121988074433 - 1510.229246134239j


@pytest.fixture(scope="module")
def constants():
    return DerivedConstants.from_frequency(FREQ)


@pytest.fixture(scope="module")
def reference_dipole(constants):
    lam = constants.wavelength
    return Dipole((0.0, 0.0, 0.0), lam * DIPOLE_LENGTH_FRACTION, lam * DIPOLE_RADIUS_FRACTION)


def dipole_at(constants, y, z=0.0, x=0.0):
    lam = constants.wavelength
    return Dipole((x, y, z), lam * DIPOLE_LENGTH_FRACTION, lam * DIPOLE_RADIUS_FRACTION)


class TestDerivedConstants:
    def test_wavelength_frequency_product(self, constants):
        assert constants.wavelength * FREQ == pytest.approx(299_792_458.0, rel=1e-9)

    def test_wavenumber(self, constants):
        assert constants.wavenumber == pytest.approx(2 * np.pi / constants.wavelength)

    def test_free_space_impedance(self, constants):
        assert constants.eta0 == 377.0


class TestDipole:
    def test_rejects_degenerate_wire(self):
        with pytest.raises(InvalidGeometry):
            Dipole((0, 0, 0), length=0.0, radius=1e-5)
        with pytest.raises(InvalidGeometry):
            Dipole((0, 0, 0), length=1e-3, radius=2e-3)


class TestMutualImpedance:
    def test_reciprocity(self, constants):
        a = dipole_at(constants, 0.0)
        b = dipole_at(constants, constants.wavelength / 4, z=constants.wavelength / 8)
        z_ab = mutual_impedance(a, b, constants)
        z_ba = mutual_impedance(b, a, constants)
        assert abs(z_ab - z_ba) / abs(z_ab) < 1e-10

    def test_self_impedance_regression(self, constants, reference_dipole):
        z = mutual_impedance(reference_dipole, reference_dipole, constants)
        assert z.real > 0
        assert z == pytest.approx(SELF_IMPEDANCE_28GHZ, rel=1e-9)

    def test_self_impedance_stable_under_refinement(self, constants, reference_dipole):
        z_default = mutual_impedance(reference_dipole, reference_dipole, constants,
                                     check=False)
        z_double = mutual_impedance(reference_dipole, reference_dipole, constants,
                                    96, check=False)
        assert abs(z_double - z_default) / abs(z_double) < 1e-6

    @pytest.mark.parametrize("d_fraction", [0.125, 0.25, 0.5])
    def test_coupling_decays_with_distance(self, constants, d_fraction):
        lam = constants.wavelength
        a = dipole_at(constants, 0.0)
        near = mutual_impedance(a, dipole_at(constants, d_fraction * lam), constants)
        far = mutual_impedance(a, dipole_at(constants, 2 * d_fraction * lam), constants)
        assert abs(far) < abs(near)

    def test_overlapping_distinct_dipoles_rejected(self, constants):
        a = dipole_at(constants, 0.0)
        b = dipole_at(constants, a.radius * 0.5)
        with pytest.raises(InvalidGeometry):
            mutual_impedance(a, b, constants)

    def test_unconverged_quadrature_raises(self, constants, reference_dipole):
        # Order 4 cannot resolve the self-term near-field ridge.
        with pytest.raises(QuadratureNotConverged):
            mutual_impedance(reference_dipole, reference_dipole, constants, 4)


class TestQuadratureOracle:
    """The split-panel rule against scipy's adaptive quadrature (independent path)."""

    @pytest.mark.parametrize("offset,self_pair", [((0.0, 0.0), True),
                                                  ((0.0, 0.125), False),
                                                  ((0.125, 0.0), False)])
    def test_matches_adaptive_quadrature(self, constants, offset, self_pair):
        from scipy import integrate

        lam, k0, eta0 = constants.wavelength, constants.wavenumber, constants.eta0
        length = lam * DIPOLE_LENGTH_FRACTION
        radius = lam * DIPOLE_RADIUS_FRACTION
        a = Dipole((0.0, 0.0, 0.0), length, radius)
        b = a if self_pair else Dipole((0.0, offset[1] * lam, offset[0] * lam), length, radius)
        d_xy = radius if self_pair else float(np.hypot(0.0, offset[1] * lam))
        az, bz = a.center[2], b.center[2]

        def kernel(bz_p, az_p, part):
            dz = az_p - bz_p
            d = np.sqrt(d_xy * d_xy + dz * dz)
            bracket = (dz * dz / (d * d)) * (3.0 / (d * d) + 3j * k0 / d - k0 * k0) \
                - (1j * k0 + 1.0 / d) / d + k0 * k0
            cur = (np.sin(k0 * (0.5 * length - abs(bz_p - bz)))
                   * np.sin(k0 * (0.5 * length - abs(az_p - az)))
                   / np.sin(0.5 * k0 * length) ** 2)
            value = (1j * eta0 / (4 * np.pi * k0)) * bracket * np.exp(-1j * k0 * d) / d * cur
            return value.real if part == "re" else value.imag

        bounds = (az - length / 2, az + length / 2, bz - length / 2, bz + length / 2)
        reference = complex(
            integrate.dblquad(kernel, bounds[0], bounds[1], bounds[2], bounds[3],
                              args=("re",), epsabs=1e-12, epsrel=1e-9)[0],
            integrate.dblquad(kernel, bounds[0], bounds[1], bounds[2], bounds[3],
                              args=("im",), epsabs=1e-12, epsrel=1e-9)[0])
        mine = mutual_impedance(a, b, constants)
        assert abs(mine - reference) / abs(reference) < 1e-8


class TestGridPlacement:
    def test_single_element_at_origin(self, constants):
        lam = constants.wavelength
        grid = place_ris_grid(1, lam / 2, (1, 1), lam / 32, lam / 500)
        assert grid[0].center == (0.0, 0.0, 0.0)

    def test_two_by_two_centers(self, constants):
        lam = constants.wavelength
        grid = place_ris_grid(4, lam / 2, (2, 2), lam / 32, lam / 500)
        centers = {d.center for d in grid}
        q = lam / 4
        assert centers == {(0.0, -q, -q), (0.0, q, -q), (0.0, -q, q), (0.0, q, q)}

    def test_row_major_ordering_y_fastest(self, constants):
        lam = constants.wavelength
        grid = place_ris_grid(4, lam / 2, (2, 2), lam / 32, lam / 500)
        assert grid[0].center[1] < grid[1].center[1]  # y advances first
        assert grid[0].center[2] == grid[1].center[2]
        assert grid[0].center[2] < grid[2].center[2]  # z advances between rows

    def test_minimum_pairwise_distance(self, constants):
        lam = constants.wavelength
        grid = place_ris_grid(16, lam / 2, (4, 4), lam / 32, lam / 500)
        centers = np.array([d.center for d in grid])
        dists = np.linalg.norm(centers[:, None, :] - centers[None, :, :], axis=-1)
        dists[np.diag_indices(16)] = np.inf
        assert dists.min() == pytest.approx(lam / 2)

    def test_spacing_below_wire_diameter_rejected(self, constants):
        lam = constants.wavelength
        with pytest.raises(InvalidGeometry):
            place_ris_grid(2, lam / 500, (1, 2), lam / 32, lam / 500)

    def test_default_layout_square_or_near_square(self):
        assert default_grid_layout(16) == (4, 4)
        assert default_grid_layout(8) == (2, 4)
        assert default_grid_layout(9) == (3, 3)
        assert default_grid_layout(7) == (1, 7)


class TestBuildScenario:
    def test_single_element_surface(self, constants):
        terms = paper_terms(1, 0.5)
        assert terms.z_ii.shape == (1, 1)
        assert terms.z_ii[0, 0] == pytest.approx(SELF_IMPEDANCE_28GHZ, rel=1e-9)
        assert terms.z_rt == 0.0

    def test_paper_scenario_surface_properties(self, terms_m16):
        z_ii = terms_m16.z_ii
        assert np.array_equal(z_ii, z_ii.T)  # mirrored construction is exact
        assert np.all(np.diag(z_ii).real > 0)

    def test_decouple_preserves_diagonal_bits(self, terms_m16):
        bare = decouple(terms_m16)
        assert np.array_equal(np.diag(bare.z_ii), np.diag(terms_m16.z_ii))
        assert np.all(bare.z_ii[~np.eye(16, dtype=bool)] == 0)

    def test_decouple_identity_on_diagonal_input(self, terms_m16):
        bare = decouple(terms_m16)
        again = decouple(bare)
        assert np.array_equal(bare.z_ii, again.z_ii)
        assert np.array_equal(bare.z_ri, again.z_ri)


class TestScenarioConfig:
    def test_from_dict_defaults(self):
        config = ScenarioConfig.from_dict({
            "frequency_ghz": 28, "tx_xyz": [5, -5, 3], "rx_xyz": [5, 5, 1],
            "m": 16, "spacing_over_lambda": 0.25,
        })
        assert config.m == 16
        assert config.grid == (4, 4)
        assert config.spacing_over_lambda == pytest.approx(0.25)
        assert config.z_rt == 0.0

    def test_missing_key_named(self):
        with pytest.raises(ConfigError, match="spacing_over_lambda"):
            ScenarioConfig.from_dict({
                "frequency_ghz": 28, "tx_xyz": [5, -5, 3], "rx_xyz": [5, 5, 1], "m": 16,
            })

    def test_unknown_key_named(self):
        with pytest.raises(ConfigError, match="spacing"):
            ScenarioConfig.from_dict({
                "frequency_ghz": 28, "tx_xyz": [5, -5, 3], "rx_xyz": [5, 5, 1],
                "m": 16, "spacing_over_lambda": 0.25, "spacing": 1.0,
            })

    def test_group_size_must_divide(self):
        with pytest.raises(ConfigError):
            paper_config(16, 0.25, group_size=3)

    def test_file_parse_error_has_location(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ not json")
        with pytest.raises(ConfigError, match="line 1"):
            ScenarioConfig.from_file(path)


class TestSerializationAndCache:
    def test_terms_json_round_trip(self, terms_m16):
        data = json.loads(json.dumps(terms_to_dict(terms_m16)))
        back = terms_from_dict(data)
        assert np.array_equal(back.z_ii, terms_m16.z_ii)
        assert np.array_equal(back.z_ri, terms_m16.z_ri)
        assert np.array_equal(back.z_it, terms_m16.z_it)
        assert back.z_rt == terms_m16.z_rt

    def test_cache_round_trip_is_exact(self, tmp_path):
        config = paper_config(2, 0.5)
        fresh = load_or_build(config, cache_dir=tmp_path)
        cached = load_or_build(config, cache_dir=tmp_path)
        assert np.array_equal(fresh.z_ii, cached.z_ii)
        assert np.array_equal(fresh.z_ri, cached.z_ri)

    def test_hash_tracks_physical_fields(self):
        base = paper_config(4, 0.25)
        assert config_hash(base) == config_hash(paper_config(4, 0.25))
        assert config_hash(base) != config_hash(paper_config(4, 0.5))
        assert config_hash(base) != config_hash(paper_config(9, 0.25))
