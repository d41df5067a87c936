"""
Tests for permeability tensors, wells and the transform chain.
"""

import unittest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import numpy as np
import pytest

from ds_well.tensor_geometry import (
    E3,
    NotPositiveDefiniteError,
    PermeabilityTensor,
    WellDescription,
    build_transform,
    kernel_ellipse_axes,
    rodrigues_align,
)
from ds_well.utils.rotations import permeability_from_angles, well_direction_from_angles


def random_spd(rng, scale=1e-12):
    a = rng.normal(size=(3, 3))
    return (a @ a.T + 0.5 * np.eye(3)) * scale


def random_unit(rng):
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def slanted_chain(alpha=10.0):
    permeability = PermeabilityTensor.from_matrix(permeability_from_angles(alpha, -20.0, -20.0))
    well = WellDescription(np.zeros(3), well_direction_from_angles(20.0, 20.0), 0.1, 1e6)
    return build_transform(permeability, well)


def test_stretch_is_isochoric():
    rng = np.random.default_rng(42)
    for _ in range(20):
        permeability = PermeabilityTensor.from_matrix(random_spd(rng))
        well = WellDescription(rng.normal(size=3), random_unit(rng), 0.1, 1e6)
        chain = build_transform(permeability, well)
        assert np.linalg.det(chain.stretch) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(chain.stretch @ chain.stretch_inverse, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(chain.matrix @ chain.matrix_inverse, np.eye(3), atol=1e-10)


def test_well_cylinder_maps_to_canonical_ellipse():
    rng = np.random.default_rng(7)
    for _ in range(10):
        permeability = PermeabilityTensor.from_matrix(random_spd(rng))
        direction = random_unit(rng)
        well = WellDescription(rng.normal(size=3) * 10, direction, 0.1, 1e6)
        chain = build_transform(permeability, well)
        u1 = np.cross(direction, [1.0, 0.0, 0.0])
        if np.linalg.norm(u1) < 1e-3:
            u1 = np.cross(direction, [0.0, 1.0, 0.0])
        u1 /= np.linalg.norm(u1)
        u2 = np.cross(direction, u1)
        theta = rng.uniform(0, 2 * np.pi, 50)
        t = rng.uniform(-5, 5, 50)
        x = (well.point + well.radius * (np.cos(theta)[:, None] * u1 + np.sin(theta)[:, None] * u2)
             + t[:, None] * direction)
        v = chain.forward_map(x)
        np.testing.assert_allclose((v[:, 0] / chain.major) ** 2 + (v[:, 1] / chain.minor) ** 2,
                                   1.0, atol=1e-9)
        assert chain.major >= chain.minor


def test_rodrigues_identities():
    rng = np.random.default_rng(3)
    for psi in [random_unit(rng) for _ in range(10)] + [E3, -E3]:
        rotation = rodrigues_align(psi)
        np.testing.assert_allclose(rotation @ E3, psi, atol=1e-12)
        np.testing.assert_allclose(rotation, rotation.T, atol=1e-12)
        np.testing.assert_allclose(rotation @ rotation, np.eye(3), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0, abs=1e-12)


def test_zeta_times_axial_stretch_is_one():
    rng = np.random.default_rng(11)
    for _ in range(10):
        permeability = PermeabilityTensor.from_matrix(random_spd(rng))
        chain = build_transform(permeability, WellDescription(np.zeros(3), random_unit(rng), 0.2, 1e6))
        assert chain.zeta * chain.axial_stretch == pytest.approx(1.0, rel=1e-10)


def test_forward_inverse_round_trip():
    chain = slanted_chain(50.0)
    x = np.random.default_rng(5).uniform(-100, 100, size=(100, 3))
    np.testing.assert_allclose(chain.inverse_map(chain.forward_map(x)), x, atol=1e-9)


def test_well_axis_maps_to_v3_axis():
    chain = slanted_chain(10.0)
    v = chain.forward_map(chain.well.at(np.linspace(-10, 10, 5)))
    np.testing.assert_allclose(v[:, :2], 0.0, atol=1e-12)
    np.testing.assert_allclose(np.diff(v[:, 2]), 5.0 * chain.axial_stretch, rtol=1e-12)


def test_ellipse_frame_orientation():
    chain = slanted_chain(100.0)
    nu1, nu2 = chain.nu
    assert np.cross(nu1, nu2) @ (chain.rotation @ E3) > 0
    assert np.linalg.det(chain.ellipse_rotation) == pytest.approx(1.0, abs=1e-12)
    assert chain.focal == pytest.approx(np.sqrt(chain.major ** 2 - chain.minor ** 2), rel=1e-12)


def test_plane_normal_spans_ellipse_plane():
    rng = np.random.default_rng(13)
    for alpha in (1.0, 10.0, 100.0):
        chain = slanted_chain(alpha)
        normal = chain.plane_normal
        assert np.linalg.norm(normal) == pytest.approx(1.0, abs=1e-12)
        d = rng.normal(size=(30, 3))
        d -= np.outer(d @ normal, normal)
        v = chain.forward_map(chain.well.point + d)
        np.testing.assert_allclose(v[:, 2], 0.0, atol=1e-10)


class TestIsotropicReduction(unittest.TestCase):
    """An isotropic tensor leaves the well bore circular."""

    def setUp(self):
        self.permeability = PermeabilityTensor.isotropic(2e-12)
        direction = well_direction_from_angles(20.0, 35.0)
        self.chain = build_transform(
            self.permeability, WellDescription(np.ones(3), direction, 0.1, 1e6)
        )

    def test_circular_bore(self):
        self.assertAlmostEqual(self.chain.major, 0.1, places=14)
        self.assertAlmostEqual(self.chain.minor, 0.1, places=14)
        self.assertEqual(self.chain.focal, 0.0)
        self.assertAlmostEqual(self.chain.zeta, 1.0, places=12)

    def test_isotropic_permeability(self):
        self.assertAlmostEqual(self.permeability.isotropic_permeability / 2e-12, 1.0, places=12)
        np.testing.assert_allclose(self.chain.stretch, np.eye(3), atol=1e-12)

    def test_distances_are_preserved(self):
        x = np.array([[3.0, -2.0, 7.0], [-5.0, 4.0, 1.0]])
        v = self.chain.forward_map(x)
        self.assertAlmostEqual(np.linalg.norm(v[0] - v[1]), np.linalg.norm(x[0] - x[1]), places=10)


class TestValidation(unittest.TestCase):
    """Invalid tensors and wells are rejected."""

    def test_not_positive_definite(self):
        with self.assertRaises(NotPositiveDefiniteError):
            PermeabilityTensor.from_matrix(np.diag([1.0, -1.0, 1.0]))

    def test_not_symmetric(self):
        matrix = np.eye(3)
        matrix[0, 1] = 0.1
        with self.assertRaises(ValueError):
            PermeabilityTensor.from_matrix(matrix)

    def test_well_direction_must_be_unit(self):
        with self.assertRaises(ValueError):
            WellDescription(np.zeros(3), np.array([0.0, 0.0, 2.0]), 0.1, 1e6)
        well = WellDescription.along([0, 0, 0], [0, 0, 2], 0.1, 1e6)
        np.testing.assert_allclose(well.direction, E3)

    def test_finite_well(self):
        well = WellDescription.between([-20, -50, 25], [20, 50, 75], 0.1, 1e6, None)
        self.assertAlmostEqual(well.extent[1], np.sqrt(40 ** 2 + 100 ** 2 + 50 ** 2), places=10)
        np.testing.assert_allclose(well.at(well.extent[1]), [20, 50, 75], atol=1e-12)
        with self.assertRaises(ValueError):
            WellDescription.between([1, 2, 3], [1, 2, 3], 0.1, 1e6)


def test_comparison_kernel_ellipse_axes():
    permeability = PermeabilityTensor.from_matrix(permeability_from_angles(0.1, 0.0, 90.0))
    well = WellDescription.between([-20, -50, 25], [20, 50, 75], 0.1, 1e6, None)
    chain = build_transform(permeability, well)
    major, minor = kernel_ellipse_axes(chain, 100 * 0.1)
    assert major == pytest.approx(16.12, abs=0.01)
    assert minor == pytest.approx(12.54, abs=0.01)
    major, minor = kernel_ellipse_axes(chain, 100 * 0.1 / 8)
    assert major == pytest.approx(2.01, abs=0.02)
    assert minor == pytest.approx(1.57, abs=0.02)


def run():
    test_stretch_is_isochoric()
    test_well_cylinder_maps_to_canonical_ellipse()
    test_rodrigues_identities()
    test_zeta_times_axial_stretch_is_one()
    test_forward_inverse_round_trip()
    test_well_axis_maps_to_v3_axis()
    test_ellipse_frame_orientation()
    test_plane_normal_spans_ellipse_plane()
    test_comparison_kernel_ellipse_axes()
    unittest.main(module=__name__, exit=False)


if __name__ == "__main__":
    run()
