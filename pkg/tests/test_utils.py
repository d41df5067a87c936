"""
Tests for the error norms and rotation utilities.
"""

import unittest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import numpy as np

from ds_well.utils import norms, rotations


class TestNorms(unittest.TestCase):
    """Tests for the discrete error norms."""

    def test_pressure_error(self):
        exact = np.array([1.0, 2.0, 3.0])
        discrete = np.array([1.0, 2.0, 5.0])
        volumes = np.array([1.0, 1.0, 2.0])
        # sqrt(2 * 4 / 4) / 10
        self.assertAlmostEqual(norms.relative_pressure_error(exact, discrete, volumes, 10.0),
                               np.sqrt(2.0) / 10.0, places=14)

    def test_source_error(self):
        rates = np.array([0.9, 1.1, 1.0])
        lengths = np.array([2.0, 2.0, 4.0])
        self.assertAlmostEqual(norms.relative_source_error(1.0, rates, lengths),
                               np.sqrt(0.04 / 8.0), places=14)
        self.assertEqual(norms.relative_source_error(2.0, np.full(3, 2.0), lengths), 0.0)

    def test_empty_sets(self):
        with self.assertRaises(ValueError):
            norms.relative_pressure_error([], [], [], 1.0)
        with self.assertRaises(ValueError):
            norms.relative_source_error(1.0, [], [])
        with self.assertRaises(ValueError):
            norms.relative_total_error(1.0, 0.0)

    def test_total_error(self):
        self.assertAlmostEqual(norms.relative_total_error(0.98, -1.0), 1.98)
        self.assertAlmostEqual(norms.relative_total_error(1.02, 1.0), 0.02)

    def test_convergence_rates(self):
        sizes = [4.0, 2.0, 1.0]
        rates = norms.convergence_rates(sizes, [16.0, 4.0, 1.0])
        self.assertIsNone(rates[0])
        self.assertAlmostEqual(rates[1], 2.0)
        self.assertAlmostEqual(rates[2], 2.0)
        self.assertEqual(norms.convergence_rates(sizes, [1.0, 0.0, 1.0])[1:], [None, None])
        with self.assertRaises(ValueError):
            norms.convergence_rates(sizes, [1.0])


class TestRotations(unittest.TestCase):
    """Tests for the angle parametrisations."""

    def test_rotations_are_orthogonal(self):
        for rotation in (rotations.rotation_about_e1(37.0), rotations.rotation_about_e2(-64.0)):
            np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-15)
            self.assertAlmostEqual(np.linalg.det(rotation), 1.0, places=14)

    def test_unrotated_tensor(self):
        matrix = rotations.permeability_from_angles(10.0, 0.0, 0.0)
        np.testing.assert_allclose(matrix, np.diag([1.0, 1.0, 10.0]) * 1e-12)

    def test_rotated_tensor(self):
        matrix = rotations.permeability_from_angles(50.0, -20.0, -20.0)
        np.testing.assert_array_equal(matrix, matrix.T)
        np.testing.assert_allclose(np.linalg.eigvalsh(matrix), np.array([1.0, 1.0, 50.0]) * 1e-12,
                                   rtol=1e-12)
        axis = rotations.rotation_about_e1(-20.0) @ rotations.rotation_about_e2(-20.0) @ [0, 0, 1]
        np.testing.assert_allclose(matrix @ axis, 50e-12 * axis, rtol=1e-12)

    def test_invalid_alpha(self):
        with self.assertRaises(ValueError):
            rotations.permeability_from_angles(0.0, 0.0, 0.0)

    def test_well_direction(self):
        np.testing.assert_allclose(rotations.well_direction_from_angles(0.0, 0.0), [0, 0, 1])
        np.testing.assert_allclose(rotations.well_direction_from_angles(0.0, 90.0), [1, 0, 0],
                                   atol=1e-15)
        np.testing.assert_allclose(rotations.well_direction_from_angles(90.0, 0.0), [0, -1, 0],
                                   atol=1e-15)

    def test_angle_grid(self):
        self.assertEqual(rotations.angle_grid(0.0, 90.0, 10.0), [10.0 * i for i in range(10)])
        self.assertEqual(rotations.angle_grid(0.0, 0.0, 10.0), [0.0])
        with self.assertRaises(ValueError):
            rotations.angle_grid(0.0, 90.0, 0.0)


def run():
    unittest.main(module=__name__, exit=False)


if __name__ == "__main__":
    run()
