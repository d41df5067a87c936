"""
Tests for structured meshes, boundary descriptions and well intersections.
"""

import unittest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import numpy as np
import pytest

from ds_well.mesh import (
    SIDES,
    Box,
    BoundarySpec,
    Dirichlet,
    Neumann,
    build_mesh,
    intersect_well,
    padded_mesh,
    side_axis,
)
from ds_well.tensor_geometry import WellDescription
from ds_well.utils.rotations import well_direction_from_angles


def unit_mesh(counts=(4, 3, 2)):
    return build_mesh(([0.0, 0.0, 0.0], [4.0, 3.0, 2.0]), counts)


def test_numbering_and_centers():
    mesh = unit_mesh()
    assert mesh.n_cells == 24
    np.testing.assert_allclose(mesh.spacing, [1.0, 1.0, 1.0])
    assert mesh.cell_index(1, 2, 1) == 1 + 4 * (2 + 3 * 1)
    i, j, k = mesh.cell_ijk(21)
    assert (int(i), int(j), int(k)) == (1, 2, 1)
    np.testing.assert_allclose(mesh.cell_centers[21], [1.5, 2.5, 1.5])
    assert mesh.h_max == pytest.approx(np.sqrt(3.0))


def test_locate_cells():
    mesh = unit_mesh()
    points = np.array([
        [0.5, 0.5, 0.5],
        [1.0, 0.5, 0.5],   # interior face: upper cell
        [4.0, 3.0, 2.0],   # upper corner: last cell
        [-0.1, 0.5, 0.5],
        [2.5, 3.5, 0.5],
    ])
    np.testing.assert_array_equal(mesh.locate_cells(points), [0, 1, 23, -1, -1])


def test_refine():
    mesh = unit_mesh()
    fine = mesh.refine()
    assert fine.counts == (8, 6, 4)
    assert fine.h_max == pytest.approx(mesh.h_max / 2)
    assert fine.bounds == mesh.bounds


def test_boundary_faces():
    mesh = unit_mesh()
    faces = mesh.boundary_faces()
    assert len(faces) == 2 * (3 * 2 + 4 * 2 + 4 * 3)
    assert faces.areas.sum() == pytest.approx(2 * (3 * 2 + 4 * 2 + 4 * 3))
    x_minus = faces.sides == SIDES.index("x-")
    np.testing.assert_allclose(faces.centroids[x_minus, 0], 0.0)
    np.testing.assert_array_equal(mesh.boundary_cells("z+"), np.arange(12, 24))


def test_side_axis():
    assert side_axis("x-") == (0, -1)
    assert side_axis("y+") == (1, 1)
    assert side_axis("z-") == (2, -1)
    with pytest.raises(ValueError):
        side_axis("w+")


def test_clip_line():
    box = Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    assert box.clip_line(np.array([0.5, 0.5, -1.0]), np.array([0.0, 0.0, 1.0])) == (1.0, 2.0)
    assert box.clip_line(np.array([2.0, 0.5, 0.0]), np.array([0.0, 0.0, 1.0])) is None
    t0, t1 = box.clip_line(np.zeros(3), np.ones(3) / np.sqrt(3))
    assert t1 - t0 == pytest.approx(np.sqrt(3))


class TestPaddedMesh(unittest.TestCase):
    """A padded mesh extends the free-region spacing over the whole domain."""

    def setUp(self):
        self.free = Box((-100.0, -100.0, 0.0), (100.0, 100.0, 100.0))
        self.domain = Box((-100.0, -100.0, -50.0), (100.0, 100.0, 150.0))

    def test_default_counts(self):
        mesh = padded_mesh(self.free, (20, 20, 10), self.domain)
        self.assertEqual(mesh.counts, (20, 20, 20))
        spec = BoundarySpec.uniform(Dirichlet(0.0), free_region=self.free,
                                    region_value=lambda x: np.zeros(len(x)))
        self.assertEqual(int(spec.constrained_cells(mesh).sum()), 4000)

    def test_misaligned(self):
        with self.assertRaises(ValueError):
            padded_mesh(self.free, (5, 5, 5), self.domain)


class TestWellIntersection(unittest.TestCase):
    """The axis is split at every cell face it crosses."""

    def setUp(self):
        self.mesh = build_mesh(([-10.0, -10.0, 0.0], [10.0, 10.0, 20.0]), (5, 5, 5))

    def test_vertical_well(self):
        well = WellDescription(np.array([1.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]), 0.1, 1e6)
        intersections = intersect_well(self.mesh, well)
        self.assertEqual(len(intersections), 5)
        self.assertAlmostEqual(sum(i.length for i in intersections), 20.0, places=12)
        cells = [i.cell for i in intersections]
        self.assertEqual(cells, sorted(cells))

    def test_lengths_add_up(self):
        direction = well_direction_from_angles(20.0, 20.0)
        well = WellDescription(np.array([0.0, 0.0, 10.0]), direction, 0.1, 1e6)
        intersections = intersect_well(self.mesh, well)
        t0, t1 = self.mesh.bounds.clip_line(well.point, well.direction)
        self.assertAlmostEqual(sum(i.length for i in intersections), t1 - t0, places=10)
        for intersection in intersections:
            bounds = self.mesh.cell_bounds(intersection.cell)
            self.assertTrue(bounds.contains(np.array(intersection.midpoint)))

    def test_clip_and_extent(self):
        well = WellDescription.between([0.0, 0.0, 2.0], [0.0, 0.0, 18.0], 0.1, 1e6, None)
        intersections = intersect_well(self.mesh, well)
        self.assertAlmostEqual(sum(i.length for i in intersections), 16.0, places=12)
        clipped = intersect_well(self.mesh, well, clip=Box((-5.0, -5.0, 5.0), (5.0, 5.0, 10.0)))
        self.assertAlmostEqual(sum(i.length for i in clipped), 5.0, places=12)

    def test_outside(self):
        well = WellDescription(np.array([50.0, 0.0, 0.0]), np.array([0.0, 0.0, 1.0]), 0.1, 1e6)
        self.assertEqual(intersect_well(self.mesh, well), [])


class TestBoundarySpec(unittest.TestCase):

    def test_sides_required(self):
        with self.assertRaises(ValueError):
            BoundarySpec({"x-": Neumann()})

    def test_region_value_required(self):
        with self.assertRaises(ValueError):
            BoundarySpec.uniform(Neumann(), free_region=Box((0, 0, 0), (1, 1, 1)))

    def test_face_values(self):
        mesh = unit_mesh()
        sides = {side: Neumann() for side in SIDES}
        sides["x+"] = Dirichlet(lambda x: x[:, 1] + 10 * x[:, 2])
        spec = BoundarySpec(sides)
        values = spec.face_values(mesh)
        self.assertEqual(list(values), ["x+"])
        cells = mesh.boundary_cells("x+")
        centers = mesh.cell_centers[cells]
        np.testing.assert_allclose(values["x+"][cells], centers[:, 1] + 10 * centers[:, 2])
        self.assertTrue(spec.is_dirichlet("x+"))
        self.assertFalse(spec.is_dirichlet("x-"))


def run():
    test_numbering_and_centers()
    test_locate_cells()
    test_refine()
    test_boundary_faces()
    test_side_axis()
    test_clip_line()
    unittest.main(module=__name__, exit=False)


if __name__ == "__main__":
    run()
