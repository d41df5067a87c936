"""
Tests for the CSV and legacy-VTK writers.
"""

import tempfile
import unittest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import numpy as np

from ds_well.export import (
    VTK_HEADER,
    export_lattice,
    export_mesh_solution,
    format_table,
    write_lattice_vtk,
    write_point_csv,
    write_table,
)
from ds_well.mesh import build_mesh


def read_lines(path):
    with open(path, "r", encoding="utf-8") as file:
        return file.read().splitlines()


def lattice():
    axes = [np.array([0.0, 1.0]), np.array([0.0, 2.0]), np.array([0.0, 3.0])]
    gz, gy, gx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
    return points, points.sum(axis=1) + 0.1


class TestLatticeExport(unittest.TestCase):
    """A 2x2x2 lattice written as CSV and STRUCTURED_POINTS."""

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.points, self.values = lattice()

    def tearDown(self):
        self.directory.cleanup()

    def test_files(self):
        files = export_lattice(self.directory.name, "field", (0.0, 0.0, 0.0), (1.0, 2.0, 3.0),
                               (2, 2, 2), self.points, self.values)
        self.assertEqual([os.path.basename(f) for f in files], ["field.csv", "field.vtk"])

        csv_lines = read_lines(files[0])
        self.assertEqual(len(csv_lines), 9)
        self.assertEqual(csv_lines[0], "x,y,z,p")
        self.assertEqual(csv_lines[2], "1,0,0,1.1000000000000001")

        vtk_lines = read_lines(files[1])
        self.assertEqual(vtk_lines[0], VTK_HEADER)
        self.assertIn("DATASET STRUCTURED_POINTS", vtk_lines)
        self.assertIn("DIMENSIONS 2 2 2", vtk_lines)
        self.assertIn("SPACING 1 2 3", vtk_lines)
        self.assertIn("POINT_DATA 8", vtk_lines)
        self.assertIn("SCALARS pressure double 1", vtk_lines)

    def test_identical_bytes(self):
        paths = []
        for stem in ("a", "b"):
            path = os.path.join(self.directory.name, f"{stem}.vtk")
            write_lattice_vtk(path, (0.0, 0.0, 0.0), (1.0, 2.0, 3.0), (2, 2, 2), self.values)
            paths.append(path)
        with open(paths[0], "rb") as first, open(paths[1], "rb") as second:
            self.assertEqual(first.read(), second.read())

    def test_size_mismatch(self):
        path = os.path.join(self.directory.name, "bad.vtk")
        with self.assertRaises(ValueError):
            write_lattice_vtk(path, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (3, 2, 2), self.values)
        with self.assertRaises(ValueError):
            write_point_csv(path, self.points, self.values[:-1])

    def test_missing_directory(self):
        path = os.path.join(self.directory.name, "missing", "field.csv")
        with self.assertRaises(ValueError):
            write_point_csv(path, self.points, self.values)


def test_mesh_export():
    mesh = build_mesh(([0.0, 0.0, 0.0], [2.0, 2.0, 1.0]), (2, 2, 1))
    pressure = np.arange(mesh.n_cells, dtype=float)
    with tempfile.TemporaryDirectory() as directory:
        files = export_mesh_solution(directory, "solution", mesh, pressure,
                                     extra={"exact": pressure + 1.0})
        vtk_lines = read_lines(files[1])
        csv_lines = read_lines(files[0])
    assert "DATASET RECTILINEAR_GRID" in vtk_lines
    assert "DIMENSIONS 3 3 2" in vtk_lines
    assert "CELL_DATA 4" in vtk_lines
    scalars = [line for line in vtk_lines if line.startswith("SCALARS")]
    assert scalars == ["SCALARS exact double 1", "SCALARS pressure double 1"]
    assert len(csv_lines) == mesh.n_cells + 1
    assert csv_lines[1] == "0.5,0.5,0.5,0"


def test_mesh_export_rejects_wrong_field_size():
    mesh = build_mesh(([0.0, 0.0, 0.0], [1.0, 1.0, 1.0]), (2, 2, 2))
    with tempfile.TemporaryDirectory() as directory:
        try:
            export_mesh_solution(directory, "solution", mesh, np.zeros(3), csv=False)
        except ValueError:
            return
    raise AssertionError("a field of the wrong size was written")


def test_tables():
    columns = ["model", "level", "E_q"]
    rows = [["ds", 0, 0.25], ["pm", 1, None]]
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "table.csv")
        write_table(path, columns, rows)
        lines = read_lines(path)
    assert lines == ["model,level,E_q", "ds,0,0.25", "pm,1,"]
    text = format_table(columns, rows).splitlines()
    assert len(text) == 3
    assert text[2].split() == ["pm", "1", "-"]


def run():
    test_mesh_export()
    test_mesh_export_rejects_wrong_field_size()
    test_tables()
    unittest.main(module=__name__, exit=False)


if __name__ == "__main__":
    run()
