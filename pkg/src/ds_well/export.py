"""
Field and table exports: CSV point data, legacy-VTK ASCII lattices and
cell data, and CSV result tables.  Numbers are written with %.17g so that
identical inputs give identical bytes.
"""

import logging
import os
from typing import Dict, List, Optional, Sequence

import numpy as np

from .mesh import StructuredMesh

logger = logging.getLogger(__name__)

NUMBER_FORMAT = "%.17g"
VTK_HEADER = "# vtk DataFile Version 3.0"


def _prepare(path: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(directory):
        raise ValueError(f"Output directory does not exist: {directory}")
    return path


def _format(value: float) -> str:
    return NUMBER_FORMAT % value


def _write_values(file, values: np.ndarray, per_line: int = 6):
    values = np.asarray(values, dtype=float).ravel()
    for start in range(0, len(values), per_line):
        file.write(" ".join(_format(v) for v in values[start:start + per_line]) + "\n")


def write_point_csv(path: str, points: np.ndarray, values: np.ndarray):
    """Write points and a scalar field as CSV with header `x,y,z,p`."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    values = np.asarray(values, dtype=float).ravel()
    if len(points) != len(values):
        raise ValueError(f"{len(points)} points but {len(values)} values")
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as file:
        np.savetxt(file, np.column_stack([points, values]), delimiter=",",
                   fmt=NUMBER_FORMAT, header="x,y,z,p", comments="")
    logger.debug(f"Wrote {len(values)} points to {path}")


def write_lattice_vtk(path: str, origin: Sequence[float], spacing: Sequence[float],
                      dims: Sequence[int], values: np.ndarray, name: str = "pressure",
                      title: str = "ds_well lattice"):
    """
    Write a scalar field on a structured lattice (x fastest) as a legacy-VTK
    STRUCTURED_POINTS dataset with POINT_DATA.
    """
    dims = [int(d) for d in dims]
    values = np.asarray(values, dtype=float).ravel()
    if len(values) != int(np.prod(dims)):
        raise ValueError(f"Lattice {dims} needs {int(np.prod(dims))} values, got {len(values)}")
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as file:
        file.write(f"{VTK_HEADER}\n{title}\nASCII\nDATASET STRUCTURED_POINTS\n")
        file.write(f"DIMENSIONS {dims[0]} {dims[1]} {dims[2]}\n")
        file.write("ORIGIN " + " ".join(_format(o) for o in origin) + "\n")
        file.write("SPACING " + " ".join(_format(s) for s in spacing) + "\n")
        file.write(f"POINT_DATA {len(values)}\n")
        file.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
        _write_values(file, values)


def write_mesh_vtk(path: str, mesh: StructuredMesh, cell_data: Dict[str, np.ndarray],
                   title: str = "ds_well solution"):
    """
    Write cell fields of a structured mesh as a legacy-VTK RECTILINEAR_GRID
    with CELL_DATA; fields are ordered by name.
    """
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as file:
        file.write(f"{VTK_HEADER}\n{title}\nASCII\nDATASET RECTILINEAR_GRID\n")
        nodes = [mesh.node_coordinates(d) for d in range(3)]
        file.write(f"DIMENSIONS {len(nodes[0])} {len(nodes[1])} {len(nodes[2])}\n")
        for label, coordinates in zip("XYZ", nodes):
            file.write(f"{label}_COORDINATES {len(coordinates)} double\n")
            _write_values(file, coordinates)
        file.write(f"CELL_DATA {mesh.n_cells}\n")
        for name in sorted(cell_data):
            values = np.asarray(cell_data[name], dtype=float).ravel()
            if len(values) != mesh.n_cells:
                raise ValueError(f"Cell field {name} has {len(values)} values for {mesh.n_cells} cells")
            file.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            _write_values(file, values)


def write_table(path: str, columns: Sequence[str], rows: List[Sequence[Optional[float]]]):
    """Write a result table as CSV; None cells are left empty."""
    with open(_prepare(path), "w", encoding="utf-8", newline="\n") as file:
        file.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for value in row:
                if value is None:
                    cells.append("")
                elif isinstance(value, str):
                    cells.append(value)
                else:
                    cells.append(_format(float(value)))
            file.write(",".join(cells) + "\n")


def format_table(columns: Sequence[str], rows: List[Sequence[Optional[float]]]) -> str:
    """Human-readable fixed-width rendering of a result table."""
    rendered = [[
        "-" if v is None else (v if isinstance(v, str) else f"{float(v):.4g}")
        for v in row
    ] for row in rows]
    widths = [max([len(c)] + [len(r[i]) for r in rendered]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rendered]
    return "\n".join(lines)


def export_mesh_solution(directory: str, stem: str, mesh: StructuredMesh,
                         pressure: np.ndarray, csv: bool = True, vtk: bool = True,
                         extra: Optional[Dict[str, np.ndarray]] = None) -> List[str]:
    """Write a cell-centred pressure field as `<stem>.csv` and `<stem>.vtk`."""
    written = []
    if csv:
        path = os.path.join(directory, f"{stem}.csv")
        write_point_csv(path, mesh.cell_centers, pressure)
        written.append(path)
    if vtk:
        path = os.path.join(directory, f"{stem}.vtk")
        fields = {"pressure": pressure}
        fields.update(extra or {})
        write_mesh_vtk(path, mesh, fields)
        written.append(path)
    return written


def export_lattice(directory: str, stem: str, origin: Sequence[float], spacing: Sequence[float],
                   dims: Sequence[int], points: np.ndarray, values: np.ndarray,
                   csv: bool = True, vtk: bool = True) -> List[str]:
    """Write a lattice field as `<stem>.csv` and `<stem>.vtk`."""
    written = []
    if csv:
        path = os.path.join(directory, f"{stem}.csv")
        write_point_csv(path, points, values)
        written.append(path)
    if vtk:
        path = os.path.join(directory, f"{stem}.vtk")
        write_lattice_vtk(path, origin, spacing, dims, values)
        written.append(path)
    return written
