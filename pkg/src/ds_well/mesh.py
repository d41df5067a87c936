"""
Structured hexahedral meshes over boxes, boundary descriptions and the
intersection of straight wells with mesh cells.

Cells are numbered lexicographically with the first index fastest:
id = i + n1 (j + n2 k).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .tensor_geometry import WellDescription

logger = logging.getLogger(__name__)

SIDES = ("x-", "x+", "y-", "y+", "z-", "z+")
GRAZING_TOLERANCE = 1e-12


def side_axis(side: str) -> Tuple[int, int]:
    """Axis (0, 1, 2) and direction (-1, +1) of a side name such as 'y+'."""
    if side not in SIDES:
        raise ValueError(f"Unknown boundary side: {side}")
    return SIDES.index(side) // 2, (1 if side[1] == "+" else -1)


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lower, upper]."""

    lower: Tuple[float, float, float]
    upper: Tuple[float, float, float]

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != 3 or len(upper) != 3:
            raise ValueError("Box bounds must have three components")
        if any(u <= l for l, u in zip(lower, upper)):
            raise ValueError(f"Box has zero or negative extent: {lower} -> {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def extent(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.upper) + np.array(self.lower))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, points: np.ndarray, tolerance: float = 0.0) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        lower = np.array(self.lower) - tolerance
        upper = np.array(self.upper) + tolerance
        return np.all((points >= lower) & (points <= upper), axis=-1)

    def clip_line(self, point: np.ndarray, direction: np.ndarray
                  ) -> Optional[Tuple[float, float]]:
        """Parameter interval of the line point + t direction inside the box."""
        t_min, t_max = -np.inf, np.inf
        for d in range(3):
            if direction[d] == 0:
                if point[d] < self.lower[d] or point[d] > self.upper[d]:
                    return None
                continue
            t0 = (self.lower[d] - point[d]) / direction[d]
            t1 = (self.upper[d] - point[d]) / direction[d]
            t_min = max(t_min, min(t0, t1))
            t_max = min(t_max, max(t0, t1))
        if t_max <= t_min:
            return None
        return float(t_min), float(t_max)


@dataclass(frozen=True)
class StructuredMesh:
    """A uniform structured hexahedral mesh of a box."""

    bounds: Box
    counts: Tuple[int, int, int]

    def __post_init__(self):
        counts = tuple(int(n) for n in self.counts)
        if len(counts) != 3 or any(n <= 0 for n in counts):
            raise ValueError(f"Cell counts must be three positive integers: {self.counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def spacing(self) -> np.ndarray:
        return self.bounds.extent / np.array(self.counts)

    @property
    def h_max(self) -> float:
        """Cell diagonal, the maximum cell diameter."""
        return float(np.linalg.norm(self.spacing))

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.bounds.lower)

    def node_coordinates(self, axis: int) -> np.ndarray:
        return self.bounds.lower[axis] + self.spacing[axis] * np.arange(self.counts[axis] + 1)

    def center_coordinates(self, axis: int) -> np.ndarray:
        return self.bounds.lower[axis] + self.spacing[axis] * (np.arange(self.counts[axis]) + 0.5)

    def cell_index(self, i, j, k):
        n1, n2, _ = self.counts
        return np.asarray(i) + n1 * (np.asarray(j) + n2 * np.asarray(k))

    def cell_ijk(self, ids) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        n1, n2, _ = self.counts
        ids = np.asarray(ids)
        return ids % n1, (ids // n1) % n2, ids // (n1 * n2)

    @cached_property
    def cell_centers(self) -> np.ndarray:
        i, j, k = self.cell_ijk(np.arange(self.n_cells))
        h = self.spacing
        lower = self.origin
        return np.column_stack(
            [lower[0] + (i + 0.5) * h[0], lower[1] + (j + 0.5) * h[1], lower[2] + (k + 0.5) * h[2]]
        )

    def cell_bounds(self, cell: int) -> Box:
        i, j, k = (int(c) for c in self.cell_ijk(cell))
        lower = self.origin + self.spacing * np.array([i, j, k])
        return Box(tuple(lower), tuple(lower + self.spacing))

    def locate_cells(self, points: np.ndarray) -> np.ndarray:
        """
        Ids of the cells containing points (shape (..., 3)); -1 outside.
        Points on an interior face belong to the upper cell, points on the
        upper boundary to the last cell.
        """
        points = np.asarray(points, dtype=float)
        relative = (points - self.origin) / self.spacing
        indices = np.floor(relative).astype(np.int64)
        counts = np.array(self.counts)
        on_upper = np.isclose(relative, counts, rtol=0.0, atol=1e-12 * counts.max())
        indices = np.where(on_upper & (indices == counts), counts - 1, indices)
        inside = np.all((indices >= 0) & (indices < counts), axis=-1)
        ids = self.cell_index(indices[..., 0], indices[..., 1], indices[..., 2])
        return np.where(inside, ids, -1)

    def refine(self) -> "StructuredMesh":
        """Uniform refinement by a factor of two in every direction."""
        return StructuredMesh(self.bounds, tuple(2 * n for n in self.counts))

    def boundary_cells(self, side: str) -> np.ndarray:
        """Ids of the cells adjacent to a boundary side, in lexicographic order."""
        axis, direction = side_axis(side)
        index = [np.arange(n) for n in self.counts]
        index[axis] = np.array([0 if direction < 0 else self.counts[axis] - 1])
        kk, jj, ii = np.meshgrid(index[2], index[1], index[0], indexing="ij")
        return self.cell_index(ii.ravel(), jj.ravel(), kk.ravel())

    def face_area(self, axis: int) -> float:
        h = self.spacing
        return float(np.prod(np.delete(h, axis)))

    def boundary_faces(self) -> "BoundaryFaces":
        """All boundary faces with their cells, sides, centroids and areas."""
        cells, sides, centroids, areas = [], [], [], []
        for side in SIDES:
            axis, direction = side_axis(side)
            ids = self.boundary_cells(side)
            centers = self.cell_centers[ids].copy()
            centers[:, axis] += 0.5 * direction * self.spacing[axis]
            cells.append(ids)
            sides.append(np.full(len(ids), SIDES.index(side)))
            centroids.append(centers)
            areas.append(np.full(len(ids), self.face_area(axis)))
        return BoundaryFaces(
            cells=np.concatenate(cells),
            sides=np.concatenate(sides),
            centroids=np.vstack(centroids),
            areas=np.concatenate(areas),
        )


@dataclass(frozen=True, eq=False)
class BoundaryFaces:
    cells: np.ndarray
    sides: np.ndarray
    centroids: np.ndarray
    areas: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)


def build_mesh(bounds: Union[Box, Sequence[Sequence[float]]], counts: Sequence[int]) -> StructuredMesh:
    """
    Build a uniform structured mesh.

    Args:
        bounds: a Box or a pair (lower, upper) of 3-vectors.
        counts: cells per direction.
    """
    if not isinstance(bounds, Box):
        lower, upper = bounds
        bounds = Box(tuple(lower), tuple(upper))
    return StructuredMesh(bounds, tuple(counts))


def padded_mesh(free_region: Box, counts: Sequence[int], domain: Box) -> StructuredMesh:
    """
    Mesh of `domain` with the spacing of `counts` cells over `free_region`.
    The free region must be aligned with the resulting grid.
    """
    spacing = free_region.extent / np.array(counts, dtype=float)
    lower = np.array(domain.lower)
    extent = domain.extent
    cells = np.rint(extent / spacing).astype(int)
    if np.any(np.abs(cells * spacing - extent) > 1e-9 * extent):
        raise ValueError(
            f"Domain {domain} is not a whole number of cells of size {spacing.tolist()}"
        )
    offset = (np.array(free_region.lower) - lower) / spacing
    if np.any(np.abs(offset - np.rint(offset)) > 1e-9):
        raise ValueError(f"Free region {free_region} is not aligned with the padded grid")
    return StructuredMesh(domain, tuple(int(c) for c in cells))


@dataclass(frozen=True)
class WellIntersection:
    """
    The part of the well axis inside one cell.

    Attributes:
        cell: cell id.
        interval: parameter interval (t0, t1) along the well direction.
        length: |I| [m].
        midpoint: point on the axis at the interval centre [m].
    """

    cell: int
    interval: Tuple[float, float]
    length: float
    midpoint: Tuple[float, float, float]


def intersect_well(
    mesh: StructuredMesh,
    well: WellDescription,
    clip: Optional[Box] = None,
) -> List[WellIntersection]:
    """
    Intersections of the well axis with the mesh cells, ordered along the
    well direction.

    Args:
        mesh: the structured mesh.
        well: the well; finite wells are restricted to their extent.
        clip: optional box further restricting the axis.
    """
    point, direction = well.point, well.direction
    interval = mesh.bounds.clip_line(point, direction)
    if interval is None:
        return []
    t_min, t_max = interval
    if clip is not None:
        clipped = clip.clip_line(point, direction)
        if clipped is None:
            return []
        t_min, t_max = max(t_min, clipped[0]), min(t_max, clipped[1])
    if well.extent is not None:
        t_min, t_max = max(t_min, well.extent[0]), min(t_max, well.extent[1])
    if t_max <= t_min:
        return []

    crossings = [np.array([t_min, t_max])]
    for d in range(3):
        if direction[d] == 0:
            continue
        planes = mesh.node_coordinates(d)
        t = (planes - point[d]) / direction[d]
        crossings.append(t[(t > t_min) & (t < t_max)])
    t = np.unique(np.concatenate(crossings))

    starts, ends = t[:-1], t[1:]
    lengths = ends - starts
    keep = lengths >= GRAZING_TOLERANCE * float(mesh.spacing.min())
    if np.any(~keep):
        logger.debug(f"Dropped {np.count_nonzero(~keep)} grazing well intersections")
    starts, ends, lengths = starts[keep], ends[keep], lengths[keep]
    mids = well.at(0.5 * (starts + ends))
    cells = mesh.locate_cells(mids)

    intersections = []
    for cell, t0, t1, length, mid in zip(cells, starts, ends, lengths, mids):
        if cell < 0:
            continue
        intersections.append(
            WellIntersection(int(cell), (float(t0), float(t1)), float(length), tuple(float(m) for m in mid))
        )
    return intersections


# boundary conditions

@dataclass(frozen=True)
class Dirichlet:
    """Prescribed pressure; `value` is a constant or a function of points (n, 3)."""

    value: Union[float, Callable[[np.ndarray], np.ndarray]]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if callable(self.value):
            return np.asarray(self.value(points), dtype=float)
        return np.full(len(points), float(self.value))


@dataclass(frozen=True)
class Neumann:
    """Prescribed outward mass flux density [kg/s/m^2]; zero is no-flow."""

    flux: float = 0.0


Condition = Union[Dirichlet, Neumann]


@dataclass(frozen=True)
class BoundarySpec:
    """
    One condition per boundary side and an optional Dirichlet region:
    cells whose centroids lie outside `free_region` are constrained to
    `region_value`.
    """

    sides: Dict[str, Condition]
    free_region: Optional[Box] = None
    region_value: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        missing = [s for s in SIDES if s not in self.sides]
        unknown = [s for s in self.sides if s not in SIDES]
        if missing or unknown:
            raise ValueError(f"Boundary sides must be exactly {SIDES}; missing {missing}, unknown {unknown}")
        if self.free_region is not None and self.region_value is None:
            raise ValueError("A Dirichlet region needs a region value")

    @classmethod
    def uniform(cls, condition: Condition, **kwargs) -> "BoundarySpec":
        return cls({side: condition for side in SIDES}, **kwargs)

    def condition(self, side: str) -> Condition:
        return self.sides[side]

    def is_dirichlet(self, side: str) -> bool:
        return isinstance(self.sides[side], Dirichlet)

    def constrained_cells(self, mesh: StructuredMesh) -> np.ndarray:
        """Boolean mask of the cells of the Dirichlet region."""
        if self.free_region is None:
            return np.zeros(mesh.n_cells, dtype=bool)
        return ~self.free_region.contains(mesh.cell_centers)

    def face_values(self, mesh: StructuredMesh) -> Dict[str, np.ndarray]:
        """Dirichlet values at the face centroids of every Dirichlet side."""
        values = {}
        for side in SIDES:
            condition = self.sides[side]
            if not isinstance(condition, Dirichlet):
                continue
            axis, direction = side_axis(side)
            cells = mesh.boundary_cells(side)
            centroids = mesh.cell_centers[cells].copy()
            centroids[:, axis] += 0.5 * direction * mesh.spacing[axis]
            full = np.zeros(mesh.n_cells)
            full[cells] = condition.evaluate(centroids)
            values[side] = full
        return values
