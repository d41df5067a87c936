"""
Kernel functions distributing the well source over an elliptic cylinder
around the well axis, and their integration over mesh cells.

The annulus kernel Phi_A is constant between the normalised Joukowsky radii
rho_i and rho_o.  Pulled back to x-coordinates it is multiplied by the
normalised Joukowsky factor Phi_J_hat = (r_w/r_o)^2 Phi_J, so that its
integral over the support of a segment of length L is L_hat = L/zeta.
"""

import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .analytic import KernelSpec, check_kernel_radii
from .conformal import JoukowskyMap
from .mesh import StructuredMesh, WellIntersection
from .tensor_geometry import TransformChain

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KernelField:
    """
    The kernel of one well segment in x-coordinates.

    Attributes:
        spec: kernel radii and sampling options.
        chain: transform chain of the well.
        joukowsky: Joukowsky map of the well-bore ellipse.
        segment: parameter interval (t0, t1) of the segment along the well.
    """

    spec: KernelSpec
    chain: TransformChain
    joukowsky: JoukowskyMap
    segment: Tuple[float, float]

    @classmethod
    def build(cls, spec: KernelSpec, chain: TransformChain,
              segment: Tuple[float, float]) -> "KernelField":
        check_kernel_radii(chain, spec)
        jmap = JoukowskyMap.from_ellipse(chain.major, chain.minor, chain.focal)
        t0, t1 = (float(t) for t in segment)
        if t1 < t0:
            raise ValueError(f"Invalid kernel segment: {segment}")
        return cls(spec, chain, jmap, (t0, t1))

    @property
    def normalisation(self) -> float:
        return self.chain.well.radius / self.joukowsky.circle_radius

    @property
    def length(self) -> float:
        return self.segment[1] - self.segment[0]

    @property
    def transformed_length(self) -> float:
        """L_hat, the v3-length of the segment (= L / zeta)."""
        return self.length * self.chain.axial_stretch

    @property
    def far_field_jacobian(self) -> float:
        """Far-field value 4 (r_w/r_o)^2 of the normalised Joukowsky factor."""
        return 4.0 * self.normalisation ** 2

    def jacobian_factor(self, w_hat: np.ndarray) -> np.ndarray:
        """Normalised Joukowsky factor Phi_J_hat at normalised points w_hat."""
        w = np.asarray(w_hat) / self.normalisation
        return self.normalisation ** 2 * self.joukowsky.phi_j(w)

    def kernel_factor(self, w_hat: np.ndarray) -> np.ndarray:
        """The factor multiplying Phi_A in the discrete kernel."""
        if self.spec.simplified_jacobian:
            return np.full(np.shape(w_hat), self.far_field_jacobian)
        return self.jacobian_factor(w_hat)

    def eval_kernel(self, x: np.ndarray) -> np.ndarray:
        """Kernel density Phi_A Phi_J_hat at points x; zero outside the support."""
        x = np.asarray(x, dtype=float)
        z, v3 = self.chain.well_frame_coordinates(x)
        w_hat = self.joukowsky.to_w(z, allow_cut=True) * self.normalisation
        radius = np.abs(w_hat)
        t = v3 / self.chain.axial_stretch
        inside = (
            (radius >= self.spec.inner_radius)
            & (radius <= self.spec.outer_radius)
            & (t >= self.segment[0])
            & (t <= self.segment[1])
        )
        # the map is undefined on |w| <= f, which lies inside rho_i
        safe = np.where(inside, w_hat, self.spec.outer_radius)
        values = self.spec.density() * self.kernel_factor(safe)
        return np.where(inside, values, 0.0)


@dataclass(frozen=True, eq=False)
class IntegrationPointSet:
    """
    Sample points of a kernel support with their volume elements and the
    discrete kernel density at each point.
    """

    points: np.ndarray
    volumes: np.ndarray
    kernel_values: np.ndarray

    @property
    def count(self) -> int:
        return len(self.volumes)

    @property
    def weights(self) -> np.ndarray:
        """V_i Phi(x_i)."""
        return self.volumes * self.kernel_values


def generate_integration_points(
    field: KernelField, target_spacing: Optional[float] = None
) -> IntegrationPointSet:
    """
    Sample the kernel support on a lattice in (|w_hat|^2, arg w_hat, v3)
    with equal-area radial bands, mapped back to x-coordinates.

    The volume element of a sample is its w_hat-area times its v3-extent
    divided by the local Joukowsky factor.

    Args:
        field: the kernel of one segment.
        target_spacing: lattice spacing in the normalised frame; defaults to
            the kernel's sampling spacing.
    """
    spec = field.spec
    spacing = spec.sampling_spacing if target_spacing is None else float(target_spacing)
    thickness = spec.outer_radius - spec.inner_radius
    if not spacing > 0:
        raise ValueError(f"Sampling spacing must be positive: {spacing}")
    if spacing > thickness:
        raise ValueError(
            f"Sampling spacing {spacing} exceeds the kernel annulus thickness {thickness}"
        )
    axial_length = field.transformed_length
    if axial_length <= 0:
        return IntegrationPointSet(np.zeros((0, 3)), np.zeros(0), np.zeros(0))

    n_radial = int(np.ceil(thickness / spacing))
    n_angular = max(8, int(np.ceil(2.0 * np.pi * spec.outer_radius / spacing)))
    n_axial = max(1, int(np.ceil(axial_length / spacing)))

    inner2, outer2 = spec.inner_radius ** 2, spec.outer_radius ** 2
    band = (outer2 - inner2) / n_radial
    radii = np.sqrt(inner2 + band * (np.arange(n_radial) + 0.5))
    angles = 2.0 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    axial_step = axial_length / n_axial
    v3_start = field.segment[0] * field.chain.axial_stretch
    v3 = v3_start + axial_step * (np.arange(n_axial) + 0.5)

    w_hat_ring = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
    z_ring = field.joukowsky.from_w(w_hat_ring / field.normalisation)
    jacobian = field.jacobian_factor(w_hat_ring)
    area = np.pi * band / n_angular

    ring_points = np.column_stack([z_ring.real, z_ring.imag, np.zeros(len(z_ring))])
    v = np.repeat(ring_points[None, :, :], n_axial, axis=0)
    v[:, :, 2] = v3[:, None]
    points = field.chain.inverse_map(v.reshape(-1, 3))

    ring_volumes = area * axial_step / jacobian
    volumes = np.tile(ring_volumes, n_axial)
    density = spec.density() * field.kernel_factor(w_hat_ring)
    kernel_values = np.tile(density, n_axial)
    return IntegrationPointSet(points, volumes, kernel_values)


def support_volume(field: KernelField) -> float:
    """Exact volume of the kernel support of the segment."""
    f2 = field.joukowsky.focal ** 2
    scale = 1.0 / field.normalisation

    def ellipse_area(radius_hat: float) -> float:
        rho = radius_hat * scale
        if rho == 0:
            return 0.0
        return 0.25 * np.pi * (rho ** 2 - f2 * f2 / rho ** 2)

    inner = ellipse_area(field.spec.inner_radius) if field.spec.inner_radius > 0 else 0.0
    return (ellipse_area(field.spec.outer_radius) - inner) * field.transformed_length


def integrate_kernel_over_segment(field: KernelField, rate_hat: float = 1.0,
                                  target_spacing: Optional[float] = None) -> float:
    """
    Sampled integral of q_hat Phi over the support of the segment; equals
    q L for q_hat = q zeta.
    """
    points = generate_integration_points(field, target_spacing)
    return float(rate_hat * points.weights.sum())


def cell_kernel_weight(points: IntegrationPointSet, cell_lower: Sequence[float],
                       cell_upper: Sequence[float]) -> float:
    """Sum of V_i Phi(x_i) over the sample points inside an axis-aligned cell."""
    lower = np.asarray(cell_lower, dtype=float)
    upper = np.asarray(cell_upper, dtype=float)
    inside = np.all((points.points >= lower) & (points.points < upper), axis=1)
    return float(points.weights[inside].sum())


@dataclass(frozen=True, eq=False)
class KernelWeights:
    """
    Cell-by-intersection kernel integrals.

    Attributes:
        matrix: sparse (n_cells x n_intersections) weights, each column
            renormalised to the exact integral |I|/zeta.
        exact: exact column sums.
        sampled: column sums before renormalisation.
        lost: sampled weight falling outside the mesh per column.
    """

    matrix: sp.csc_matrix
    exact: np.ndarray
    sampled: np.ndarray
    lost: np.ndarray


WEIGHT_CACHE_SIZE = 8

# least recently used first
_WEIGHT_CACHE: "OrderedDict[tuple, KernelWeights]" = OrderedDict()
_CACHE_LOCK = threading.Lock()


def _cache_key(mesh: StructuredMesh, chain: TransformChain, spec: KernelSpec,
               intersections: Sequence[WellIntersection], spacing: Optional[float]) -> tuple:
    return (
        mesh,
        chain.permeability.entries.tobytes(),
        chain.well.point.tobytes(),
        chain.well.direction.tobytes(),
        chain.well.radius,
        spec,
        tuple(intersections),
        spacing,
    )


def clear_weight_cache():
    with _CACHE_LOCK:
        _WEIGHT_CACHE.clear()


def weight_cache_size() -> int:
    """Number of weight matrices currently cached."""
    with _CACHE_LOCK:
        return len(_WEIGHT_CACHE)


def kernel_weights(
    mesh: StructuredMesh,
    spec: KernelSpec,
    chain: TransformChain,
    intersections: Sequence[WellIntersection],
    spacing: Optional[float] = None,
) -> KernelWeights:
    """
    Kernel integrals over all cells for every well intersection, cached per
    (mesh, well, kernel) combination.  The cache keeps the
    WEIGHT_CACHE_SIZE most recently used results.
    """
    key = _cache_key(mesh, chain, spec, intersections, spacing)
    with _CACHE_LOCK:
        cached = _WEIGHT_CACHE.get(key)
        if cached is not None:
            _WEIGHT_CACHE.move_to_end(key)
            return cached

    rows, cols, data = [], [], []
    exact = np.zeros(len(intersections))
    sampled = np.zeros(len(intersections))
    lost = np.zeros(len(intersections))
    for column, intersection in enumerate(intersections):
        field = KernelField.build(spec, chain, intersection.interval)
        samples = generate_integration_points(field, spacing)
        cells = mesh.locate_cells(samples.points)
        weights = samples.weights
        outside = cells < 0
        if np.any(outside):
            lost[column] = weights[outside].sum()
        per_cell = np.bincount(cells[~outside], weights=weights[~outside], minlength=mesh.n_cells)
        nonzero = np.flatnonzero(per_cell)
        exact[column] = field.transformed_length
        sampled[column] = per_cell.sum()
        if sampled[column] > 0:
            per_cell *= exact[column] / sampled[column]
        rows.append(nonzero)
        cols.append(np.full(len(nonzero), column))
        data.append(per_cell[nonzero])

    total_lost = lost.sum()
    if total_lost > 0:
        logger.warning(
            f"{total_lost / max(exact.sum(), 1e-300):.2%} of the kernel support lies "
            "outside the mesh; weights renormalised onto the cells inside"
        )
    matrix = sp.csc_matrix(
        (
            np.concatenate(data) if data else np.zeros(0),
            (np.concatenate(rows) if rows else np.zeros(0, int),
             np.concatenate(cols) if cols else np.zeros(0, int)),
        ),
        shape=(mesh.n_cells, len(intersections)),
    )
    result = KernelWeights(matrix, exact, sampled, lost)
    with _CACHE_LOCK:
        _WEIGHT_CACHE[key] = result
        _WEIGHT_CACHE.move_to_end(key)
        while len(_WEIGHT_CACHE) > WEIGHT_CACHE_SIZE:
            _WEIGHT_CACHE.popitem(last=False)
    logger.debug(
        f"Kernel weights: {len(intersections)} intersections, {matrix.nnz} nonzeros"
    )
    return result


def dump_integration_points(points: IntegrationPointSet, path: str):
    """Write integration points as CSV (x, y, z, volume, kernel)."""
    table = np.column_stack([points.points, points.volumes, points.kernel_values])
    np.savetxt(path, table, delimiter=",", fmt="%.17g",
               header="x,y,z,volume,kernel", comments="")
