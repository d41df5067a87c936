"""
Cell-centred finite volumes on structured hexahedral meshes: two-point and
MPFA-O flux assembly, the non-local distributed-source well coupling, the
Peaceman-type baseline coupling, the linear solve and discrete error norms.

Every cell row states: sum of outward face fluxes = source of the cell.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .analytic import AnalyticSolution, FluidProperties
from .mesh import (
    SIDES,
    BoundarySpec,
    StructuredMesh,
    WellIntersection,
    side_axis,
)
from .peaceman import WellIndexInput, slanted_well_index
from .tensor_geometry import PermeabilityTensor, WellDescription
from .utils.norms import relative_pressure_error, relative_source_error, relative_total_error

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e12
DIAGONAL_TOLERANCE = 1e-12
ASSEMBLY_CHUNK = 65536


class SchemeChoice(str, Enum):
    TPFA = "tpfa"
    MPFA_O = "mpfa-o"


class SchemeError(ValueError):
    """Raised when a flux scheme is not consistent for the given tensor."""


class SolverError(RuntimeError):
    """Raised when the linear solver fails; carries the relative residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True, eq=False)
class FaceFluxes:
    """
    Discrete face fluxes [kg/s] oriented along the positive axis direction,
    from the `minus` to the `plus` cell (-1 marks the outside of the mesh).
    """

    minus: np.ndarray
    plus: np.ndarray
    axis: np.ndarray
    flux: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        return (self.minus >= 0) & (self.plus >= 0)

    def boundary_outflow(self) -> float:
        """Net outward flux through the mesh boundary."""
        outward = np.where(self.plus < 0, self.flux, 0.0) - np.where(self.minus < 0, self.flux, 0.0)
        return float(outward[~self.interior].sum())


def _side_name(axis: int, direction: int) -> str:
    return SIDES[2 * axis + (1 if direction > 0 else 0)]


def _boundary_data(boundary: BoundarySpec, mesh: StructuredMesh
                   ) -> Tuple[Dict[str, np.ndarray], Dict[str, float]]:
    values = boundary.face_values(mesh)
    fluxes = {
        side: float(boundary.condition(side).flux)
        for side in SIDES if not boundary.is_dirichlet(side)
    }
    return values, fluxes


# two-point fluxes

class TpfaStencil:
    """Two-point fluxes of a diagonal tensor."""

    def __init__(self, mesh: StructuredMesh, permeability: PermeabilityTensor,
                 fluid: FluidProperties, boundary: BoundarySpec):
        diagonal = np.diag(permeability.entries)
        off = permeability.entries - np.diag(diagonal)
        if np.max(np.abs(off)) > DIAGONAL_TOLERANCE * np.max(diagonal):
            raise SchemeError(
                "TPFA is inconsistent for a full permeability tensor on this mesh; "
                "use the mpfa-o scheme"
            )
        self.mesh = mesh
        self.boundary = boundary
        h = mesh.spacing
        self.trans = np.array([
            fluid.mobility * mesh.face_area(d) * diagonal[d] / h[d] for d in range(3)
        ])
        self.face_values, self.face_fluxes_density = _boundary_data(boundary, mesh)

    def _interior_pairs(self, axis: int) -> Tuple[np.ndarray, np.ndarray]:
        n = self.mesh.counts
        index = [np.arange(c) for c in n]
        index[axis] = np.arange(n[axis] - 1)
        kk, jj, ii = np.meshgrid(index[2], index[1], index[0], indexing="ij")
        minus = self.mesh.cell_index(ii.ravel(), jj.ravel(), kk.ravel())
        stride = [1, n[0], n[0] * n[1]][axis]
        return minus, minus + stride

    def assemble(self) -> Tuple[sp.csr_matrix, np.ndarray]:
        n_cells = self.mesh.n_cells
        rows, cols, vals = [], [], []
        rhs = np.zeros(n_cells)
        for axis in range(3):
            minus, plus = self._interior_pairs(axis)
            t = self.trans[axis]
            rows += [minus, minus, plus, plus]
            cols += [minus, plus, plus, minus]
            vals += [np.full(len(minus), t), np.full(len(minus), -t),
                     np.full(len(minus), t), np.full(len(minus), -t)]
        for side in SIDES:
            axis, _ = side_axis(side)
            cells = self.mesh.boundary_cells(side)
            if side in self.face_values:
                t = 2.0 * self.trans[axis]
                rows.append(cells)
                cols.append(cells)
                vals.append(np.full(len(cells), t))
                rhs[cells] += t * self.face_values[side][cells]
            else:
                rhs[cells] -= self.face_fluxes_density[side] * self.mesh.face_area(axis)
        matrix = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_cells, n_cells),
        ).tocsr()
        return matrix, rhs

    def face_fluxes(self, pressure: np.ndarray) -> FaceFluxes:
        minus_all, plus_all, axis_all, flux_all = [], [], [], []
        for axis in range(3):
            minus, plus = self._interior_pairs(axis)
            minus_all.append(minus)
            plus_all.append(plus)
            axis_all.append(np.full(len(minus), axis))
            flux_all.append(self.trans[axis] * (pressure[minus] - pressure[plus]))
        for side in SIDES:
            axis, direction = side_axis(side)
            cells = self.mesh.boundary_cells(side)
            if side in self.face_values:
                outward = 2.0 * self.trans[axis] * (pressure[cells] - self.face_values[side][cells])
            else:
                outward = np.full(len(cells), self.face_fluxes_density[side] * self.mesh.face_area(axis))
            outside = np.full(len(cells), -1)
            minus_all.append(cells if direction > 0 else outside)
            plus_all.append(outside if direction > 0 else cells)
            axis_all.append(np.full(len(cells), axis))
            flux_all.append(direction * outward)
        return FaceFluxes(
            np.concatenate(minus_all), np.concatenate(plus_all),
            np.concatenate(axis_all), np.concatenate(flux_all),
        )


# MPFA-O

INTERIOR, DIRICHLET, NEUMANN, ABSENT = range(4)

# local cell l = a + 2b + 4c sits at (I-1+a, J-1+b, K-1+c) around vertex (I, J, K)
_LOCAL_BITS = np.array([(l & 1, (l >> 1) & 1, (l >> 2) & 1) for l in range(8)])


def _build_subfaces() -> List[Tuple[int, int, int]]:
    subfaces = []
    for s in range(4):
        b, c = s & 1, s >> 1
        subfaces.append((0, 2 * b + 4 * c, 2 * b + 4 * c + 1))
    for s in range(4):
        a, c = s & 1, s >> 1
        subfaces.append((1, a + 4 * c, a + 4 * c + 2))
    for s in range(4):
        a, b = s & 1, s >> 1
        subfaces.append((2, a + 2 * b, a + 2 * b + 4))
    return subfaces


_SUBFACES = _build_subfaces()
_CELL_SUBFACES = np.array(
    [[b + 2 * c, 4 + a + 2 * c, 8 + a + 2 * b] for a, b, c in _LOCAL_BITS]
)


@dataclass(frozen=True, eq=False)
class LocalTransmissibility:
    """
    Subface fluxes of one interaction region as linear functions of the
    eight cell pressures, the Dirichlet values and the Neumann fluxes:
    F = cells @ p + dirichlet @ D + neumann @ N (shapes 12x8, 12x12, 12x12).
    `cells_plus` is the same flux evaluated from the plus-side cell.
    """

    present: np.ndarray
    kinds: np.ndarray
    cells: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray
    cells_plus: np.ndarray
    dirichlet_plus: np.ndarray
    neumann_plus: np.ndarray
    incidence: np.ndarray
    condition: float


def _flux_coefficients(permeability: np.ndarray, mobility: float, h: np.ndarray) -> np.ndarray:
    """
    coef[l, s_axis, d]: flux of cell l through its s_axis subface per unit
    difference between the continuity value on its d-subface and p_l.
    """
    areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]]) / 4.0
    displacement = np.where(_LOCAL_BITS == 0, 0.5, -0.5) * h
    return (
        -mobility
        * areas[None, :, None]
        * permeability[None, :, :]
        / displacement[:, None, :]
    )


def local_transmissibility(
    permeability: np.ndarray,
    mobility: float,
    h: np.ndarray,
    present: np.ndarray,
    dirichlet_sides: Sequence[str] = SIDES,
) -> LocalTransmissibility:
    """
    Solve the continuity conditions of one interaction region.

    Args:
        permeability: 3x3 tensor.
        mobility: rho / mu.
        h: cell spacing.
        present: boolean mask of the eight local cells inside the mesh.
        dirichlet_sides: boundary sides carrying Dirichlet conditions.
    """
    coef = _flux_coefficients(permeability, mobility, h)
    sums = coef.sum(axis=2)
    system = np.zeros((12, 12))
    pressure = np.zeros((12, 8))
    e_dirichlet = np.zeros((12, 12))
    e_neumann = np.zeros((12, 12))
    flux_u = np.zeros((12, 12))
    flux_p = np.zeros((12, 8))
    flux_u_plus = np.zeros((12, 12))
    flux_p_plus = np.zeros((12, 8))
    incidence = np.zeros((8, 12))
    kinds = np.full(12, ABSENT)

    def spread(row: np.ndarray, l: int, axis: int, sign: float = 1.0):
        row[_CELL_SUBFACES[l]] += sign * coef[l, axis]

    for s, (axis, m, p) in enumerate(_SUBFACES):
        if present[m] and present[p]:
            kinds[s] = INTERIOR
            spread(system[s], m, axis)
            spread(system[s], p, axis, -1.0)
            pressure[s, m] += sums[m, axis]
            pressure[s, p] -= sums[p, axis]
            spread(flux_u[s], m, axis)
            flux_p[s, m] = -sums[m, axis]
            spread(flux_u_plus[s], p, axis)
            flux_p_plus[s, p] = -sums[p, axis]
            incidence[m, s] = 1.0
            incidence[p, s] = -1.0
        elif present[m] or present[p]:
            l = m if present[m] else p
            sign = 1.0 if l == m else -1.0
            side = _side_name(axis, int(sign))
            if side in dirichlet_sides:
                kinds[s] = DIRICHLET
                system[s, s] = 1.0
                e_dirichlet[s, s] = 1.0
            else:
                kinds[s] = NEUMANN
                spread(system[s], l, axis, sign)
                pressure[s, l] += sign * sums[l, axis]
                e_neumann[s, s] = 1.0
            spread(flux_u[s], l, axis)
            flux_p[s, l] = -sums[l, axis]
            incidence[l, s] = sign
        else:
            system[s, s] = 1.0

    condition = float(np.linalg.cond(system))
    solved = np.linalg.solve(system, np.hstack([pressure, e_dirichlet, e_neumann]))
    u_p, u_d, u_n = solved[:, :8], solved[:, 8:20], solved[:, 20:]
    cells_plus = flux_u_plus @ u_p + flux_p_plus
    return LocalTransmissibility(
        present=np.asarray(present, dtype=bool),
        kinds=kinds,
        cells=flux_u @ u_p + flux_p,
        dirichlet=flux_u @ u_d,
        neumann=flux_u @ u_n,
        cells_plus=cells_plus,
        dirichlet_plus=flux_u_plus @ u_d,
        neumann_plus=flux_u_plus @ u_n,
        incidence=incidence,
        condition=condition,
    )


@dataclass(frozen=True, eq=False)
class _VertexGroup:
    local: LocalTransmissibility
    cells: np.ndarray
    dirichlet: np.ndarray
    neumann: np.ndarray


class MpfaStencil:
    """
    MPFA-O fluxes on vertex-centred interaction regions of a structured mesh.
    Vertices are grouped by their position class (interior, face, edge,
    corner); each class needs a single local solve.
    """

    def __init__(self, mesh: StructuredMesh, permeability: PermeabilityTensor,
                 fluid: FluidProperties, boundary: BoundarySpec):
        self.mesh = mesh
        self.boundary = boundary
        h = mesh.spacing
        face_values, face_fluxes = _boundary_data(boundary, mesh)
        dirichlet_sides = tuple(face_values)
        n1, n2, n3 = mesh.counts

        vertex = np.arange((n1 + 1) * (n2 + 1) * (n3 + 1))
        vi = vertex % (n1 + 1)
        vj = (vertex // (n1 + 1)) % (n2 + 1)
        vk = vertex // ((n1 + 1) * (n2 + 1))
        position = [
            np.where(v == 0, 0, np.where(v == n, 2, 1))
            for v, n in ((vi, n1), (vj, n2), (vk, n3))
        ]
        codes = position[0] + 3 * position[1] + 9 * position[2]
        unique, inverse = np.unique(codes, return_inverse=True)

        self.groups: List[_VertexGroup] = []
        areas = np.array([h[1] * h[2], h[0] * h[2], h[0] * h[1]]) / 4.0
        for g, code in enumerate(unique):
            members = np.flatnonzero(inverse == g)
            classes = (code % 3, (code // 3) % 3, code // 9)
            present = np.array([
                all((cls != 0 or bit == 1) and (cls != 2 or bit == 0)
                    for cls, bit in zip(classes, _LOCAL_BITS[l]))
                for l in range(8)
            ])
            local = local_transmissibility(
                permeability.entries, fluid.mobility, h, present, dirichlet_sides
            )
            if local.condition > CONDITION_WARNING:
                logger.warning(
                    f"Ill-conditioned MPFA-O interaction region (class {tuple(classes)}): "
                    f"cond = {local.condition:.3e}"
                )
            logger.debug(
                f"MPFA-O class {tuple(classes)}: {len(members)} vertices, cond {local.condition:.3e}"
            )

            cells = np.full((len(members), 8), -1, dtype=np.int64)
            for l in range(8):
                if present[l]:
                    a, b, c = _LOCAL_BITS[l]
                    cells[:, l] = mesh.cell_index(
                        vi[members] - 1 + a, vj[members] - 1 + b, vk[members] - 1 + c
                    )

            dirichlet = np.zeros((len(members), 12))
            neumann = np.zeros((len(members), 12))
            for s, (axis, m, p) in enumerate(_SUBFACES):
                kind = local.kinds[s]
                if kind not in (DIRICHLET, NEUMANN):
                    continue
                l = m if present[m] else p
                side = _side_name(axis, 1 if l == m else -1)
                if kind == DIRICHLET:
                    dirichlet[:, s] = face_values[side][cells[:, l]]
                else:
                    neumann[:, s] = face_fluxes[side] * areas[axis]
            self.groups.append(_VertexGroup(local, cells, dirichlet, neumann))

    def assemble(self) -> Tuple[sp.csr_matrix, np.ndarray]:
        n_cells = self.mesh.n_cells
        matrix = sp.csr_matrix((n_cells, n_cells))
        rhs = np.zeros(n_cells)
        for group in self.groups:
            local = group.local
            cell_matrix = local.incidence @ local.cells
            dirichlet_matrix = local.incidence @ local.dirichlet
            neumann_matrix = local.incidence @ local.neumann
            live = np.flatnonzero(local.present)
            pairs = [(r, c) for r in live for c in live if cell_matrix[r, c] != 0.0]
            for start in range(0, len(group.cells), ASSEMBLY_CHUNK):
                cells = group.cells[start:start + ASSEMBLY_CHUNK]
                rows = np.concatenate([cells[:, r] for r, _ in pairs])
                cols = np.concatenate([cells[:, c] for _, c in pairs])
                vals = np.concatenate([np.full(len(cells), cell_matrix[r, c]) for r, c in pairs])
                matrix = matrix + sp.coo_matrix((vals, (rows, cols)), shape=(n_cells, n_cells)).tocsr()
            contributions = -(
                group.dirichlet @ dirichlet_matrix.T + group.neumann @ neumann_matrix.T
            )
            for l in live:
                rhs += np.bincount(group.cells[:, l], weights=contributions[:, l], minlength=n_cells)
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return matrix, rhs

    def face_fluxes(self, pressure: np.ndarray, from_plus: bool = False) -> FaceFluxes:
        """
        Subface fluxes; with `from_plus` interior subface fluxes are evaluated
        from the plus-side cell.
        """
        minus_all, plus_all, axis_all, flux_all = [], [], [], []
        for group in self.groups:
            local = group.local
            local_p = np.where(group.cells >= 0, pressure[np.maximum(group.cells, 0)], 0.0)
            for s, (axis, m, p) in enumerate(_SUBFACES):
                kind = local.kinds[s]
                if kind == ABSENT:
                    continue
                if from_plus and kind == INTERIOR:
                    ops = (local.cells_plus[s], local.dirichlet_plus[s], local.neumann_plus[s])
                else:
                    ops = (local.cells[s], local.dirichlet[s], local.neumann[s])
                flux = local_p @ ops[0] + group.dirichlet @ ops[1] + group.neumann @ ops[2]
                minus_all.append(group.cells[:, m])
                plus_all.append(group.cells[:, p])
                axis_all.append(np.full(len(flux), axis))
                flux_all.append(flux)
        return FaceFluxes(
            np.concatenate(minus_all), np.concatenate(plus_all),
            np.concatenate(axis_all), np.concatenate(flux_all),
        )


# well couplings

@dataclass(frozen=True, eq=False)
class WellCoupling:
    """
    Linear well source terms Q_K = sum_I W[K, I] c_I (p_w - p[carrier_I]).

    Attributes:
        model: "ds" for the distributed source, "pm" for the Peaceman-type model.
        weights: sparse (n_cells x n_I) distribution of each intersection.
        coefficients: c_I per intersection.
        carriers: cell whose pressure is the p0 of each intersection.
        intersections: the intersections.
        well_pressure: p_w.
        rate_factors: Q_I per unit (p_w - p0), the model's intersection rate.
        zeta: source scaling of the well.
    """

    model: str
    weights: sp.csc_matrix
    coefficients: np.ndarray
    carriers: np.ndarray
    intersections: Tuple[WellIntersection, ...]
    well_pressure: float
    rate_factors: np.ndarray
    zeta: float = 1.0

    @property
    def lengths(self) -> np.ndarray:
        return np.array([i.length for i in self.intersections])

    def matrix(self, n_cells: int) -> sp.csr_matrix:
        n_i = len(self.carriers)
        selection = sp.csr_matrix(
            (np.ones(n_i), (np.arange(n_i), self.carriers)), shape=(n_i, n_cells)
        )
        return (self.weights @ sp.diags(self.coefficients) @ selection).tocsr()

    def rhs(self) -> np.ndarray:
        return self.weights @ (self.coefficients * self.well_pressure)


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """
    The assembled linear system A p = b over all cells, with the cells of
    the Dirichlet region constrained to fixed values.
    """

    mesh: StructuredMesh
    scheme: SchemeChoice
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: np.ndarray
    constrained_values: np.ndarray
    stencil: object = field(repr=False)
    coupling: Optional[WellCoupling] = None

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.constrained))

    def face_fluxes(self, pressure: np.ndarray, **kwargs) -> FaceFluxes:
        return self.stencil.face_fluxes(pressure, **kwargs)


def assemble_fluxes(
    mesh: StructuredMesh,
    permeability: PermeabilityTensor,
    fluid: FluidProperties,
    scheme: SchemeChoice,
    boundary: BoundarySpec,
) -> DiscreteSystem:
    """
    Assemble the flux part of the system.

    Args:
        mesh: the structured mesh.
        permeability: homogeneous tensor.
        fluid: fluid properties.
        scheme: TPFA (diagonal tensors only) or MPFA-O.
        boundary: side conditions and Dirichlet region.
    """
    scheme = SchemeChoice(scheme)
    if scheme == SchemeChoice.TPFA:
        stencil = TpfaStencil(mesh, permeability, fluid, boundary)
    else:
        stencil = MpfaStencil(mesh, permeability, fluid, boundary)
    matrix, rhs = stencil.assemble()
    constrained = boundary.constrained_cells(mesh)
    values = np.zeros(mesh.n_cells)
    if np.any(constrained):
        values[constrained] = boundary.region_value(mesh.cell_centers[constrained])
    logger.info(
        f"Assembled {scheme.value} fluxes: {mesh.n_cells} cells "
        f"({np.count_nonzero(constrained)} constrained), {matrix.nnz} nonzeros"
    )
    return DiscreteSystem(mesh, scheme, matrix, rhs, constrained, values, stencil)


def _with_coupling(system: DiscreteSystem, coupling: WellCoupling) -> DiscreteSystem:
    matrix = (system.matrix + coupling.matrix(system.mesh.n_cells)).tocsr()
    rhs = system.rhs + coupling.rhs()
    return replace(system, matrix=matrix, rhs=rhs, coupling=coupling)


def _usable(intersections: Sequence[WellIntersection], mesh: StructuredMesh
            ) -> Tuple[List[WellIntersection], np.ndarray]:
    kept, carriers = [], []
    for intersection in intersections:
        carrier = int(mesh.locate_cells(np.array(intersection.midpoint)))
        if carrier < 0:
            logger.warning(f"Well intersection outside the mesh skipped: {intersection}")
            continue
        kept.append(intersection)
        carriers.append(carrier)
    return kept, np.array(carriers, dtype=np.int64)


def assemble_well(
    system: DiscreteSystem,
    intersections: Sequence[WellIntersection],
    weights: sp.csc_matrix,
    xi: float,
    k_iso: float,
    fluid: FluidProperties,
    well_pressure: float,
    zeta: float = 1.0,
) -> DiscreteSystem:
    """
    Add the distributed-source coupling: every intersection I injects
    (Q_I/|I|) times its kernel weight into each support cell, with
    Q_I = (|I|/zeta) 2 pi (rho k_I/mu)(p_w - p0) Xi and p0 the pressure of the
    cell containing the midpoint of I.
    """
    kept, carriers = _usable(intersections, system.mesh)
    if len(kept) != len(intersections):
        columns = [i for i, x in enumerate(intersections) if x in kept]
        weights = weights[:, columns]
    coefficient = 2.0 * np.pi * fluid.mobility * k_iso * xi
    lengths = np.array([i.length for i in kept])
    coupling = WellCoupling(
        model="ds",
        weights=sp.csc_matrix(weights),
        coefficients=np.full(len(kept), coefficient),
        carriers=carriers,
        intersections=tuple(kept),
        well_pressure=well_pressure,
        rate_factors=coefficient * lengths / zeta,
        zeta=zeta,
    )
    return _with_coupling(system, coupling)


def assemble_peaceman(
    system: DiscreteSystem,
    intersections: Sequence[WellIntersection],
    permeability: PermeabilityTensor,
    well: WellDescription,
    fluid: FluidProperties,
) -> DiscreteSystem:
    """Add the Peaceman-type coupling Q_K = WI_I (p_w - p_K) per intersection."""
    kept, carriers = _usable(intersections, system.mesh)
    indices = np.array([
        slanted_well_index(WellIndexInput.from_tensor(
            permeability, system.mesh.spacing, well.direction, i.length, well.radius, fluid
        ))
        for i in kept
    ])
    n_i = len(kept)
    weights = sp.csc_matrix(
        (np.ones(n_i), (carriers, np.arange(n_i))), shape=(system.mesh.n_cells, n_i)
    )
    coupling = WellCoupling(
        model="pm",
        weights=weights,
        coefficients=indices,
        carriers=carriers,
        intersections=tuple(kept),
        well_pressure=well.pressure,
        rate_factors=indices,
    )
    return _with_coupling(system, coupling)


# solve

@dataclass(frozen=True)
class SolverOptions:
    """
    Attributes:
        method: "bicgstab" or "direct".
        preconditioner: "jacobi", "ilu" or "none".
        rtol: relative residual target.
        maxiter: iteration cap of the Krylov solver.
        direct_threshold: systems below this size fall back to a direct
            solve when the Krylov solver fails.
    """

    method: str = "bicgstab"
    preconditioner: str = "jacobi"
    rtol: float = 1e-10
    maxiter: int = 10000
    direct_threshold: int = 20000

    def __post_init__(self):
        if self.method not in ("bicgstab", "direct"):
            raise ValueError(f"Unknown solver method: {self.method}")
        if self.preconditioner not in ("jacobi", "ilu", "none"):
            raise ValueError(f"Unknown preconditioner: {self.preconditioner}")


def _preconditioner(matrix: sp.csr_matrix, kind: str):
    if kind == "none":
        return None
    if kind == "ilu":
        factor = spla.spilu(matrix.tocsc(), drop_tol=1e-6, fill_factor=20)
        return spla.LinearOperator(matrix.shape, factor.solve)
    diagonal = matrix.diagonal()
    if np.any(diagonal == 0):
        raise SolverError("Zero diagonal entry; Jacobi preconditioner undefined", float("nan"))
    return sp.diags(1.0 / diagonal)


def _relative_residual(matrix, x, b) -> float:
    return float(np.linalg.norm(b - matrix @ x) / np.linalg.norm(b))


def solve_linear(matrix: sp.csr_matrix, rhs: np.ndarray,
                 options: SolverOptions = SolverOptions()) -> np.ndarray:
    """Solve a sparse linear system to the relative residual options.rtol."""
    n = matrix.shape[0]
    if n == 0:
        return np.zeros(0)
    if np.linalg.norm(rhs) == 0:
        return np.zeros(n)
    if options.method == "direct":
        solution = spla.spsolve(matrix.tocsc(), rhs)
        logger.info(f"Direct solve: n={n}, residual {_relative_residual(matrix, solution, rhs):.3e}")
        return solution

    preconditioner = _preconditioner(matrix, options.preconditioner)
    solution = None
    residual = np.inf
    for attempt in range(2):
        solution, info = spla.bicgstab(
            matrix, rhs, x0=solution, rtol=options.rtol, atol=0.0,
            maxiter=options.maxiter, M=preconditioner,
        )
        residual = _relative_residual(matrix, solution, rhs)
        logger.info(f"BiCGSTAB: n={n}, info={info}, residual {residual:.3e}")
        if residual <= options.rtol:
            return solution
    if n < options.direct_threshold:
        logger.warning(
            f"BiCGSTAB did not converge (residual {residual:.3e}); falling back to a direct solve"
        )
        return spla.spsolve(matrix.tocsc(), rhs)
    raise SolverError(
        f"BiCGSTAB did not converge for {n} unknowns: relative residual {residual:.3e}",
        residual,
    )


def reduced_system(system: DiscreteSystem) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """The system restricted to the free cells, with constrained columns eliminated."""
    free = np.flatnonzero(~system.constrained)
    fixed = np.flatnonzero(system.constrained)
    rows = system.matrix[free]
    matrix = rows[:, free].tocsr()
    rhs = system.rhs[free] - rows[:, fixed] @ system.constrained_values[fixed]
    return matrix, rhs, free


def solve(system: DiscreteSystem, options: SolverOptions = SolverOptions()) -> np.ndarray:
    """Cell pressures of the assembled system."""
    matrix, rhs, free = reduced_system(system)
    pressure = system.constrained_values.copy()
    pressure[free] = solve_linear(matrix, rhs, options)
    return pressure


# post-processing

@dataclass(frozen=True, eq=False)
class SourceTerms:
    """
    Attributes:
        intersection_rates: Q_I of every coupled intersection [kg/s].
        cell_sources: Q_K of every cell [kg/s].
        total: sum of Q_K.
    """

    intersection_rates: np.ndarray
    cell_sources: np.ndarray
    total: float


def source_terms(system: DiscreteSystem, pressure: np.ndarray) -> SourceTerms:
    coupling = system.coupling
    if coupling is None:
        raise ValueError("The system has no well coupling")
    difference = coupling.well_pressure - pressure[coupling.carriers]
    cell = coupling.weights @ (coupling.coefficients * difference)
    return SourceTerms(coupling.rate_factors * difference, np.asarray(cell), float(cell.sum()))


def error_norms(
    system: DiscreteSystem,
    pressure: np.ndarray,
    reference: AnalyticSolution,
) -> Tuple[float, float]:
    """
    Relative L2 errors (E_p, E_q) of the pressure over the free cells and of
    the recovered specific rate Q_I/|I| over the intersections whose
    carrier cell is free.
    """
    mesh = system.mesh
    free = ~system.constrained
    exact = reference.pressure(mesh.cell_centers[free])
    e_p = relative_pressure_error(
        exact, pressure[free], np.full(int(free.sum()), mesh.cell_volume), reference.well.pressure
    )
    terms = source_terms(system, pressure)
    coupling = system.coupling
    in_free = free[coupling.carriers]
    lengths = coupling.lengths[in_free]
    recovered = terms.intersection_rates[in_free] / lengths
    e_q = relative_source_error(reference.well.rate, recovered, lengths)
    return e_p, e_q


def total_source_error(total: float, reference_total: float) -> float:
    """E_Q = |Q - Q_ref| / |Q_ref|."""
    return relative_total_error(total, reference_total)


def dump_system(system: DiscreteSystem, path: str):
    """Write the matrix in Matrix Market coordinate format and the RHS next to it."""
    scipy.io.mmwrite(path, system.matrix)
    np.savetxt(f"{path}.rhs", system.rhs, fmt="%.17g")
