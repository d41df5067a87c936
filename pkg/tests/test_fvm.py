"""
Tests for the finite-volume assembly, the well couplings and the linear solve.
"""

import tempfile
import unittest
import sys
import os

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ds_well.analytic import FluidProperties, KernelSpec, normalized_focal, xi_anisotropic
from ds_well.fvm import (
    SchemeChoice,
    SchemeError,
    SolverError,
    SolverOptions,
    assemble_fluxes,
    assemble_peaceman,
    assemble_well,
    dump_system,
    reduced_system,
    solve,
    solve_linear,
    source_terms,
)
from ds_well.kernels import clear_weight_cache, kernel_weights
from ds_well.mesh import SIDES, Box, BoundarySpec, Dirichlet, Neumann, build_mesh, intersect_well
from ds_well.tensor_geometry import PermeabilityTensor, WellDescription, build_transform
from ds_well.utils.rotations import permeability_from_angles, well_direction_from_angles

DIRECT = SolverOptions(method="direct")
FLUID = FluidProperties()


def full_tensor(alpha=10.0):
    return PermeabilityTensor.from_matrix(permeability_from_angles(alpha, -20.0, -20.0))


def diagonal_tensor():
    return PermeabilityTensor.from_matrix(np.diag([1e-12, 3e-12, 0.5e-12]))


def cube_mesh(counts=(4, 4, 4), half=2.0):
    return build_mesh(([-half] * 3, [half] * 3), counts)


def test_tpfa_rejects_full_tensor():
    mesh = cube_mesh()
    with pytest.raises(SchemeError):
        assemble_fluxes(mesh, full_tensor(), FLUID, SchemeChoice.TPFA, BoundarySpec.uniform(Dirichlet(0.0)))


def test_mpfa_reproduces_linear_pressure():
    mesh = build_mesh(([0.0, 0.0, 0.0], [3.0, 2.0, 4.0]), (3, 4, 4))
    gradient = np.array([2.0e4, -1.0e4, 3.0e4])

    def linear(x):
        return 1e6 + x @ gradient

    system = assemble_fluxes(mesh, full_tensor(50.0), FLUID, "mpfa-o", BoundarySpec.uniform(Dirichlet(linear)))
    pressure = solve(system, DIRECT)
    np.testing.assert_allclose(pressure, linear(mesh.cell_centers), rtol=1e-9)


def test_tpfa_and_mpfa_agree_for_diagonal_tensor():
    mesh = build_mesh(([0.0, 0.0, 0.0], [4.0, 3.0, 5.0]), (4, 3, 5))
    sides = {side: Neumann() for side in SIDES}
    sides["x-"] = Dirichlet(1e5)
    sides["x+"] = Dirichlet(lambda x: 2e5 + 1e4 * x[:, 2])
    sides["z+"] = Neumann(1e-3)
    boundary = BoundarySpec(sides)
    pressures = []
    for scheme in ("tpfa", "mpfa-o"):
        system = assemble_fluxes(mesh, diagonal_tensor(), FLUID, scheme, boundary)
        pressures.append(solve(system, DIRECT))
    np.testing.assert_allclose(pressures[1], pressures[0], rtol=1e-10)


def test_subface_fluxes_are_continuous():
    mesh = cube_mesh((3, 3, 3))
    sides = {side: Dirichlet(0.0) if side[0] == "x" else Neumann(0.0) for side in SIDES}
    system = assemble_fluxes(mesh, full_tensor(100.0), FLUID, "mpfa-o", BoundarySpec(sides))
    pressure = np.random.default_rng(0).uniform(0.0, 1e5, mesh.n_cells)
    minus = system.face_fluxes(pressure)
    plus = system.face_fluxes(pressure, from_plus=True)
    scale = np.abs(minus.flux).max()
    np.testing.assert_allclose(plus.flux, minus.flux, rtol=0.0, atol=1e-10 * scale)


class TestWellCouplings(unittest.TestCase):
    """Sources of the coupled system balance the boundary outflow."""

    def setUp(self):
        clear_weight_cache()
        self.mesh = cube_mesh((6, 6, 6), half=30.0)
        self.boundary = BoundarySpec.uniform(Dirichlet(1e5))
        direction = well_direction_from_angles(20.0, 20.0)
        self.well = WellDescription(np.zeros(3), direction, 0.1, 2e5, None)

    def tearDown(self):
        clear_weight_cache()

    def test_distributed_source_balance(self):
        permeability = full_tensor(10.0)
        chain = build_transform(permeability, self.well)
        spec = KernelSpec(normalized_focal(chain), 1.0)
        intersections = intersect_well(self.mesh, self.well, clip=Box((-20.0,) * 3, (20.0,) * 3))
        weights = kernel_weights(self.mesh, spec, chain, intersections, spacing=0.2)
        system = assemble_fluxes(self.mesh, permeability, FLUID, "mpfa-o", self.boundary)
        system = assemble_well(system, intersections, weights.matrix, xi_anisotropic(spec, 0.1),
                               chain.k_iso, FLUID, self.well.pressure, chain.zeta)
        pressure = solve(system, DIRECT)
        terms = source_terms(system, pressure)
        self.assertGreater(terms.total, 0.0)
        self.assertAlmostEqual(terms.intersection_rates.sum() / terms.total, 1.0, places=10)
        outflow = system.face_fluxes(pressure).boundary_outflow()
        self.assertAlmostEqual(outflow / terms.total, 1.0, places=8)

    def test_peaceman_balance(self):
        permeability = diagonal_tensor()
        system = assemble_fluxes(self.mesh, permeability, FLUID, "tpfa", self.boundary)
        intersections = intersect_well(self.mesh, self.well)
        system = assemble_peaceman(system, intersections, permeability, self.well, FLUID)
        pressure = solve(system, DIRECT)
        terms = source_terms(system, pressure)
        self.assertEqual(len(terms.intersection_rates), len(intersections))
        np.testing.assert_array_equal(
            np.flatnonzero(terms.cell_sources), np.unique(system.coupling.carriers)
        )
        outflow = system.face_fluxes(pressure).boundary_outflow()
        self.assertAlmostEqual(outflow / terms.total, 1.0, places=8)

    def test_no_coupling(self):
        system = assemble_fluxes(self.mesh, diagonal_tensor(), FLUID, "tpfa", self.boundary)
        with self.assertRaises(ValueError):
            source_terms(system, np.zeros(self.mesh.n_cells))


def test_dirichlet_region_keeps_values():
    mesh = cube_mesh((4, 4, 4))
    free = Box((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    boundary = BoundarySpec.uniform(Dirichlet(0.0), free_region=free,
                                    region_value=lambda x: 1e5 + 1e4 * x[:, 0])
    system = assemble_fluxes(mesh, full_tensor(), FLUID, "mpfa-o", boundary)
    assert system.n_free == 8
    pressure = solve(system, DIRECT)
    constrained = system.constrained
    np.testing.assert_array_equal(pressure[constrained], system.constrained_values[constrained])
    assert np.all(np.isfinite(pressure))


class TestSolveLinear(unittest.TestCase):
    """Krylov solve, direct fallback and failure reporting."""

    def setUp(self):
        mesh = cube_mesh((6, 6, 6))
        system = assemble_fluxes(mesh, full_tensor(100.0), FLUID, "mpfa-o",
                                 BoundarySpec.uniform(Dirichlet(0.0)))
        self.matrix = system.matrix
        self.rhs = np.random.default_rng(1).normal(size=mesh.n_cells)

    def test_matches_direct(self):
        expected = spla.spsolve(self.matrix.tocsc(), self.rhs)
        for preconditioner in ("jacobi", "ilu", "none"):
            options = SolverOptions(preconditioner=preconditioner, rtol=1e-11)
            np.testing.assert_allclose(solve_linear(self.matrix, self.rhs, options), expected,
                                       rtol=1e-6, atol=1e-6 * np.abs(expected).max())

    def test_trivial_systems(self):
        self.assertEqual(solve_linear(sp.csr_matrix((0, 0)), np.zeros(0)).shape, (0,))
        np.testing.assert_array_equal(solve_linear(self.matrix, np.zeros(len(self.rhs))), 0.0)

    def test_failure(self):
        options = SolverOptions(maxiter=1, direct_threshold=0)
        with self.assertRaises(SolverError) as context:
            solve_linear(self.matrix, self.rhs, options)
        self.assertGreater(context.exception.residual, options.rtol)

    def test_direct_fallback(self):
        options = SolverOptions(maxiter=1)
        expected = spla.spsolve(self.matrix.tocsc(), self.rhs)
        np.testing.assert_allclose(solve_linear(self.matrix, self.rhs, options), expected, rtol=1e-10)

    def test_invalid_options(self):
        with self.assertRaises(ValueError):
            SolverOptions(method="cg")
        with self.assertRaises(ValueError):
            SolverOptions(preconditioner="amg")


def test_dump_system():
    mesh = cube_mesh((2, 2, 2))
    system = assemble_fluxes(mesh, diagonal_tensor(), FLUID, "tpfa", BoundarySpec.uniform(Dirichlet(1.0)))
    with tempfile.TemporaryDirectory() as directory:
        path = os.path.join(directory, "system.mtx")
        dump_system(system, path)
        matrix = scipy.io.mmread(path)
        rhs = np.loadtxt(f"{path}.rhs")
    np.testing.assert_allclose(matrix.toarray(), system.matrix.toarray(), rtol=1e-15)
    np.testing.assert_allclose(rhs, system.rhs, rtol=1e-15)


def mixed_boundary():
    sides = {side: Neumann() for side in SIDES}
    sides["x-"] = Dirichlet(1e5)
    sides["y+"] = Dirichlet(lambda x: 2e5 + 1e4 * x[:, 0])
    sides["z-"] = Neumann(1e-3)
    return BoundarySpec(sides)


def test_tpfa_matrix_is_symmetric_positive_definite():
    mesh = build_mesh(([0.0, 0.0, 0.0], [4.0, 3.0, 5.0]), (4, 3, 5))
    system = assemble_fluxes(mesh, diagonal_tensor(), FLUID, "tpfa", mixed_boundary())
    matrix, rhs, free = reduced_system(system)
    dense = matrix.toarray()
    assert len(free) == mesh.n_cells - int(system.constrained.sum())
    np.testing.assert_allclose(dense, dense.T, rtol=0.0, atol=1e-12 * np.abs(dense).max())
    assert np.all(np.diag(dense) > 0.0)
    np.linalg.cholesky(dense)


def test_solution_is_independent_of_cell_ordering():
    mesh = build_mesh(([0.0, 0.0, 0.0], [4.0, 3.0, 5.0]), (4, 3, 5))
    system = assemble_fluxes(mesh, full_tensor(10.0), FLUID, "mpfa-o", mixed_boundary())
    matrix, rhs, _ = reduced_system(system)
    order = np.random.default_rng(7).permutation(matrix.shape[0])
    permuted = matrix[order][:, order].tocsr()
    x = solve_linear(matrix, rhs, DIRECT)
    y = solve_linear(permuted, rhs[order], DIRECT)
    np.testing.assert_allclose(y, x[order], rtol=1e-10)


def run():
    test_tpfa_rejects_full_tensor()
    test_mpfa_reproduces_linear_pressure()
    test_tpfa_and_mpfa_agree_for_diagonal_tensor()
    test_subface_fluxes_are_continuous()
    test_dirichlet_region_keeps_values()
    test_dump_system()
    test_tpfa_matrix_is_symmetric_positive_definite()
    test_solution_is_independent_of_cell_ordering()
    unittest.main(module=__name__, exit=False)


if __name__ == "__main__":
    run()
