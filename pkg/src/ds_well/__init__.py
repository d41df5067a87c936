from .tensor_geometry import PermeabilityTensor, TransformChain, WellDescription, build_transform
from .conformal import JoukowskyMap
from .analytic import AnalyticSolution, FluidProperties, KernelSpec
from .kernels import KernelField, kernel_weights
from .mesh import BoundarySpec, Dirichlet, Neumann, StructuredMesh, build_mesh, intersect_well
from .fvm import SchemeChoice, SolverOptions, assemble_fluxes, assemble_peaceman, assemble_well, solve
from .peaceman import WellIndexInput, peaceman_well_index, slanted_well_index
from .scenario import Scenario, load_scenario
from .experiments import ModelResult, run_model
__all__ = [
    "PermeabilityTensor", "TransformChain", "WellDescription", "build_transform",
    "JoukowskyMap",
    "AnalyticSolution", "FluidProperties", "KernelSpec",
    "KernelField", "kernel_weights",
    "BoundarySpec", "Dirichlet", "Neumann", "StructuredMesh", "build_mesh", "intersect_well",
    "SchemeChoice", "SolverOptions", "assemble_fluxes", "assemble_peaceman", "assemble_well", "solve",
    "WellIndexInput", "peaceman_well_index", "slanted_well_index",
    "Scenario", "load_scenario",
    "ModelResult", "run_model",
]
