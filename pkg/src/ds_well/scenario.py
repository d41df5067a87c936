"""
Scenario configuration: nested YAML tables mapped onto frozen dataclasses,
the built-in presets, and the construction of the runtime objects
(permeability, well, kernel, mesh, boundary) from a scenario.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .analytic import AnalyticSolution, FluidProperties, KernelSpec, normalized_focal
from .fvm import SchemeChoice, SolverOptions
from .mesh import SIDES, Box, BoundarySpec, Dirichlet, Neumann, StructuredMesh, padded_mesh
from .tensor_geometry import PermeabilityTensor, TransformChain, WellDescription
from .utils.rotations import PERMEABILITY_SCALE, permeability_from_angles, well_direction_from_angles

logger = logging.getLogger(__name__)

Vector = Tuple[float, float, float]


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    if isinstance(value, dict):
        return {k: _thaw(v) for k, v in value.items()}
    return value


def _coerce(instance, floats: Sequence[str] = (), ints: Sequence[str] = (),
            vectors: Sequence[str] = ()):
    """Normalise numeric fields (YAML may load 1e-12 as a string)."""
    for name in floats:
        value = getattr(instance, name)
        if value is not None:
            object.__setattr__(instance, name, float(value))
    for name in ints:
        value = getattr(instance, name)
        if value is not None:
            object.__setattr__(instance, name, int(value))
    for name in vectors:
        value = getattr(instance, name)
        if value is not None:
            object.__setattr__(instance, name, _freeze_numbers(value))


def _freeze_numbers(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze_numbers(v) for v in value)
    return float(value)


class _Table:
    """from_dict / to_dict for the configuration dataclasses."""

    @classmethod
    def from_dict(cls, table: Optional[Dict[str, Any]]):
        if table is None:
            return cls()
        if not isinstance(table, dict):
            raise ValueError(f"[{cls.__name__}] must be a mapping, got {type(table).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(table) - known)
        if unknown:
            raise ValueError(f"Unknown keys in [{cls.__name__}]: {unknown}")
        return cls(**{k: _freeze(v) for k, v in table.items()})

    def to_dict(self) -> Dict[str, Any]:
        return _thaw(asdict(self))


@dataclass(frozen=True)
class FluidConfig(_Table):
    density: float = 1000.0
    viscosity: float = 1e-3

    def __post_init__(self):
        _coerce(self, floats=("density", "viscosity"))

    def build(self) -> FluidProperties:
        return FluidProperties(self.density, self.viscosity)


@dataclass(frozen=True)
class PermeabilityConfig(_Table):
    """K(gamma1, gamma2) from the anisotropy ratio, or an explicit matrix."""

    alpha: float = 1.0
    gamma1: float = -20.0
    gamma2: float = -20.0
    scale: float = PERMEABILITY_SCALE
    matrix: Optional[Tuple[Vector, Vector, Vector]] = None

    def __post_init__(self):
        _coerce(self, floats=("alpha", "gamma1", "gamma2", "scale"), vectors=("matrix",))

    def build(self) -> PermeabilityTensor:
        if self.matrix is not None:
            return PermeabilityTensor.from_matrix(np.array(self.matrix))
        return PermeabilityTensor.from_matrix(
            permeability_from_angles(self.alpha, self.gamma1, self.gamma2, self.scale)
        )


@dataclass(frozen=True)
class WellConfig(_Table):
    """
    An infinite well through `point` along R1(beta1) R2(beta2) e3, or a
    finite well between `endpoints`.  `rate` None means pressure-driven.
    """

    beta1: float = 20.0
    beta2: float = 20.0
    point: Vector = (0.0, 0.0, 0.0)
    endpoints: Optional[Tuple[Vector, Vector]] = None
    radius: float = 0.1
    pressure: float = 1e6
    rate: Optional[float] = 1.0

    def __post_init__(self):
        _coerce(self, floats=("beta1", "beta2", "radius", "pressure", "rate"),
                vectors=("point", "endpoints"))

    def build(self) -> WellDescription:
        if self.endpoints is not None:
            start, end = self.endpoints
            return WellDescription.between(start, end, self.radius, self.pressure, self.rate)
        return WellDescription(
            np.array(self.point), well_direction_from_angles(self.beta1, self.beta2),
            self.radius, self.pressure, self.rate,
        )


@dataclass(frozen=True)
class KernelConfig(_Table):
    """
    Kernel radii in the normalised Joukowsky frame.

    Attributes:
        inner: "f" (focal distance), "well" (the well radius) or a value [m].
        outer_ratio: rho_o / r_w, used when `outer` is None.
        outer: rho_o [m].
        adaptive: scale rho_o with h_max relative to the coarsest mesh.
        simplified_jacobian: use the far-field Joukowsky factor.
        spacing: sampling spacing; None for (rho_o - rho_i)/20.
    """

    inner: Union[str, float] = "f"
    outer_ratio: Optional[float] = 100.0
    outer: Optional[float] = None
    adaptive: bool = False
    simplified_jacobian: bool = False
    spacing: Optional[float] = None

    def __post_init__(self):
        _coerce(self, floats=("outer_ratio", "outer", "spacing"))
        if isinstance(self.inner, str):
            if self.inner not in ("f", "well"):
                try:
                    object.__setattr__(self, "inner", float(self.inner))
                except ValueError:
                    raise ValueError(f"Kernel inner radius must be 'f', 'well' or a number: {self.inner}")
        else:
            object.__setattr__(self, "inner", float(self.inner))
        if self.outer is None and self.outer_ratio is None:
            raise ValueError("Kernel needs either outer or outer_ratio")

    def outer_radius(self, well_radius: float, scale: float = 1.0) -> float:
        base = self.outer if self.outer is not None else self.outer_ratio * well_radius
        return base * scale

    def build(self, chain: TransformChain, scale: float = 1.0) -> KernelSpec:
        """
        Args:
            chain: transform chain of the well.
            scale: factor on rho_o (h_max / h_max of the coarsest mesh for
                adaptive kernels).
        """
        r_w = chain.well.radius
        if self.inner == "f":
            inner = normalized_focal(chain)
        elif self.inner == "well":
            inner = r_w
        else:
            inner = float(self.inner)
        return KernelSpec(inner, self.outer_radius(r_w, scale), self.spacing,
                          self.simplified_jacobian)


@dataclass(frozen=True)
class MeshConfig(_Table):
    """
    `counts` cells over the free region; the mesh is extended with the same
    spacing over `domain`, whose cells outside the free region are
    constrained to the analytical solution.
    """

    free_region: Tuple[Vector, Vector] = ((-100.0, -100.0, 0.0), (100.0, 100.0, 100.0))
    domain: Optional[Tuple[Vector, Vector]] = ((-100.0, -100.0, -50.0), (100.0, 100.0, 150.0))
    counts: Tuple[int, int, int] = (20, 20, 10)

    def __post_init__(self):
        _coerce(self, vectors=("free_region", "domain"))
        object.__setattr__(self, "counts", tuple(int(n) for n in self.counts))

    @property
    def free_box(self) -> Box:
        return Box(*self.free_region)

    @property
    def domain_box(self) -> Box:
        return Box(*(self.domain or self.free_region))

    def counts_at(self, level: int) -> Tuple[int, int, int]:
        return tuple(n * 2 ** level for n in self.counts)

    def build(self, level: int = 0, counts: Optional[Sequence[int]] = None) -> StructuredMesh:
        counts = tuple(counts) if counts is not None else self.counts_at(level)
        return padded_mesh(self.free_box, counts, self.domain_box)


def _side_condition(value, reference: Optional[AnalyticSolution]):
    if isinstance(value, dict):
        if set(value) == {"neumann"}:
            return Neumann(float(value["neumann"]))
        if set(value) == {"dirichlet"}:
            return Dirichlet(float(value["dirichlet"]))
        raise ValueError(f"Unknown boundary condition table: {value}")
    if value == "noflow":
        return Neumann(0.0)
    if value == "analytic":
        if reference is None:
            raise ValueError("An 'analytic' boundary needs a well rate and a kernel")
        return Dirichlet(reference.pressure)
    try:
        return Dirichlet(float(value))
    except (TypeError, ValueError):
        raise ValueError(f"Unknown boundary condition: {value!r}")


@dataclass(frozen=True)
class BoundaryConfig(_Table):
    """
    Condition per side: "analytic", "noflow", a Dirichlet value, or a table
    {neumann: flux} / {dirichlet: value}.  `region` is the value of the
    constrained cells outside the free region ("analytic").
    """

    sides: Dict[str, Any] = field(default_factory=lambda: {side: "analytic" for side in SIDES})
    region: str = "analytic"

    def __post_init__(self):
        sides = dict(self.sides)
        unknown = sorted(set(sides) - set(SIDES))
        if unknown:
            raise ValueError(f"Unknown boundary sides: {unknown}")
        for side in SIDES:
            sides.setdefault(side, "noflow")
        object.__setattr__(self, "sides", sides)
        if self.region != "analytic":
            raise ValueError(f"The constrained region only supports 'analytic': {self.region}")

    @classmethod
    def from_dict(cls, table):
        if table is None:
            return cls()
        table = dict(table)
        unknown = sorted(set(table) - {"sides", "region"})
        if unknown:
            raise ValueError(f"Unknown keys in [BoundaryConfig]: {unknown}")
        return cls(**table)

    def to_dict(self) -> Dict[str, Any]:
        return {"sides": dict(self.sides), "region": self.region}

    def build(self, mesh_config: MeshConfig, reference: Optional[AnalyticSolution]) -> BoundarySpec:
        sides = {side: _side_condition(value, reference) for side, value in self.sides.items()}
        free = mesh_config.free_box
        padded = mesh_config.domain_box != free
        if padded and reference is None:
            raise ValueError("A padded domain needs the analytical reference for its constrained cells")
        return BoundarySpec(
            sides,
            free_region=free if padded else None,
            region_value=reference.pressure if padded else None,
        )


@dataclass(frozen=True)
class SolverConfig(_Table):
    scheme: str = "mpfa-o"
    method: str = "bicgstab"
    preconditioner: str = "jacobi"
    rtol: float = 1e-10
    maxiter: int = 10000
    direct_threshold: int = 20000

    def __post_init__(self):
        _coerce(self, floats=("rtol",), ints=("maxiter", "direct_threshold"))
        SchemeChoice(self.scheme)

    @property
    def scheme_choice(self) -> SchemeChoice:
        return SchemeChoice(self.scheme)

    def options(self) -> SolverOptions:
        return SolverOptions(self.method, self.preconditioner, self.rtol, self.maxiter,
                             self.direct_threshold)


@dataclass(frozen=True)
class OutputConfig(_Table):
    """Field exports and the lattice of the analytical field export."""

    csv: bool = True
    vtk: bool = True
    lattice: Tuple[int, int, int] = (41, 41, 21)

    def __post_init__(self):
        object.__setattr__(self, "lattice", tuple(int(n) for n in self.lattice))


@dataclass(frozen=True)
class ConvergenceConfig(_Table):
    """`full_scale` runs four levels, enough for all three tabulated rates."""

    levels: int = 3
    alphas: Tuple[float, ...] = (1.0, 10.0, 50.0, 100.0)
    full_scale: bool = False

    def __post_init__(self):
        _coerce(self, ints=("levels",), vectors=("alphas",))

    def test_levels(self) -> int:
        return 4 if self.full_scale else self.levels


@dataclass(frozen=True)
class KernelStudyConfig(_Table):
    """
    Outer kernel radii for a thin well (rho_o >> r_w) and a thick well
    (rho_o close to r_w), each run with the exact and the simplified
    Joukowsky factor.
    """

    alpha: float = 10.0
    far_radius: float = 0.1
    far_ratios: Tuple[float, ...] = (25.0, 50.0, 100.0, 200.0)
    near_radius: float = 10.0
    near_ratios: Tuple[float, ...] = (2.0, 3.0, 4.0)

    def __post_init__(self):
        _coerce(self, floats=("alpha", "far_radius", "near_radius"),
                vectors=("far_ratios", "near_ratios"))


@dataclass(frozen=True)
class RotationSweepConfig(_Table):
    """Angle grid [start, stop] in degrees; mode "permeability", "well" or "both"."""

    mode: str = "both"
    start: float = 0.0
    stop: float = 90.0
    step: float = 10.0

    def __post_init__(self):
        _coerce(self, floats=("start", "stop", "step"))
        if self.mode not in ("permeability", "well", "both"):
            raise ValueError(f"Unknown rotation sweep mode: {self.mode}")


@dataclass(frozen=True)
class CompareConfig(_Table):
    """
    Test grids are the mesh counts refined `levels - 1` times; the
    reference grid must be finer than all of them.
    """

    levels: int = 2
    reference_counts: Tuple[int, int, int] = (40, 80, 40)
    full_scale: bool = False

    def __post_init__(self):
        _coerce(self, ints=("levels",))
        object.__setattr__(self, "reference_counts", tuple(int(n) for n in self.reference_counts))

    def reference(self) -> Tuple[int, int, int]:
        return (160, 320, 160) if self.full_scale else self.reference_counts

    def test_levels(self) -> int:
        return 4 if self.full_scale else self.levels


_TABLES = {
    "fluid": FluidConfig,
    "permeability": PermeabilityConfig,
    "well": WellConfig,
    "kernel": KernelConfig,
    "mesh": MeshConfig,
    "boundary": BoundaryConfig,
    "solver": SolverConfig,
    "outputs": OutputConfig,
    "convergence": ConvergenceConfig,
    "kernel_study": KernelStudyConfig,
    "rotation_sweep": RotationSweepConfig,
    "compare": CompareConfig,
}


@dataclass(frozen=True)
class Scenario:
    """A complete experiment description."""

    name: str = "default"
    fluid: FluidConfig = FluidConfig()
    permeability: PermeabilityConfig = PermeabilityConfig()
    well: WellConfig = WellConfig()
    kernel: KernelConfig = KernelConfig()
    mesh: MeshConfig = MeshConfig()
    boundary: BoundaryConfig = field(default_factory=BoundaryConfig)
    solver: SolverConfig = SolverConfig()
    outputs: OutputConfig = OutputConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()
    kernel_study: KernelStudyConfig = KernelStudyConfig()
    rotation_sweep: RotationSweepConfig = RotationSweepConfig()
    compare: CompareConfig = CompareConfig()

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "Scenario":
        data = dict(data or {})
        unknown = sorted(set(data) - set(_TABLES) - {"name"})
        if unknown:
            raise ValueError(f"Unknown scenario tables: {unknown}")
        kwargs = {name: table.from_dict(data.get(name)) for name, table in _TABLES.items()}
        return cls(name=str(data.get("name", "default")), **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"name": self.name}
        for name in _TABLES:
            result[name] = getattr(self, name).to_dict()
        return result

    @classmethod
    def from_yaml(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as file:
            return cls.from_dict(yaml.safe_load(file))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def with_changes(self, **tables) -> "Scenario":
        """Copy with some tables replaced, e.g. with_changes(well=...)."""
        return replace(self, **tables)

    # runtime objects

    def build_permeability(self) -> PermeabilityTensor:
        return self.permeability.build()

    def build_well(self) -> WellDescription:
        return self.well.build()

    def build_fluid(self) -> FluidProperties:
        return self.fluid.build()


def default_scenario() -> Scenario:
    """The infinite-well convergence setup with Dirichlet padding."""
    return Scenario()


def comparison_scenario() -> Scenario:
    """Finite slanted well in a closed box driven by two Dirichlet planes."""
    return Scenario(
        name="comparison",
        permeability=PermeabilityConfig(alpha=0.1, gamma1=0.0, gamma2=90.0),
        well=WellConfig(
            endpoints=((-20.0, -50.0, 25.0), (20.0, 50.0, 75.0)),
            radius=0.1,
            pressure=1e6,
            rate=None,
        ),
        kernel=KernelConfig(inner="f", outer_ratio=100.0, adaptive=False),
        mesh=MeshConfig(
            free_region=((-50.0, -100.0, 0.0), (50.0, 100.0, 100.0)),
            domain=None,
            counts=(10, 20, 10),
        ),
        boundary=BoundaryConfig(
            sides={"x-": "noflow", "x+": "noflow", "y-": 1e5, "y+": 3e5,
                   "z-": "noflow", "z+": "noflow"},
        ),
    )


PRESETS = {
    "default": default_scenario,
    "comparison": comparison_scenario,
}


def load_scenario(path: Optional[str] = None, preset: Optional[str] = None) -> Scenario:
    """Scenario from a YAML file (overriding a preset) or a preset alone."""
    base = PRESETS.get(preset or "default")
    if base is None:
        raise ValueError(f"Unknown preset: {preset}; choose from {sorted(PRESETS)}")
    if path is None:
        return base()
    with open(path, "r", encoding="utf-8") as file:
        data = yaml.safe_load(file) or {}
    if not isinstance(data, dict):
        raise ValueError(f"Scenario file {path} must contain a mapping")
    merged = base().to_dict()
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict) and key != "boundary":
            merged[key] = {**merged[key], **value}
        else:
            merged[key] = value
    return Scenario.from_dict(merged)
