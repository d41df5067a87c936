"""
Peaceman-type well indices for diagonal permeability tensors: the classical
equivalent-radius model for wells along a grid axis and its extension to
slanted wells.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .analytic import FluidProperties
from .tensor_geometry import PermeabilityTensor

EULER_GAMMA = float(np.euler_gamma)
AXIS_TOLERANCE = 1e-12

# perpendicular axis pair of a well along each coordinate axis
_PERPENDICULAR = {0: (1, 2), 1: (2, 0), 2: (0, 1)}


class PeacemanValidityError(ValueError):
    """Raised outside the validity range of the Peaceman model."""


@dataclass(frozen=True)
class WellIndexInput:
    """
    Attributes:
        cell_size: (dx, dy, dz) of the well cell [m].
        permeability: diagonal entries (K11, K22, K33) [m^2].
        direction: unit well direction.
        length: well length inside the cell [m].
        well_radius: r_w [m].
        fluid: fluid properties.
        well_pressure: p_w [Pa].
        block_pressure: p0, the pressure of the well cell [Pa].
    """

    cell_size: Tuple[float, float, float]
    permeability: Tuple[float, float, float]
    direction: Tuple[float, float, float]
    length: float
    well_radius: float
    fluid: FluidProperties = FluidProperties()
    well_pressure: float = 0.0
    block_pressure: float = 0.0

    def __post_init__(self):
        if any(d <= 0 for d in self.cell_size):
            raise ValueError(f"Cell dimensions must be positive: {self.cell_size}")
        if any(k <= 0 for k in self.permeability):
            raise ValueError(f"Permeabilities must be positive: {self.permeability}")
        if self.well_radius <= 0:
            raise ValueError(f"Well radius must be positive: {self.well_radius}")
        norm = np.linalg.norm(self.direction)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"Well direction must be a unit vector: {self.direction}")

    @classmethod
    def from_tensor(
        cls,
        permeability: PermeabilityTensor,
        cell_size: Sequence[float],
        direction: Sequence[float],
        length: float,
        well_radius: float,
        fluid: FluidProperties = FluidProperties(),
        well_pressure: float = 0.0,
        block_pressure: float = 0.0,
    ) -> "WellIndexInput":
        if not permeability.is_diagonal:
            raise PeacemanValidityError(
                "The Peaceman well model needs a diagonal permeability tensor"
            )
        return cls(
            tuple(float(d) for d in cell_size),
            tuple(float(k) for k in np.diag(permeability.entries)),
            tuple(float(p) for p in direction),
            float(length),
            float(well_radius),
            fluid,
            well_pressure,
            block_pressure,
        )

    def axis(self) -> int:
        """Index of the coordinate axis the well is aligned with."""
        direction = np.abs(np.asarray(self.direction))
        axis = int(np.argmax(direction))
        if abs(direction[axis] - 1.0) > AXIS_TOLERANCE:
            raise ValueError(f"Well is not aligned with a coordinate axis: {self.direction}")
        return axis


def _check_radius(r0: float, well_radius: float) -> float:
    if r0 <= well_radius:
        raise PeacemanValidityError(
            f"Equivalent radius {r0:.6g} m does not exceed the well radius {well_radius} m; "
            "the grid is too fine for the Peaceman model"
        )
    return r0


def equivalent_radius(data: WellIndexInput) -> float:
    """Peaceman equivalent radius r0 of an axis-aligned well."""
    first, second = _PERPENDICULAR[data.axis()]
    k1, k2 = data.permeability[first], data.permeability[second]
    d1, d2 = data.cell_size[first], data.cell_size[second]
    numerator = np.sqrt(np.sqrt(k2 / k1) * d1 ** 2 + np.sqrt(k1 / k2) * d2 ** 2)
    denominator = (k1 / k2) ** 0.25 + (k2 / k1) ** 0.25
    return float(np.exp(-EULER_GAMMA) / 2.0 * numerator / denominator)


def peaceman_well_index(data: WellIndexInput) -> float:
    """WI with Q = WI (p_w - p0) for an axis-aligned well."""
    first, second = _PERPENDICULAR[data.axis()]
    k = np.sqrt(data.permeability[first] * data.permeability[second])
    r0 = _check_radius(equivalent_radius(data), data.well_radius)
    return float(2.0 * np.pi * data.fluid.mobility * data.length * k / np.log(r0 / data.well_radius))


def peaceman_source(data: WellIndexInput) -> float:
    """Q = 2 pi (rho/mu)(p_w - p0) L sqrt(K11 K22) / ln(r0/r_w) [kg/s]."""
    return peaceman_well_index(data) * (data.well_pressure - data.block_pressure)


def slanted_permeability(data: WellIndexInput) -> float:
    """Effective permeability k of a slanted well."""
    k11, k22, k33 = data.permeability
    p1, p2, p3 = (float(p) ** 2 for p in data.direction)
    return float(np.sqrt(p1 * k22 * k33 + p2 * k11 * k33 + p3 * k11 * k22))


def slanted_equivalent_radius(data: WellIndexInput) -> float:
    """Equivalent radius r0 of a slanted well."""
    k11, k22, k33 = data.permeability
    dx, dy, dz = data.cell_size
    p1, p2, p3 = (float(p) ** 2 for p in data.direction)
    length1 = (np.sqrt(k22 / k33) * dz ** 2 * p1 + np.sqrt(k33 / k11) * dx ** 2 * p2
               + np.sqrt(k11 / k22) * dy ** 2 * p3)
    length2 = (np.sqrt(k33 / k22) * dy ** 2 * p1 + np.sqrt(k11 / k33) * dz ** 2 * p2
               + np.sqrt(k22 / k11) * dx ** 2 * p3)
    a1 = np.sqrt(k22 / k33) * p1 + np.sqrt(k33 / k11) * p2 + np.sqrt(k11 / k22) * p3
    a2 = np.sqrt(k33 / k22) * p1 + np.sqrt(k11 / k33) * p2 + np.sqrt(k22 / k11) * p3
    return float(np.exp(-EULER_GAMMA) / 2.0 * np.sqrt(length1 + length2) / (np.sqrt(a1) + np.sqrt(a2)))


def slanted_well_index(data: WellIndexInput) -> float:
    """WI of a slanted well segment."""
    r0 = _check_radius(slanted_equivalent_radius(data), data.well_radius)
    k = slanted_permeability(data)
    return float(2.0 * np.pi * data.fluid.mobility * data.length * k / np.log(r0 / data.well_radius))


def slanted_well_source(data: WellIndexInput) -> float:
    """Q of a slanted well segment [kg/s]."""
    return slanted_well_index(data) * (data.well_pressure - data.block_pressure)
