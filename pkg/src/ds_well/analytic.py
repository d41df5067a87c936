"""
Closed-form pressure around a straight well in a homogeneous anisotropic
medium, singular and kernel-regularised, and the flux-scaling factors that
relate the well pressure to the well rate.

Radii of kernels and pressure branches are measured in the normalised
Joukowsky frame w_hat = w r_w / r_o, in which the well bore is the circle
|w_hat| = r_w.  In the isotropic case w_hat is the distance from the axis.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .conformal import JoukowskyMap
from .tensor_geometry import (
    PermeabilityTensor,
    TransformChain,
    WellDescription,
    build_transform,
)

logger = logging.getLogger(__name__)


class InadmissibleKernelError(ValueError):
    """Raised for kernel radii that give no positive flux-scaling factor."""


@dataclass(frozen=True)
class FluidProperties:
    """Density [kg/m^3] and dynamic viscosity [Pa s] of the fluid."""

    density: float = 1000.0
    viscosity: float = 1e-3

    def __post_init__(self):
        if not self.density > 0:
            raise ValueError(f"Fluid density must be positive: {self.density}")
        if not self.viscosity > 0:
            raise ValueError(f"Fluid viscosity must be positive: {self.viscosity}")

    @property
    def mobility(self) -> float:
        """rho / mu [kg/(m^3 Pa s)]."""
        return self.density / self.viscosity


@dataclass(frozen=True)
class KernelSpec:
    """
    Annulus kernel with inner radius rho_i and outer radius rho_o in the
    normalised Joukowsky frame.

    Attributes:
        inner_radius: rho_i [m], 0 for the isotropic disc kernel.
        outer_radius: rho_o [m].
        spacing: sampling spacing of the support in the normalised frame;
            None selects (rho_o - rho_i)/20.
        simplified_jacobian: replace the Joukowsky factor by its far-field
            value in the discrete kernel.
    """

    inner_radius: float
    outer_radius: float
    spacing: Optional[float] = None
    simplified_jacobian: bool = False

    def __post_init__(self):
        if self.inner_radius < 0:
            raise InadmissibleKernelError(
                f"Inner kernel radius must be nonnegative: {self.inner_radius}"
            )
        if not self.outer_radius > self.inner_radius:
            raise InadmissibleKernelError(
                f"Outer kernel radius {self.outer_radius} must exceed "
                f"the inner radius {self.inner_radius}"
            )
        if self.spacing is not None and not self.spacing > 0:
            raise ValueError(f"Kernel sampling spacing must be positive: {self.spacing}")

    @property
    def xi_squared(self) -> float:
        return self.outer_radius ** 2 - self.inner_radius ** 2

    @property
    def sampling_spacing(self) -> float:
        if self.spacing is not None:
            return self.spacing
        return (self.outer_radius - self.inner_radius) / 20.0

    def flux_scaling(self, well_radius: float) -> float:
        """The flux-scaling factor Xi for a well of radius r_w."""
        return xi_anisotropic(self, well_radius)

    def density(self) -> float:
        """Value 1/(pi xi^2) of the annulus kernel on its support."""
        return 1.0 / (np.pi * self.xi_squared)


def xi_isotropic(radius: float, well_radius: float) -> float:
    """
    Flux scaling [ln(rho/r_w) - 1/2]^-1 of the constant disc kernel.

    Args:
        radius: kernel radius rho [m].
        well_radius: r_w [m].
    """
    bracket = np.log(radius / well_radius) - 0.5
    if not bracket > 0:
        raise InadmissibleKernelError(
            f"Kernel radius {radius} must exceed r_w e^(1/2) = {well_radius * np.exp(0.5)}"
        )
    return float(1.0 / bracket)


def _inner_log_term(inner: float, outer: float) -> float:
    if inner == 0:
        return 0.0
    return inner ** 2 / (outer ** 2 - inner ** 2) * np.log(inner / outer)


def xi_anisotropic(kernel: KernelSpec, well_radius: float) -> float:
    """
    Flux scaling [ln(rho_o/r_w) - 1/2 - rho_i^2/xi^2 ln(rho_i/rho_o)]^-1 of
    the annulus kernel.
    """
    bracket = (
        np.log(kernel.outer_radius / well_radius)
        - 0.5
        - _inner_log_term(kernel.inner_radius, kernel.outer_radius)
    )
    if not np.isfinite(bracket) or bracket <= 0:
        raise InadmissibleKernelError(
            f"Kernel radii ({kernel.inner_radius}, {kernel.outer_radius}) give a "
            f"nonpositive flux-scaling bracket {bracket:.6g} for r_w = {well_radius}"
        )
    return float(1.0 / bracket)


def source_from_pressures(
    well_pressure: float,
    centerline_pressure: float,
    xi: float,
    k_iso: float,
    fluid: FluidProperties,
) -> float:
    """q_hat = 2 pi (rho k_I / mu)(p_w - p0) Xi [kg/s/m]."""
    if not xi > 0:
        raise ValueError(f"Flux scaling must be positive: {xi}")
    return 2.0 * np.pi * fluid.mobility * k_iso * (well_pressure - centerline_pressure) * xi


def pressure_isotropic_kernel(
    r: np.ndarray,
    radius: float,
    well_radius: float,
    well_pressure: float,
    rate: float,
    k: float,
    fluid: FluidProperties,
) -> np.ndarray:
    """
    Pressure of the constant disc kernel of radius rho in an isotropic
    medium at distance r from the axis.
    """
    r = np.asarray(r, dtype=float)
    scale = rate / (2.0 * np.pi * fluid.mobility * k)
    with np.errstate(divide="ignore"):
        outside = np.log(r / well_radius)
    inside = r ** 2 / (2.0 * radius ** 2) + np.log(radius / well_radius) - 0.5
    return well_pressure - scale * np.where(r <= radius, inside, outside)


@dataclass(frozen=True, eq=False)
class AnalyticSolution:
    """
    Exact pressure of an infinite straight well with specific rate q.

    Build it with `AnalyticSolution.build`.  Without a kernel the solution
    is the singular line-source solution.
    """

    chain: TransformChain
    joukowsky: JoukowskyMap
    fluid: FluidProperties
    well: WellDescription
    kernel: Optional[KernelSpec] = None
    _xi: Optional[float] = field(default=None, repr=False)

    @classmethod
    def build(
        cls,
        permeability: PermeabilityTensor,
        well: WellDescription,
        fluid: FluidProperties = FluidProperties(),
        kernel: Optional[KernelSpec] = None,
        chain: Optional[TransformChain] = None,
    ) -> "AnalyticSolution":
        if well.rate is None:
            raise ValueError("The analytical solution needs a well rate q")
        if chain is None:
            chain = build_transform(permeability, well)
        jmap = JoukowskyMap.from_ellipse(chain.major, chain.minor, chain.focal)
        xi = None
        if kernel is not None:
            check_kernel_radii(chain, kernel)
            xi = xi_anisotropic(kernel, well.radius)
        return cls(chain, jmap, fluid, well, kernel, xi)

    @property
    def k_iso(self) -> float:
        return self.chain.k_iso

    @property
    def rate_hat(self) -> float:
        """q_hat = q zeta."""
        return self.well.rate * self.chain.zeta

    @property
    def flux_scaling(self) -> float:
        if self._xi is None:
            raise ValueError("The singular solution has no flux-scaling factor")
        return self._xi

    @property
    def _log_scale(self) -> float:
        return self.rate_hat / (2.0 * np.pi * self.fluid.mobility * self.k_iso)

    @property
    def normalisation(self) -> float:
        """r_w / r_o, the scale from raw to normalised Joukowsky radii."""
        return self.well.radius / self.joukowsky.circle_radius

    def normalized_w(self, x: np.ndarray, allow_cut: bool = False) -> np.ndarray:
        """w_hat = T(z(x)) r_w / r_o for points x of shape (..., 3)."""
        z, _ = self.chain.well_frame_coordinates(x)
        return self.joukowsky.to_w(z, allow_cut=allow_cut) * self.normalisation

    def pressure_singular(self, x: np.ndarray) -> np.ndarray:
        """Singular line-source pressure p_w - (mu/(rho k_I))(q_hat/2pi) ln(|w_hat|/r_w)."""
        radius = np.abs(self.normalized_w(x))
        if np.any(radius == 0):
            raise ValueError("Singular pressure is unbounded on the well axis")
        return self.well.pressure - self._log_scale * np.log(radius / self.well.radius)

    def _regularized_bracket(self, radius: np.ndarray) -> np.ndarray:
        inner, outer = self.kernel.inner_radius, self.kernel.outer_radius
        xi2 = self.kernel.xi_squared
        r_w = self.well.radius
        constant = -0.5 - _inner_log_term(inner, outer) + np.log(outer / r_w)
        with np.errstate(divide="ignore", invalid="ignore"):
            if inner > 0:
                annulus_log = inner ** 2 / xi2 * np.log(np.maximum(radius, inner) / outer)
            else:
                annulus_log = np.zeros_like(radius)
            annulus = (radius ** 2 - outer ** 2) / (2.0 * xi2) - annulus_log + np.log(outer / r_w)
            outside = np.log(radius / r_w)
        return np.where(radius > outer, outside, np.where(radius >= inner, annulus, constant))

    def pressure_regularized(self, x: np.ndarray) -> np.ndarray:
        """
        Kernel-regularised pressure: constant p0 inside rho_i, the annulus
        branch between rho_i and rho_o and the singular solution outside.
        """
        if self.kernel is None:
            raise ValueError("pressure_regularized needs a kernel")
        radius = np.abs(self.normalized_w(x, allow_cut=True))
        return self.well.pressure - self._log_scale * self._regularized_bracket(radius)

    def pressure(self, x: np.ndarray) -> np.ndarray:
        if self.kernel is None:
            return self.pressure_singular(x)
        return self.pressure_regularized(x)

    def centerline_pressure(self) -> float:
        """p0, the pressure on the well axis of the regularised solution."""
        if self.kernel is None:
            raise ValueError("The singular solution has no finite centre-line pressure")
        return float(self.well.pressure - self._log_scale / self.flux_scaling)

    def well_rate(self, length: float) -> float:
        """Total mass rate Q = q L of a segment of length L [kg/s]."""
        return self.well.rate * length

    def pressure_gradient(self, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
        """Central-difference pressure gradient at points x (shape (..., 3))."""
        x = np.asarray(x, dtype=float)
        gradient = np.empty(x.shape)
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = step
            gradient[..., axis] = (self.pressure(x + offset) - self.pressure(x - offset)) / (2 * step)
        return gradient

    def sample_lattice(
        self, origin: np.ndarray, spacing: np.ndarray, dims: Tuple[int, int, int]
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Pressure on a structured lattice of points, x fastest.

        Returns:
            Tuple[np.ndarray, np.ndarray]: points (n, 3) and pressures (n,).
        """
        axes = [origin[d] + spacing[d] * np.arange(dims[d]) for d in range(3)]
        gz, gy, gx = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
        points = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        if self.kernel is not None:
            return points, self.pressure_regularized(points)
        values = np.full(len(points), np.nan)
        z, _ = self.chain.well_frame_coordinates(points)
        valid = ~self.joukowsky.on_cut(z) if self.joukowsky.focal > 0 else np.abs(z) > 0
        values[valid] = self.pressure_singular(points[valid])
        return points, values


def check_kernel_radii(chain: TransformChain, kernel: KernelSpec):
    """
    Reject kernel radii outside f_hat <= rho_i <= r_w < rho_o.
    """
    r_w = chain.well.radius
    focal_hat = chain.focal * r_w / chain.circle_radius
    tolerance = 1e-12 * r_w
    if kernel.inner_radius < focal_hat - tolerance:
        raise InadmissibleKernelError(
            f"Inner kernel radius {kernel.inner_radius} is inside the focal "
            f"segment (f_hat = {focal_hat})"
        )
    if kernel.inner_radius > r_w + tolerance:
        raise InadmissibleKernelError(
            f"Inner kernel radius {kernel.inner_radius} exceeds the well radius {r_w}"
        )
    if not kernel.outer_radius > r_w:
        raise InadmissibleKernelError(
            f"Outer kernel radius {kernel.outer_radius} must exceed the well radius {r_w}"
        )


def normalized_focal(chain: TransformChain) -> float:
    """f_hat = f r_w / r_o, the focal distance in the normalised frame."""
    return chain.focal * chain.well.radius / chain.circle_radius


def pressure_singular(solution: AnalyticSolution, x: np.ndarray) -> np.ndarray:
    return solution.pressure_singular(x)


def pressure_regularized(solution: AnalyticSolution, x: np.ndarray) -> np.ndarray:
    return solution.pressure_regularized(x)
