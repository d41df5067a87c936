"""
The Joukowsky map between the exterior of the confocal ellipses around the
well and the exterior of circles.

z-coordinates are the complex well cross-section coordinates v1 + i v2;
w = T(z) straightens the elliptic isobars into circles.  Complex points
are plain numpy complex scalars or arrays.
"""

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

ComplexPoint = Union[complex, np.ndarray]

CUT_TOLERANCE = 1e-14


class BranchCutError(ValueError):
    """Raised for points outside the one-to-one domain of the Joukowsky map."""


@dataclass(frozen=True)
class JoukowskyMap:
    """
    w = T(z) = z + sqrt(z - f) sqrt(z + f),  z = T^-1(w) = (w + f^2/w) / 2.

    Attributes:
        focal: focal distance f of the well-bore ellipse [m].
        circle_radius: radius r_o = a + b of the image of the well bore [m].
    """

    focal: float
    circle_radius: float

    def __post_init__(self):
        if self.focal < 0:
            raise ValueError(f"Focal distance must be nonnegative: {self.focal}")
        if not self.circle_radius > self.focal:
            raise ValueError(
                f"Circle radius {self.circle_radius} must exceed the focal distance {self.focal}"
            )

    @classmethod
    def from_ellipse(cls, major: float, minor: float, focal: Optional[float] = None) -> "JoukowskyMap":
        if focal is None:
            focal = float(np.sqrt(max(major ** 2 - minor ** 2, 0.0)))
        return cls(focal=float(focal), circle_radius=float(major + minor))

    def on_cut(self, z: np.ndarray) -> np.ndarray:
        outside = np.maximum(np.abs(z.real) - self.focal, 0.0)
        distance = np.hypot(outside, z.imag)
        return distance <= CUT_TOLERANCE * self.focal

    def to_w(self, z: ComplexPoint, allow_cut: bool = False) -> ComplexPoint:
        """
        T(z) on the exterior branch.

        Args:
            z: complex cross-section coordinate(s).
            allow_cut: map points on the focal segment to |w| = f instead of
                raising.
        """
        z = np.asarray(z, dtype=complex)
        if self.focal == 0:
            return 2.0 * z
        if not allow_cut and np.any(self.on_cut(z)):
            raise BranchCutError(
                f"Point on the focal segment [-{self.focal}, {self.focal}]"
            )
        f = self.focal
        return z + np.sqrt(z - f) * np.sqrt(z + f)

    def _check_domain(self, w: np.ndarray):
        if self.focal > 0 and np.any(np.abs(w) <= self.focal):
            raise BranchCutError(
                f"|w| must exceed the focal distance {self.focal} "
                f"(min |w| = {np.min(np.abs(w))})"
            )

    def from_w(self, w: ComplexPoint) -> ComplexPoint:
        """T^-1(w) for |w| > f."""
        w = np.asarray(w, dtype=complex)
        if self.focal == 0:
            return 0.5 * w
        self._check_domain(w)
        return 0.5 * (w + self.focal ** 2 / w)

    def phi_j(self, w: ComplexPoint) -> np.ndarray:
        """Inverse absolute Jacobian determinant of T^-1, tending to 4 far away."""
        w = np.asarray(w, dtype=complex)
        if self.focal == 0:
            return np.full(w.shape, 4.0)
        self._check_domain(w)
        f2 = self.focal ** 2
        modulus4 = np.abs(w) ** 4
        return 4.0 / (1.0 + (f2 * f2 - 2.0 * f2 * np.real(w * w)) / modulus4)

    def jacobian(self, w: ComplexPoint) -> np.ndarray:
        """
        Jacobian of T^-1 as real 2x2 matrices [[eta, eps], [-eps, eta]]
        with d(x, y)/d(u, v); shape (..., 2, 2).
        """
        w = np.asarray(w, dtype=complex)
        self._check_domain(w)
        if self.focal == 0:
            derivative = np.full(w.shape, 0.5, dtype=complex)
        else:
            derivative = 0.5 * (1.0 - self.focal ** 2 / (w * w))
        eta = derivative.real
        eps = -derivative.imag
        return np.stack(
            [np.stack([eta, eps], axis=-1), np.stack([-eps, eta], axis=-1)], axis=-2
        )


def to_w(jmap: JoukowskyMap, z: ComplexPoint) -> ComplexPoint:
    return jmap.to_w(z)


def from_w(jmap: JoukowskyMap, w: ComplexPoint) -> ComplexPoint:
    return jmap.from_w(w)


def phi_j(jmap: JoukowskyMap, w: ComplexPoint) -> np.ndarray:
    return jmap.phi_j(w)


def jacobian(jmap: JoukowskyMap, w: ComplexPoint) -> np.ndarray:
    return jmap.jacobian(w)
