"""
Permeability tensors, well descriptions and the coordinate transform chain
that maps the anisotropic problem around a straight well onto an isotropic
one with the well axis along the third coordinate.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])

SYMMETRY_TOLERANCE = 1e-14
CIRCULAR_TOLERANCE = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a permeability tensor is not symmetric positive definite."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def eigendecompose(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a symmetric positive definite 3x3 matrix.

    Args:
        matrix: symmetric 3x3 permeability matrix [m^2].

    Returns:
        Tuple[np.ndarray, np.ndarray]: ascending eigenvalues and a proper
            rotation Q (det = +1) with matrix = Q diag(eigenvalues) Q^T.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3):
        raise ValueError(f"Permeability must be a 3x3 matrix, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"Permeability has non-finite entries: {matrix.tolist()}")
    scale = np.max(np.abs(matrix))
    if scale == 0:
        raise NotPositiveDefiniteError("Permeability tensor is zero")
    asymmetry = np.max(np.abs(matrix - matrix.T))
    if asymmetry > SYMMETRY_TOLERANCE * scale:
        raise ValueError(
            f"Permeability tensor is not symmetric (max |K - K^T| = {asymmetry:.3e})"
        )
    symmetric = 0.5 * (matrix + matrix.T)
    eigenvalues, rotation = np.linalg.eigh(symmetric)
    if np.any(eigenvalues <= 0):
        raise NotPositiveDefiniteError(
            f"Permeability tensor is not positive definite: eigenvalues {eigenvalues}"
        )
    if np.linalg.det(rotation) < 0:
        rotation[:, 2] = -rotation[:, 2]
    return eigenvalues, rotation


@dataclass(frozen=True, eq=False)
class PermeabilityTensor:
    """
    A homogeneous symmetric positive definite permeability tensor with its
    eigendecomposition.

    Build it with `PermeabilityTensor.from_matrix`.
    """

    entries: np.ndarray
    eigenvalues: np.ndarray
    rotation: np.ndarray

    @classmethod
    def from_matrix(cls, matrix: Union[np.ndarray, Sequence[Sequence[float]]]
                    ) -> "PermeabilityTensor":
        eigenvalues, rotation = eigendecompose(np.asarray(matrix, dtype=float))
        symmetric = np.asarray(matrix, dtype=float)
        symmetric = 0.5 * (symmetric + symmetric.T)
        return cls(
            entries=_frozen(symmetric),
            eigenvalues=_frozen(eigenvalues),
            rotation=_frozen(rotation),
        )

    @classmethod
    def isotropic(cls, k: float) -> "PermeabilityTensor":
        return cls.from_matrix(np.eye(3) * k)

    @property
    def determinant(self) -> float:
        return float(np.prod(self.eigenvalues))

    @property
    def isotropic_permeability(self) -> float:
        """k_I = det(K)^(1/3), the permeability of the equivalent isotropic medium."""
        return float(np.cbrt(self.determinant))

    @property
    def is_diagonal(self) -> bool:
        off = self.entries - np.diag(np.diag(self.entries))
        return bool(np.max(np.abs(off)) <= CIRCULAR_TOLERANCE * np.max(np.diag(self.entries)))

    def power(self, exponent: float) -> np.ndarray:
        """K^exponent through the eigendecomposition."""
        q = self.rotation
        return q @ np.diag(self.eigenvalues ** exponent) @ q.T

    def __repr__(self) -> str:
        return f"PermeabilityTensor(eigenvalues={self.eigenvalues.tolist()})"


@dataclass(frozen=True, eq=False)
class WellDescription:
    """
    A straight well: the line through `point` along the unit `direction`.

    `extent` optionally restricts the well to the parameter interval
    [t0, t1] along the direction (a finite well given by its end points).
    `rate` is the specific mass rate q [kg/s/m] of the analytical reference;
    it may be None for pressure-driven scenarios.
    """

    point: np.ndarray
    direction: np.ndarray
    radius: float
    pressure: float
    rate: Optional[float] = 1.0
    extent: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        if point.shape != (3,) or direction.shape != (3,):
            raise ValueError("Well point and direction must be 3-vectors")
        norm = np.linalg.norm(direction)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError(f"Degenerate well direction: {direction.tolist()}")
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(
                f"Well direction must be a unit vector (|psi| = {norm!r}); "
                "use WellDescription.along() to normalise"
            )
        if not self.radius > 0:
            raise ValueError(f"Well radius must be positive: {self.radius}")
        if self.extent is not None:
            t0, t1 = (float(t) for t in self.extent)
            if t1 < t0:
                raise ValueError(f"Invalid well extent: {self.extent}")
            object.__setattr__(self, "extent", (t0, t1))
        object.__setattr__(self, "point", _frozen(point))
        object.__setattr__(self, "direction", _frozen(direction))

    @classmethod
    def along(
        cls,
        point: Sequence[float],
        direction: Sequence[float],
        radius: float,
        pressure: float,
        rate: Optional[float] = 1.0,
    ) -> "WellDescription":
        """Infinite well through point along a (not necessarily unit) direction."""
        direction = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ValueError("Degenerate well direction: zero vector")
        return cls(np.asarray(point, dtype=float), direction / norm, radius, pressure, rate)

    @classmethod
    def between(
        cls,
        start: Sequence[float],
        end: Sequence[float],
        radius: float,
        pressure: float,
        rate: Optional[float] = 1.0,
    ) -> "WellDescription":
        """Finite well from `start` to `end`."""
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        length = np.linalg.norm(end - start)
        if length == 0:
            raise ValueError("Well end points coincide")
        return cls(start, (end - start) / length, radius, pressure, rate, (0.0, float(length)))

    def at(self, t: Union[float, np.ndarray]) -> np.ndarray:
        """Points on the axis for parameter(s) t."""
        t = np.asarray(t, dtype=float)
        return self.point + t[..., None] * self.direction


def rodrigues_align(psi_prime: np.ndarray) -> np.ndarray:
    """
    Rotation R = 2kk^T - I with k the bisector of e3 and psi', so that
    R e3 = psi'. R is symmetric and involutory.

    Args:
        psi_prime: unit target direction.

    Returns:
        np.ndarray: the 3x3 rotation matrix.
    """
    psi_prime = np.asarray(psi_prime, dtype=float)
    norm = np.linalg.norm(psi_prime)
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"rodrigues_align expects a unit vector, |psi'| = {norm}")
    bisector = E3 + psi_prime
    length = np.linalg.norm(bisector)
    if length < 1e-12:
        # psi' = -e3: half turn about e1
        axis = E1
    else:
        axis = bisector / length
    return 2.0 * np.outer(axis, axis) - np.eye(3)


@dataclass(frozen=True, eq=False)
class TransformChain:
    """
    Precomputed transform x -> v = R_hat^T R^T S (x - x_well) and the
    well-bore ellipse it produces.

    In v-coordinates the well axis is the v3-axis and the well bore is the
    canonical ellipse (v1/a)^2 + (v2/b)^2 = 1 with a >= b.
    """

    permeability: PermeabilityTensor
    well: WellDescription
    stretch: np.ndarray
    stretch_inverse: np.ndarray
    k_iso: float
    rotation: np.ndarray
    ellipse_rotation: np.ndarray
    psi_prime: np.ndarray
    major: float
    minor: float
    focal: float
    zeta: float
    plane_normal: np.ndarray
    matrix: np.ndarray
    matrix_inverse: np.ndarray

    @property
    def circle_radius(self) -> float:
        """r_o = a + b, the radius of the Joukowsky image of the well bore."""
        return self.major + self.minor

    @property
    def axial_stretch(self) -> float:
        """|S psi|, the v3-length of a unit length of well (equals 1/zeta)."""
        return float(np.linalg.norm(self.stretch @ self.well.direction))

    @property
    def nu(self) -> Tuple[np.ndarray, np.ndarray]:
        """Ellipse axis directions in the stretched (u) frame."""
        r = self.rotation @ self.ellipse_rotation
        return r[:, 0], r[:, 1]

    def forward_map(self, x: np.ndarray) -> np.ndarray:
        """Map points x (shape (..., 3)) to v-coordinates."""
        x = np.asarray(x, dtype=float)
        return (x - self.well.point) @ self.matrix.T

    def inverse_map(self, v: np.ndarray) -> np.ndarray:
        """Map v-coordinates back to x."""
        v = np.asarray(v, dtype=float)
        return v @ self.matrix_inverse.T + self.well.point

    def well_frame_coordinates(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Complex cross-section coordinate z = v1 + i v2 and the axial
        coordinate v3 of points x.
        """
        v = self.forward_map(x)
        return v[..., 0] + 1j * v[..., 1], v[..., 2]

    def axial_parameter(self, x: np.ndarray) -> np.ndarray:
        """Parameter t of the axis point whose ellipse plane contains x."""
        v = self.forward_map(x)
        return v[..., 2] / self.axial_stretch


def _ellipse_axes(
    rotation: np.ndarray, stretch_inverse: np.ndarray, direction: np.ndarray,
    psi_prime: np.ndarray, radius: float,
) -> Tuple[float, float, np.ndarray]:
    projector = np.eye(3) - np.outer(direction, direction)
    m = rotation @ stretch_inverse
    ellipse = (m @ projector @ m.T)[:2, :2]
    ellipse = 0.5 * (ellipse + ellipse.T)
    gammas, vectors = np.linalg.eigh(ellipse)
    major = radius / np.sqrt(gammas[0])
    minor = radius / np.sqrt(gammas[1])
    nu1 = np.array([vectors[0, 0], vectors[1, 0], 0.0])
    nu2 = np.array([vectors[0, 1], vectors[1, 1], 0.0])

    if major - minor < CIRCULAR_TOLERANCE * major:
        # circular cross-section: fix nu1 by the projection of e1
        projected = E1 - np.dot(E1, psi_prime) * psi_prime
        if np.linalg.norm(projected) < 1e-8:
            projected = E2 - np.dot(E2, psi_prime) * psi_prime
        projected /= np.linalg.norm(projected)
        nu1 = rotation.T @ projected
        nu1[2] = 0.0
        nu1 /= np.linalg.norm(nu1)
        nu2 = np.cross(E3, nu1)
        minor = major

    if np.cross(nu1, nu2)[2] < 0:
        nu2 = -nu2
    return float(major), float(minor), np.column_stack([nu1, nu2, E3])


def build_transform(permeability: PermeabilityTensor, well: WellDescription) -> TransformChain:
    """
    Build the transform chain for a homogeneous tensor and a straight well.

    Args:
        permeability: the SPD permeability tensor.
        well: the well description.

    Returns:
        TransformChain: stretch, rotations, ellipse axes and scalings.
    """
    k_iso = permeability.isotropic_permeability
    stretch = np.sqrt(k_iso) * permeability.power(-0.5)
    stretch_inverse = permeability.power(0.5) / np.sqrt(k_iso)

    direction = well.direction
    stretched = stretch @ direction
    psi_prime = stretched / np.linalg.norm(stretched)
    rotation = rodrigues_align(psi_prime)

    major, minor, ellipse_rotation = _ellipse_axes(
        rotation, stretch_inverse, direction, psi_prime, well.radius
    )
    focal = 0.0 if major - minor < CIRCULAR_TOLERANCE * major else float(
        np.sqrt(major ** 2 - minor ** 2)
    )
    zeta = major * minor / well.radius ** 2

    normal = stretch @ psi_prime
    normal /= np.linalg.norm(normal)

    matrix = ellipse_rotation.T @ rotation.T @ stretch
    matrix_inverse = stretch_inverse @ rotation @ ellipse_rotation

    logger.debug(
        f"Transform chain: k_I={k_iso:.4e}, a={major:.6g}, b={minor:.6g}, "
        f"f={focal:.6g}, zeta={zeta:.6g}"
    )
    return TransformChain(
        permeability=permeability,
        well=well,
        stretch=_frozen(stretch),
        stretch_inverse=_frozen(stretch_inverse),
        k_iso=k_iso,
        rotation=_frozen(rotation),
        ellipse_rotation=_frozen(ellipse_rotation),
        psi_prime=_frozen(psi_prime),
        major=major,
        minor=minor,
        focal=focal,
        zeta=float(zeta),
        plane_normal=_frozen(normal),
        matrix=_frozen(matrix),
        matrix_inverse=_frozen(matrix_inverse),
    )


def forward_map(chain: TransformChain, x: np.ndarray) -> np.ndarray:
    """v = R_hat^T R^T S (x - x_well)."""
    return chain.forward_map(x)


def inverse_map(chain: TransformChain, v: np.ndarray) -> np.ndarray:
    """x = S^-1 R R_hat v + x_well."""
    return chain.inverse_map(v)


def kernel_ellipse_axes(chain: TransformChain, radius: float) -> Tuple[float, float]:
    """
    Semi-axes in x-coordinates of the planar cut of the kernel support whose
    normalised Joukowsky radius is `radius`.

    Returns:
        Tuple[float, float]: (major, minor) semi-axes [m].
    """
    rho = radius * chain.circle_radius / chain.well.radius
    f2 = chain.focal ** 2
    half_major = 0.5 * (rho + f2 / rho)
    half_minor = 0.5 * (rho - f2 / rho)
    columns = chain.matrix_inverse[:, :2] @ np.diag([half_major, half_minor])
    singular = np.linalg.svd(columns, compute_uv=False)
    return float(singular[0]), float(singular[1])
