"""
Axis rotations and the angle parametrisations of permeability tensors and
well directions used by the experiments.
"""

from typing import Sequence

import numpy as np

# Reference permeability scale of K_alpha [m^2]
PERMEABILITY_SCALE = 1e-12


def rotation_about_e1(angle_deg: float) -> np.ndarray:
    """Rotation matrix about the first coordinate axis (angle in degrees)."""
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_about_e2(angle_deg: float) -> np.ndarray:
    """Rotation matrix about the second coordinate axis (angle in degrees)."""
    t = np.deg2rad(angle_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def permeability_from_angles(
    alpha: float,
    gamma1: float,
    gamma2: float,
    scale: float = PERMEABILITY_SCALE,
) -> np.ndarray:
    """
    Build K(gamma1, gamma2) = R1 R2 K_alpha R2^T R1^T.

    Args:
        alpha: anisotropy ratio K33/K11 = K33/K22 of the unrotated tensor.
        gamma1: rotation angle about e1 in degrees.
        gamma2: rotation angle about e2 in degrees.
        scale: permeability of the unit entries [m^2].

    Returns:
        np.ndarray: the symmetric 3x3 permeability matrix.
    """
    if alpha <= 0:
        raise ValueError(f"Anisotropy ratio must be positive: {alpha}")
    rotation = rotation_about_e1(gamma1) @ rotation_about_e2(gamma2)
    k_alpha = np.diag([1.0, 1.0, float(alpha)]) * scale
    matrix = rotation @ k_alpha @ rotation.T
    # rounding leaves asymmetries of order eps
    return 0.5 * (matrix + matrix.T)


def well_direction_from_angles(beta1: float, beta2: float) -> np.ndarray:
    """Unit well direction psi = R1(beta1) R2(beta2) e3 (angles in degrees)."""
    direction = rotation_about_e1(beta1) @ rotation_about_e2(beta2) @ np.array(
        [0.0, 0.0, 1.0]
    )
    return direction / np.linalg.norm(direction)


def angle_grid(start: float, stop: float, step: float) -> Sequence[float]:
    """Inclusive grid of angles in degrees."""
    if step <= 0:
        raise ValueError(f"Angle step must be positive: {step}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [float(start + i * step) for i in range(max(count, 0))]
