"""
Discrete error norms and convergence-rate estimates.
"""

from typing import List, Optional, Sequence

import numpy as np


def relative_pressure_error(
    exact: np.ndarray,
    discrete: np.ndarray,
    volumes: np.ndarray,
    reference_pressure: float,
) -> float:
    """
    Relative discrete L2 norm of the pressure error.

    Args:
        exact: exact pressure at the cell centroids.
        discrete: discrete cell pressures.
        volumes: cell volumes.
        reference_pressure: normalisation pressure (the well pressure).
    """
    exact = np.asarray(exact, dtype=float)
    discrete = np.asarray(discrete, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    total = volumes.sum()
    if total <= 0:
        raise ValueError("Pressure error needs a nonempty set of cells")
    mean_square = np.sum(volumes * (exact - discrete) ** 2) / total
    return float(np.sqrt(mean_square) / abs(reference_pressure))


def relative_source_error(
    rate: float,
    discrete_rates: np.ndarray,
    lengths: np.ndarray,
) -> float:
    """
    Relative discrete L2 norm of the source error along the well.

    Args:
        rate: exact specific rate q [kg/s/m].
        discrete_rates: recovered specific rates Q_I/|I| per intersection.
        lengths: intersection lengths |I|.
    """
    lengths = np.asarray(lengths, dtype=float)
    total = lengths.sum()
    if total <= 0:
        raise ValueError("Source error needs a nonempty set of intersections")
    discrete_rates = np.asarray(discrete_rates, dtype=float)
    mean_square = np.sum(lengths * (rate - discrete_rates) ** 2) / total
    return float(np.sqrt(mean_square) / abs(rate))


def relative_total_error(value: float, reference: float) -> float:
    """E_Q = |Q - Q_ref| / |Q_ref|."""
    if reference == 0:
        raise ValueError("Reference source is zero; relative error undefined")
    return abs(value - reference) / abs(reference)


def convergence_rates(
    sizes: Sequence[float], errors: Sequence[float]
) -> List[Optional[float]]:
    """
    Successive observed orders log(e_i/e_{i+1}) / log(h_i/h_{i+1}).

    The first entry is None since it has no coarser partner.
    """
    if len(sizes) != len(errors):
        raise ValueError("sizes and errors must have the same length")
    rates: List[Optional[float]] = [None]
    for i in range(1, len(sizes)):
        e0, e1 = errors[i - 1], errors[i]
        if e0 <= 0 or e1 <= 0:
            rates.append(None)
            continue
        rates.append(float(np.log(e0 / e1) / np.log(sizes[i - 1] / sizes[i])))
    return rates
