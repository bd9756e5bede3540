"""Semi-Lagrangian density transport and its conservation diagnostics."""

from __future__ import annotations

import logging
import math
from typing import Iterable, Union

import numpy as np
from scipy.ndimage import map_coordinates

from ..errors import CFLViolation, ContractViolation, DomainError
from ..INI.initial_data import DensityField
from ..SPC.spectral_core import Grid, SpectralField

logger = logging.getLogger(__name__)

DEFAULT_CFL_LIMIT = 0.9


def _nodal_velocity(grid: Grid, velocity: Union[SpectralField, np.ndarray]) -> np.ndarray:
    if isinstance(velocity, SpectralField):
        if velocity.grid != grid or not velocity.is_vector:
            raise ContractViolation("velocity must be a vector field on the density grid")
        return velocity.to_nodal()
    values = np.asarray(velocity, dtype=float)
    if values.shape != (grid.dim,) + grid.shape:
        raise ContractViolation(f"nodal velocity of shape {values.shape} does not fit grid {grid.shape}")
    return values


def courant_number(grid: Grid, velocity: np.ndarray, dt: float) -> float:
    return max(float(np.max(np.abs(velocity[a]))) * dt / h for a, h in enumerate(grid.spacing))


def _interpolate(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    # Linear interpolation is a convex combination of the neighbouring nodes.
    return map_coordinates(values, points, order=1, mode="grid-wrap")


def advance_density(
    rho: DensityField,
    velocity: Union[SpectralField, np.ndarray],
    dt: float,
    cfl_limit: float = DEFAULT_CFL_LIMIT,
) -> DensityField:
    """One semi-Lagrangian step of the continuity equation.

    Characteristics are traced back with the midpoint rule and the density is
    sampled at their feet by multilinear interpolation, so the new range is
    contained in the old one.
    """
    if dt <= 0:
        raise ValueError(f"time step must be positive, got {dt}")
    grid = rho.grid
    u = _nodal_velocity(grid, velocity)
    if not np.any(u):
        return rho
    ratio = courant_number(grid, u, dt)
    if ratio > cfl_limit:
        raise CFLViolation(ratio, cfl_limit)
    spacing = np.array(grid.spacing).reshape((grid.dim,) + (1,) * grid.dim)
    nodes = np.indices(grid.shape, dtype=float)
    midpoints = nodes - 0.5 * dt * u / spacing
    u_mid = np.stack([_interpolate(u[a], midpoints) for a in range(grid.dim)])
    feet = nodes - dt * u_mid / spacing
    values = _interpolate(rho.values, feet)
    return DensityField(grid, np.clip(values, rho.minimum, rho.maximum))


def lq_norm(rho: DensityField, q: float) -> float:
    """Discrete L^q norm; ``q = math.inf`` gives the max norm."""
    if q < 1:
        raise DomainError(f"L^q norms need q >= 1, got {q}")
    if math.isinf(q):
        return float(np.max(np.abs(rho.values)))
    integral = rho.grid.cell_volume * np.sum(np.abs(rho.values) ** q)
    return float(integral ** (1.0 / q))


def density_bounds(rho: DensityField) -> tuple[float, float]:
    return rho.minimum, rho.maximum


def lq_drift(initial: DensityField, current: DensityField, qs: Iterable[float] = (1, 2, 4)) -> dict[float, float]:
    """Relative change of each L^q norm between two densities."""
    drift = {}
    for q in qs:
        reference = lq_norm(initial, q)
        drift[q] = abs(lq_norm(current, q) - reference) / reference if reference > 0 else 0.0
    return drift
