"""Initial densities and velocities, their mollification and lifting."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.ndimage import convolve

from ..errors import ContractViolation, DensityValidationError, MollifierResolutionError
from ..SPC.spectral_core import Grid, SpectralField, StokesBasis, differentiate, leray_project

logger = logging.getLogger(__name__)

VacuumKind = Literal["none", "disk", "strip"]
VelocityKind = Literal["single_mode", "taylor_green", "random_seeded"]


@dataclass(frozen=True, eq=False)
class DensityField:
    """Nodal density values on a grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ContractViolation(f"density of shape {values.shape} does not fit grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DensityValidationError("density values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "DensityField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def minimum(self) -> float:
        return float(self.values.min())

    @property
    def maximum(self) -> float:
        return float(self.values.max())


class VacuumSpec(NamedTuple):
    """Geometry of the initial vacuum region."""

    kind: VacuumKind = "none"
    radius: float = math.pi / 2  # disk radius
    half_width: float = math.pi / 4  # strip half width
    ramp_width: float = 0.5  # width of the smooth transition to M
    center: Optional[tuple[float, ...]] = None  # defaults to the box centre
    axis: int = 0  # strip normal


@dataclass(frozen=True, eq=False)
class InitialData:
    rho0: DensityField
    u0: SpectralField
    M: float
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"mollification index must be positive, got {self.n}")
        if self.M <= 0:
            raise ValueError(f"upper density bound must be positive, got {self.M}")
        if self.rho0.minimum < 0 or self.rho0.maximum > self.M:
            raise DensityValidationError(
                f"initial density range [{self.rho0.minimum}, {self.rho0.maximum}] leaves [0, {self.M}]"
            )
        if not self.u0.is_vector or self.u0.grid != self.rho0.grid:
            raise ContractViolation("initial velocity must be a vector field on the density grid")
        divergence = differentiate(self.u0, "divergence").norm()
        if divergence > 1e-10 * max(1.0, self.u0.norm()):
            raise ContractViolation(f"initial velocity is not solenoidal (|div u0| = {divergence:.3e})")

    @property
    def grid(self) -> Grid:
        return self.rho0.grid

    @property
    def upper_bound(self) -> float:
        """M* = M + 1, the bound shared by every lifted density."""
        return self.M + 1.0

    def regularized(self) -> tuple[DensityField, SpectralField]:
        """Lifted mollified density and mollified solenoidal velocity."""
        rho0n = lift_density(self.rho0, self.n)
        u0n = leray_project(SpectralField.from_nodal(self.grid, mollify(self.u0.to_nodal(), self.n, self.grid)))
        return rho0n, u0n


def _kernel(grid: Grid, n: int) -> np.ndarray:
    """Discretely normalized Friedrichs bump of radius 1/n on the grid stencil."""
    radius = 1.0 / n
    if radius <= max(grid.spacing):
        raise MollifierResolutionError(
            f"mollifier radius 1/{n} = {radius:.4g} is below the grid spacing "
            f"{max(grid.spacing):.4g}; refine the grid or lower n"
        )
    reach = [int(math.ceil(radius / h)) for h in grid.spacing]
    if any(2 * r + 1 > size for r, size in zip(reach, grid.shape)):
        raise MollifierResolutionError(f"mollifier radius 1/{n} = {radius:.4g} wraps around the box")
    axes = np.meshgrid(*[np.arange(-r, r + 1) * h for r, h in zip(reach, grid.spacing)], indexing="ij")
    s_sq = sum(a**2 for a in axes) / radius**2
    inside = s_sq < 1.0
    kernel = np.zeros_like(s_sq)
    kernel[inside] = np.exp(-1.0 / (1.0 - s_sq[inside]))
    return kernel / kernel.sum()


def mollify(
    field: Union[DensityField, np.ndarray], n: int, grid: Optional[Grid] = None
) -> Union[DensityField, np.ndarray]:
    """Periodic convolution with the Friedrichs bump of radius 1/n.

    Accepts a density or a nodal vector field of shape (d, *grid.shape).
    The weights are normalized discretely; the output is clipped to the input
    range, which the exact convex combination never leaves.
    """
    if n < 1:
        raise ValueError(f"mollification index must be positive, got {n}")
    if isinstance(field, DensityField):
        smoothed = mollify(field.values[np.newaxis], n, field.grid)[0]
        return DensityField(field.grid, smoothed)
    if grid is None:
        raise ContractViolation("mollifying a nodal array needs its grid")
    values = np.asarray(field, dtype=float)
    if values.shape[1:] != grid.shape:
        raise ContractViolation(f"field of shape {values.shape} does not fit grid {grid.shape}")
    kernel = _kernel(grid, n)
    axes = tuple(range(1, grid.dim + 1))
    out = np.stack([convolve(component, kernel, mode="wrap") for component in values])
    low = values.min(axis=axes, keepdims=True)
    high = values.max(axis=axes, keepdims=True)
    return np.clip(out, low, high)


def lift_density(rho0: DensityField, n: int) -> DensityField:
    """Mollify and add 1/n, giving a density bounded below by 1/n."""
    if rho0.minimum < 0:
        raise DensityValidationError(f"initial density must be non-negative, found {rho0.minimum}")
    smoothed = mollify(rho0, n)
    return DensityField(rho0.grid, smoothed.values + 1.0 / n)


def mollification_error(field: DensityField, ns: Sequence[int]) -> list[float]:
    """L2 distance between a density and its mollifications along ``ns``."""
    weight = field.grid.cell_volume
    return [
        float(np.sqrt(weight * np.sum((mollify(field, n).values - field.values) ** 2)))
        for n in ns
    ]


def project_velocity(u0n: SpectralField, basis: StokesBasis) -> np.ndarray:
    """Coefficients (u0n, psi_i) of the velocity on the Galerkin basis."""
    if u0n.grid != basis.grid:
        raise ContractViolation("velocity and basis live on different grids")
    if not u0n.is_vector:
        raise ContractViolation("project_velocity needs a vector field")
    return basis.project(u0n.to_nodal())


def _periodic_offsets(grid: Grid, center: Optional[Sequence[float]]) -> np.ndarray:
    if center is None:
        center = tuple(length / 2 for length in grid.box_length)
    lengths = np.array(grid.box_length).reshape((grid.dim,) + (1,) * grid.dim)
    center = np.asarray(center, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    return np.mod(grid.coordinates - center + lengths / 2, lengths) - lengths / 2


def make_vacuum_density(grid: Grid, spec: VacuumSpec, M: float) -> DensityField:
    """Density equal to 0 in the vacuum region and M outside, with a C1 ramp."""
    if M <= 0:
        raise ValueError(f"M must be positive, got {M}")
    if spec.kind == "none":
        return DensityField.constant(grid, M)
    offsets = _periodic_offsets(grid, spec.center)
    if spec.kind == "disk":
        if not 0 <= spec.radius <= min(grid.box_length) / 2:
            raise ValueError(f"disk radius {spec.radius} does not fit in the box")
        distance = np.sqrt(np.sum(offsets**2, axis=0))
        edge = spec.radius
    elif spec.kind == "strip":
        if not 0 <= spec.axis < grid.dim:
            raise ValueError(f"strip axis {spec.axis} is not an axis of a {grid.dim}-d grid")
        if not 0 <= spec.half_width <= grid.box_length[spec.axis] / 2:
            raise ValueError(f"strip half width {spec.half_width} does not fit in the box")
        distance = np.abs(offsets[spec.axis])
        edge = spec.half_width
    else:
        raise ValueError(f"unknown vacuum kind '{spec.kind}'")
    if spec.ramp_width < 0:
        raise ValueError("ramp width must be non-negative")
    if spec.ramp_width == 0:
        profile = (distance >= edge).astype(float)
    else:
        s = np.clip((distance - edge) / spec.ramp_width, 0.0, 1.0)
        profile = s * s * (3.0 - 2.0 * s)
    return DensityField(grid, M * profile)


def make_velocity(
    grid: Grid,
    kind: VelocityKind,
    amplitude: float = 1.0,
    seed: int = 0,
    modes: int = 4,
) -> SpectralField:
    """Solenoidal initial velocity presets."""
    k = [2.0 * math.pi / length for length in grid.box_length]
    x = grid.coordinates
    values = np.zeros((grid.dim,) + grid.shape)
    if kind == "single_mode":
        values[0] = np.cos(k[1] * x[1])
    elif kind == "taylor_green":
        # Divergence-free only with the axis scalings balanced, as on the cube.
        if len(set(grid.box_length)) != 1:
            raise ValueError("the Taylor-Green preset needs a cubic box")
        depth = np.cos(k[2] * x[2]) if grid.dim == 3 else 1.0
        values[0] = np.sin(k[0] * x[0]) * np.cos(k[1] * x[1]) * depth
        values[1] = -np.cos(k[0] * x[0]) * np.sin(k[1] * x[1]) * depth
    elif kind == "random_seeded":
        rng = np.random.default_rng(seed)
        noise = SpectralField.from_nodal(grid, rng.standard_normal((grid.dim,) + grid.shape))
        band = np.all(np.abs(grid.mode_indices) <= modes, axis=0) & grid.dealias_mask
        taper = band / (1.0 + grid.wavenumber_sq)
        taper[(0,) * grid.dim] = 0.0
        shaped = leray_project(SpectralField(grid, noise.coefficients * taper))
        rms = shaped.norm() / math.sqrt(grid.volume)
        return shaped * (amplitude / rms) if rms > 0 else shaped
    else:
        raise ValueError(f"unknown velocity preset '{kind}'")
    return SpectralField.from_nodal(grid, amplitude * values)
