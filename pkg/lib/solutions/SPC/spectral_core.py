"""Fourier machinery on the periodic box.

Fields are stored as normalized Fourier amplitudes: ``coefficients`` is
``fftn(values) / N**d`` so the entry at wavevector k is the amplitude of
exp(i k.x). With this convention the discrete L2 inner product is
``volume * sum(a * conj(b))`` (Parseval) and matches nodal quadrature
``cell_volume * sum(a * b)`` exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Literal, Sequence, Union

import numpy as np

from ..errors import CapacityError, ContractViolation

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

DerivativeKind = Literal["gradient", "divergence", "laplacian"]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with the same number of nodes on every axis."""

    dim: int
    points_per_axis: int
    box_length: Union[float, Sequence[float]] = TWO_PI

    def __post_init__(self) -> None:
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if int(self.points_per_axis) != self.points_per_axis:
            raise TypeError("points_per_axis must be an integer")
        if self.points_per_axis < 8 or self.points_per_axis % 2:
            raise ValueError(
                f"points_per_axis must be even and at least 8, got {self.points_per_axis}"
            )
        lengths = (
            tuple(self.box_length)
            if isinstance(self.box_length, (tuple, list))
            else (self.box_length,) * self.dim
        )
        if len(lengths) != self.dim or any(length <= 0 for length in lengths):
            raise ValueError(f"box_length must hold {self.dim} positive values")
        object.__setattr__(self, "box_length", tuple(float(length) for length in lengths))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(length / self.points_per_axis for length in self.box_length)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.box_length))

    @property
    def dealias_cutoff(self) -> int:
        """Largest integer mode index kept by the two-thirds rule."""
        return self.points_per_axis // 3

    @cached_property
    def coordinates(self) -> np.ndarray:
        axes = [np.arange(self.points_per_axis) * h for h in self.spacing]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def mode_indices(self) -> np.ndarray:
        n = self.points_per_axis
        m = np.fft.fftfreq(n, d=1.0 / n)
        return np.stack(np.meshgrid(*([m] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        # The Nyquist index has no conjugate partner, so it carries no derivative.
        nyquist = self.mode_indices == -self.points_per_axis // 2
        scale = np.array([TWO_PI / length for length in self.box_length])
        scale = scale.reshape((self.dim,) + (1,) * self.dim)
        return np.where(nyquist, 0.0, self.mode_indices * scale)

    @cached_property
    def wavenumber_sq(self) -> np.ndarray:
        return np.sum(self.wavenumbers**2, axis=0)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        return np.all(np.abs(self.mode_indices) <= self.points_per_axis / 3, axis=0)

    def fft_axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Truncated Fourier representation of a real scalar or vector field."""

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coefficients = np.array(self.coefficients, dtype=complex)
        if coefficients.ndim == self.grid.dim:
            coefficients = coefficients[np.newaxis]
        if coefficients.ndim != self.grid.dim + 1 or coefficients.shape[1:] != self.grid.shape:
            raise ContractViolation(
                f"coefficients of shape {coefficients.shape} do not fit grid {self.grid.shape}"
            )
        coefficients.flags.writeable = False
        object.__setattr__(self, "coefficients", coefficients)

    @classmethod
    def from_nodal(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ContractViolation("nodal values must be finite")
        points = grid.points_per_axis**grid.dim
        return cls(grid, np.fft.fftn(values, axes=grid.fft_axes()) / points)

    @classmethod
    def zeros(cls, grid: Grid, components: int) -> "SpectralField":
        return cls(grid, np.zeros((components,) + grid.shape, dtype=complex))

    @property
    def components(self) -> int:
        return self.coefficients.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.components == self.grid.dim

    def to_nodal(self) -> np.ndarray:
        points = self.grid.points_per_axis**self.grid.dim
        return np.fft.ifftn(self.coefficients, axes=self.grid.fft_axes()).real * points

    def norm(self) -> float:
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coefficients) ** 2)))

    def inner(self, other: "SpectralField") -> float:
        _require_same_layout(self, other)
        return float(self.grid.volume * np.sum(self.coefficients * np.conj(other.coefficients)).real)

    def mean(self) -> np.ndarray:
        return self.coefficients[(slice(None),) + (0,) * self.grid.dim].real.copy()

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _require_same_layout(self, other)
        return SpectralField(self.grid, self.coefficients + other.coefficients)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _require_same_layout(self, other)
        return SpectralField(self.grid, self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coefficients * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coefficients)


def _require_same_layout(a: SpectralField, b: SpectralField) -> None:
    if a.grid != b.grid or a.components != b.components:
        raise ContractViolation("fields live on different grids or have different component counts")


def _require_vector(field: SpectralField, operation: str) -> None:
    if not field.is_vector:
        raise ContractViolation(
            f"{operation} needs a {field.grid.dim}-component vector field, got {field.components}"
        )


def differentiate(field: SpectralField, kind: DerivativeKind) -> SpectralField:
    """Apply an exact spectral derivative.

    ``gradient`` of a C-component field returns C*d components ordered
    component-major (entry ``c*d + a`` is the derivative of component c along
    axis a).
    """
    grid = field.grid
    k = grid.wavenumbers
    c = field.coefficients
    if kind == "gradient":
        out = 1j * k[np.newaxis] * c[:, np.newaxis]
        return SpectralField(grid, out.reshape((field.components * grid.dim,) + grid.shape))
    if kind == "divergence":
        _require_vector(field, "divergence")
        return SpectralField(grid, np.sum(1j * k * c, axis=0))
    if kind == "laplacian":
        return SpectralField(grid, -grid.wavenumber_sq * c)
    raise ContractViolation(f"unknown derivative kind '{kind}'")


def leray_project(field: SpectralField) -> SpectralField:
    """Project a vector field onto its divergence-free part, mode by mode."""
    _require_vector(field, "leray_project")
    grid = field.grid
    k = grid.wavenumbers
    k_sq = grid.wavenumber_sq
    inverse = np.divide(1.0, k_sq, out=np.zeros_like(k_sq), where=k_sq > 0)
    k_dot_v = np.sum(k * field.coefficients, axis=0)
    return SpectralField(grid, field.coefficients - k * (k_dot_v * inverse))


def stokes_apply(field: SpectralField, mu: float) -> SpectralField:
    """Stokes operator u -> -mu P(Laplacian u); the input is projected first."""
    projected = leray_project(field)
    return leray_project(differentiate(projected, "laplacian")) * (-mu)


def dealias(field: SpectralField) -> SpectralField:
    """Zero every coefficient with an index beyond a third of the grid (two-thirds rule)."""
    return SpectralField(field.grid, field.coefficients * field.grid.dealias_mask)


def dealias_nodal(grid: Grid, values: np.ndarray) -> np.ndarray:
    return dealias(SpectralField.from_nodal(grid, values)).to_nodal()


@dataclass(frozen=True, eq=False)
class StokesBasis:
    """Real divergence-free Fourier modes, H-orthonormal, sorted by eigenvalue.

    A wavevector m whose first non-zero entry is positive gives the cosine
    mode of its line; its negative gives the sine mode.
    """

    grid: Grid
    mu: float
    wavevectors: np.ndarray
    polarizations: np.ndarray
    phases: np.ndarray

    @property
    def size(self) -> int:
        return len(self.wavevectors)

    @cached_property
    def physical_wavevectors(self) -> np.ndarray:
        """Wavevectors of the positive representative of each mode's line."""
        scale = np.array([TWO_PI / length for length in self.grid.box_length])
        signs = np.where(self.phases == 0, 1.0, -1.0)[:, np.newaxis]
        return self.wavevectors * signs * scale

    @cached_property
    def wavenumber_sq(self) -> np.ndarray:
        return np.sum(self.physical_wavevectors**2, axis=1)

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.mu * self.wavenumber_sq

    @cached_property
    def values(self) -> np.ndarray:
        """Nodal samples, shape (j, d, *grid.shape)."""
        grid = self.grid
        amplitude = np.sqrt(2.0 / grid.volume)
        x = grid.coordinates
        values = np.empty((self.size, grid.dim) + grid.shape)
        for i, (k, e, phase) in enumerate(zip(self.physical_wavevectors, self.polarizations, self.phases)):
            argument = np.tensordot(k, x, axes=1)
            wave = np.cos(argument) if phase == 0 else np.sin(argument)
            values[i] = amplitude * e.reshape((grid.dim,) + (1,) * grid.dim) * wave
        values.flags.writeable = False
        return values

    def mode_field(self, index: int) -> SpectralField:
        return SpectralField.from_nodal(self.grid, self.values[index])

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Nodal vector field sum_i coeffs[i] * psi_i."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.size,):
            raise ContractViolation(f"expected {self.size} coefficients, got shape {coeffs.shape}")
        return np.tensordot(coeffs, self.values, axes=1)

    def project(self, nodal: np.ndarray) -> np.ndarray:
        """Discrete L2 inner products of a nodal vector field with every mode."""
        nodal = np.asarray(nodal, dtype=float)
        if nodal.shape != self.values.shape[1:]:
            raise ContractViolation(
                f"field of shape {nodal.shape} does not match basis layout {self.values.shape[1:]}"
            )
        flat = self.values.reshape(self.size, -1)
        return (flat @ nodal.reshape(-1)) * self.grid.cell_volume

    def weighted_gram(self, weight: np.ndarray) -> np.ndarray:
        """Matrix of <weight * psi_l, psi_i> by nodal quadrature."""
        # not dealiased: the product is only read against the basis wavevectors
        flat = self.values.reshape(self.size, self.grid.dim, -1)
        weighted = flat * np.asarray(weight).reshape(1, 1, -1)
        gram = weighted.reshape(self.size, -1) @ flat.reshape(self.size, -1).T
        gram *= self.grid.cell_volume
        return 0.5 * (gram + gram.T)


def _polarizations(k: np.ndarray) -> list[np.ndarray]:
    unit = k / np.linalg.norm(k)
    if len(k) == 2:
        return [np.array([-unit[1], unit[0]])]
    axis = np.array([0.0, 0.0, 1.0]) if abs(unit[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    first = np.cross(unit, axis)
    first /= np.linalg.norm(first)
    second = np.cross(unit, first)
    return [first, second / np.linalg.norm(second)]


def _is_positive(m: tuple[int, ...]) -> bool:
    return next(entry for entry in m if entry != 0) > 0


def basis_capacity(grid: Grid) -> int:
    per_wavevector = 1 if grid.dim == 2 else 2
    return ((2 * grid.dealias_cutoff + 1) ** grid.dim - 1) * per_wavevector


def build_basis(grid: Grid, j: int, mu: float) -> StokesBasis:
    """The j lowest-eigenvalue divergence-free modes of the dealiased grid.

    Ordering is by |k|^2, then lexicographic integer wavevector, then
    polarization index, so runs are reproducible.
    """
    if j < 1:
        raise ValueError(f"basis size must be positive, got {j}")
    maximum = basis_capacity(grid)
    if j > maximum:
        raise CapacityError(j, maximum)
    cutoff = grid.dealias_cutoff
    scale = np.array([TWO_PI / length for length in grid.box_length])
    entries = []
    for m in product(range(-cutoff, cutoff + 1), repeat=grid.dim):
        if not any(m):
            continue
        positive = _is_positive(m)
        line = np.array(m if positive else tuple(-entry for entry in m), dtype=float) * scale
        k_sq = float(np.sum(line**2))
        for index, e in enumerate(_polarizations(line)):
            entries.append((round(k_sq, 10), m, index, e, 0 if positive else 1))
    entries.sort(key=lambda entry: entry[:3])
    chosen = entries[:j]
    logger.debug("built Stokes basis with %d of %d modes on %s", j, maximum, grid.shape)
    return StokesBasis(
        grid=grid,
        mu=mu,
        wavevectors=np.array([entry[1] for entry in chosen], dtype=float),
        polarizations=np.array([entry[3] for entry in chosen]),
        phases=np.array([entry[4] for entry in chosen]),
    )
