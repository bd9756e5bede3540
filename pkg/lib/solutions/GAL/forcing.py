"""External force fields f(t, x)."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal, Optional

import numpy as np

from ..errors import ContractViolation
from ..SPC.spectral_core import Grid

logger = logging.getLogger(__name__)

ForcingKind = Literal["none", "preset", "file"]
PRESETS = ("zero", "steady_shear", "pulse")

# Exponent of the pulse singularity; square integrable in time, unbounded.
PULSE_EXPONENT = -0.25


@lru_cache(maxsize=8)
def _load_table(path: str) -> tuple[Optional[np.ndarray], np.ndarray]:
    if path.endswith(".npz"):
        with np.load(path) as archive:
            return np.asarray(archive["times"], dtype=float), np.asarray(archive["values"], dtype=float)
    return None, np.asarray(np.load(path), dtype=float)


@dataclass(frozen=True)
class Forcing:
    """Forcing description; ``evaluate`` samples it on a grid.

    Presets: ``steady_shear`` is A (sin y, 0) at all times, ``pulse`` is the
    same profile scaled by (t - t_start)^(-1/4) on (t_start, t_end].
    Files: ``.npy`` holds a steady (d, *grid) array, ``.npz`` holds ``times``
    and ``values`` interpolated linearly in time.
    """

    kind: ForcingKind = "none"
    preset: str = "steady_shear"
    amplitude: float = 0.0
    t_start: float = 0.0
    t_end: float = 1.0
    path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.kind not in ("none", "preset", "file"):
            raise ValueError(f"unknown forcing kind '{self.kind}'")
        if self.kind == "preset" and self.preset not in PRESETS:
            raise ValueError(f"unknown forcing preset '{self.preset}', expected one of {PRESETS}")
        if self.kind == "file":
            if not self.path or not os.path.isfile(self.path):
                raise ValueError(f"forcing file '{self.path}' does not exist")
            if not self.path.endswith((".npy", ".npz")):
                raise ValueError("forcing files must be .npy or .npz")
        if self.t_end < self.t_start:
            raise ValueError("forcing window ends before it starts")

    @property
    def is_zero(self) -> bool:
        if self.kind == "none":
            return True
        return self.kind == "preset" and (self.preset == "zero" or self.amplitude == 0.0)

    @property
    def hypothesis(self) -> str:
        """Which time-integrability class the forcing belongs to."""
        if self.kind == "preset" and self.preset == "pulse" and not self.is_zero:
            return "L2"
        return "Linfty"

    def evaluate(self, grid: Grid, t: float) -> np.ndarray:
        if self.is_zero:
            return np.zeros((grid.dim,) + grid.shape)
        if self.kind == "file":
            return self._tabulated(grid, t)
        scale = self.amplitude
        if self.preset == "pulse":
            if not self.t_start < t <= self.t_end:
                return np.zeros((grid.dim,) + grid.shape)
            scale *= (t - self.t_start) ** PULSE_EXPONENT
        values = np.zeros((grid.dim,) + grid.shape)
        values[0] = scale * np.sin(2.0 * math.pi / grid.box_length[1] * grid.coordinates[1])
        return values

    def _tabulated(self, grid: Grid, t: float) -> np.ndarray:
        times, values = _load_table(self.path)
        layout = (grid.dim,) + grid.shape
        if times is None:
            if values.shape != layout:
                raise ContractViolation(f"forcing table of shape {values.shape} does not fit {layout}")
            return values
        if values.shape[1:] != layout or len(times) != len(values):
            raise ContractViolation(f"forcing table of shape {values.shape} does not fit {layout}")
        if t <= times[0]:
            return values[0]
        if t >= times[-1]:
            return values[-1]
        upper = int(np.searchsorted(times, t))
        weight = (t - times[upper - 1]) / (times[upper] - times[upper - 1])
        return (1.0 - weight) * values[upper - 1] + weight * values[upper]

    def time_derivative(self, grid: Grid, t: float, step: float = 1e-6) -> np.ndarray:
        """Central difference in time, one-sided at the start of a pulse."""
        if self.is_zero:
            return np.zeros((grid.dim,) + grid.shape)
        earlier = max(t - step, self.t_start + step) if self.preset == "pulse" else t - step
        later = max(t + step, earlier + step)
        return (self.evaluate(grid, later) - self.evaluate(grid, earlier)) / (later - earlier)
