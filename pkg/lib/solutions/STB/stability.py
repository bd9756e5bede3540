"""Stability monitor for two solutions started from nearby data.

For u = u_hat - u_bar and rho = rho_hat - rho_bar the difference energy

    E = |sqrt(rho_hat) u|^2 + kappa |grad u|^2 + |rho|^2

satisfies dE/dt <= A(t) E. The monitor instantiates

    A(t) = C (1 + |grad u_bar|_inf^2 + |u_bar_t|_6^2 + |grad rho_bar|_inf^2)

with C calibrated once on a reference pair and then frozen. The pairs that
are checked against the bound never take part in the calibration.
"""

from __future__ import annotations

import logging
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import ContractViolation, StabilityError, UniquenessViolation
from ..GAL.galerkin_solver import FluidParams, GalerkinSolver, GalerkinState, convective_term
from ..SPC.spectral_core import SpectralField, differentiate

logger = logging.getLogger(__name__)

SOBOLEV_EXPONENT = 6  # 2* in three dimensions; any finite exponent is admissible in two


class GronwallReport(NamedTuple):
    times: np.ndarray
    energies: np.ndarray
    bounds: np.ndarray
    rates: np.ndarray
    productions: np.ndarray
    constant: float
    passed: bool
    production_bounded: bool  # P <= C * rate * E at every snapshot

    def relative_energies(self) -> np.ndarray:
        if self.energies[0] == 0:
            return np.zeros_like(self.energies)
        return self.energies / self.energies[0]


def _check_pair(a: GalerkinState, b: GalerkinState) -> None:
    if a.basis.grid != b.basis.grid or a.basis.size != b.basis.size:
        raise ContractViolation("the two states live on different bases")
    if a.time != b.time:
        raise StabilityError(f"states are at different times: {a.time} and {b.time}")


def difference_energy(a: GalerkinState, b: GalerkinState, params: FluidParams) -> float:
    _check_pair(a, b)
    basis = a.basis
    weight = basis.grid.cell_volume
    dc = a.coeffs - b.coeffs
    du = basis.synthesize(dc)
    drho = a.rho.values - b.rho.values
    return float(
        weight * np.sum(a.rho.values * du * du)
        + params.kappa * np.dot(basis.wavenumber_sq, dc * dc)
        + weight * np.sum(drho * drho)
    )


def _velocity_gradient(state: GalerkinState) -> np.ndarray:
    grid = state.basis.grid
    gradient = differentiate(SpectralField.from_nodal(grid, state.velocity), "gradient").to_nodal()
    return gradient.reshape((grid.dim, grid.dim) + grid.shape)


def density_gradient(state: GalerkinState) -> np.ndarray:
    """Periodic central differences of the density, one component per axis."""
    grid = state.basis.grid
    rho = state.rho.values
    return np.stack(
        [
            (np.roll(rho, -1, axis=axis) - np.roll(rho, 1, axis=axis)) / (2.0 * grid.spacing[axis])
            for axis in range(grid.dim)
        ]
    )


def difference_production(
    a: GalerkinState, b: GalerkinState, b_dot: np.ndarray, params: FluidParams
) -> float:
    """Right-hand side P of dE/dt + 2 mu |grad u|^2 = P.

    P = 2 int (rho [f - u_bar_t - (u_bar.grad) u_bar] - rho_hat (u.grad) u_bar).u
        - 2 int rho (u.grad) rho_bar
    """
    _check_pair(a, b)
    basis = a.basis
    grid = basis.grid
    u = basis.synthesize(a.coeffs - b.coeffs)
    drho = a.rho.values - b.rho.values
    base_acceleration = basis.synthesize(np.asarray(b_dot, dtype=float)) + convective_term(basis, b.coeffs)
    if not params.forcing.is_zero:
        base_acceleration = base_acceleration - params.forcing.evaluate(grid, b.time)
    stretching = np.einsum("a...,ca...->c...", u, _velocity_gradient(b))
    momentum = -drho * base_acceleration - a.rho.values * stretching
    transport = drho * np.einsum("a...,a...->...", u, density_gradient(b))
    return float(2.0 * grid.cell_volume * (np.sum(momentum * u) - np.sum(transport)))


def growth_rate(state: GalerkinState, state_dot: np.ndarray) -> float:
    """1 + |grad u|_inf^2 + |u_t|_6^2 + |grad rho|_inf^2 at one state."""
    grid = state.basis.grid
    grad_u = np.sqrt(np.sum(_velocity_gradient(state) ** 2, axis=(0, 1)))
    u_t = np.sqrt(np.sum(state.basis.synthesize(np.asarray(state_dot, dtype=float)) ** 2, axis=0))
    u_t_norm = (grid.cell_volume * np.sum(u_t**SOBOLEV_EXPONENT)) ** (1.0 / SOBOLEV_EXPONENT)
    grad_rho = np.sqrt(np.sum(density_gradient(state) ** 2, axis=0))
    return float(1.0 + np.max(grad_u) ** 2 + u_t_norm**2 + np.max(grad_rho) ** 2)


class _Series(NamedTuple):
    times: np.ndarray
    energies: np.ndarray
    rates: np.ndarray
    productions: np.ndarray


class GronwallMonitor:
    """Compares paired snapshots of a perturbed run against a base run.

    ``calibrate`` freezes C on a reference pair; ``monitor`` checks any other
    pair against the frozen constant.
    """

    def __init__(
        self,
        params: FluidParams,
        solver: GalerkinSolver,
        constant: Optional[float] = None,
        margin: float = 2.0,
    ) -> None:
        if margin < 1.0:
            raise ValueError(f"calibration margin must be at least 1, got {margin}")
        if constant is not None and constant < 0:
            raise ValueError(f"Gronwall constant must be non-negative, got {constant}")
        self.params = params
        self.solver = solver
        self.constant = constant
        self.margin = margin

    def _series(self, perturbed: Sequence[GalerkinState], base: Sequence[GalerkinState]) -> _Series:
        if len(perturbed) != len(base):
            raise StabilityError(f"runs hold {len(perturbed)} and {len(base)} snapshots")
        if len(base) < 2:
            raise StabilityError("the monitor needs at least two paired snapshots")
        rates, productions = [], []
        for a, b in zip(perturbed, base):
            b_dot = self.solver.time_derivative(b)
            rates.append(growth_rate(b, b_dot))
            productions.append(difference_production(a, b, b_dot, self.params))
        return _Series(
            np.array([state.time for state in base]),
            np.array([difference_energy(a, b, self.params) for a, b in zip(perturbed, base)]),
            np.array(rates),
            np.array(productions),
        )

    @staticmethod
    def _separation(series: _Series) -> None:
        if series.energies[0] == 0 and np.any(series.energies > 0):
            first = int(np.argmax(series.energies > 0))
            raise UniquenessViolation(
                f"solutions from identical data separate at t = {series.times[first]} "
                f"(E = {series.energies[first]:.3e})"
            )

    def calibrate(self, perturbed: Sequence[GalerkinState], base: Sequence[GalerkinState]) -> float:
        """Freeze the smallest C with margin * E(t) <= E(0) exp(C int_0^t rate)."""
        series = self._series(perturbed, base)
        self._separation(series)
        if series.energies[0] == 0:
            raise StabilityError("a calibration pair must start from different data")
        integrated = cumulative_trapezoid(series.rates, series.times, initial=0.0)
        energies = np.maximum(series.energies[1:], np.finfo(float).tiny)
        needed = np.log(self.margin * energies / series.energies[0]) / integrated[1:]
        self.constant = float(max(0.0, np.max(needed)))
        logger.info("calibrated Gronwall constant C = %.6g (margin %g)", self.constant, self.margin)
        return self.constant

    def monitor(self, perturbed: Sequence[GalerkinState], base: Sequence[GalerkinState]) -> GronwallReport:
        series = self._series(perturbed, base)
        self._separation(series)
        times, energies, rates, productions = series
        if energies[0] == 0:
            zeros = np.zeros_like(energies)
            return GronwallReport(times, energies, zeros, rates, productions, self.constant or 0.0, True, True)
        if self.constant is None:
            raise StabilityError("the Gronwall constant is neither configured nor calibrated")
        bounds = energies[0] * np.exp(self.constant * cumulative_trapezoid(rates, times, initial=0.0))
        passed = bool(np.all(energies <= bounds * (1.0 + 1e-12)))
        if not passed:
            worst = int(np.argmax(energies / bounds))
            logger.warning(
                "Gronwall bound exceeded at t = %.6g: E = %.6e > %.6e", times[worst], energies[worst], bounds[worst]
            )
        production_bounded = bool(np.all(productions <= self.constant * rates * energies * (1.0 + 1e-9)))
        if not production_bounded:
            logger.warning("energy production outgrows C * rate * E for C = %.6g", self.constant)
        return GronwallReport(times, energies, bounds, rates, productions, self.constant, passed, production_bounded)


def gronwall_monitor(
    run_a: Sequence[GalerkinState],
    run_b: Sequence[GalerkinState],
    params: FluidParams,
    constant: Optional[float] = None,
    margin: float = 2.0,
    calibration: Optional[tuple[Sequence[GalerkinState], Sequence[GalerkinState]]] = None,
) -> GronwallReport:
    """Monitor run_a against base run_b.

    Without a ``constant`` the Gronwall constant is calibrated on the separate
    ``calibration`` pair (perturbed, base); a pair whose data differ needs one
    of the two.
    """
    solver = GalerkinSolver(run_b[0].basis, params)
    monitor = GronwallMonitor(params, solver, constant, margin)
    if constant is None and calibration is not None:
        monitor.calibrate(*calibration)
    return monitor.monitor(run_a, run_b)


def scale_invariance(first: GronwallReport, second: GronwallReport, tolerance: float = 0.1) -> tuple[bool, float]:
    """Agreement of E(t)/E(0) between two perturbation sizes.

    Returns whether the largest relative deviation stays within ``tolerance``
    and the deviation itself.
    """
    if first.times.shape != second.times.shape or not np.allclose(first.times, second.times):
        raise StabilityError("scale comparison needs runs on the same snapshot times")
    a, b = first.relative_energies(), second.relative_energies()
    scale = np.maximum(np.abs(b), np.finfo(float).tiny)
    deviation = float(np.max(np.abs(a - b) / scale))
    return deviation <= tolerance, deviation
