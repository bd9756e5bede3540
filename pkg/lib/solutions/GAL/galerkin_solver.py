"""Density-coupled Galerkin system for the Navier-Stokes-Voigt equations.

The velocity is u = sum_i c_i psi_i on the Stokes basis. The coefficients
obey

    (G(rho) + kappa K) c' = <rho f, psi_i> - <rho (u.grad) u, psi_i> - mu K c

with G(rho)_il = <rho psi_l, psi_i> and K = diag(|k_i|^2), while the density
is carried by the continuity equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import ContractViolation, DegeneracyError, NumericalFailure
from ..INI.initial_data import DensityField, InitialData, project_velocity
from ..SPC.spectral_core import SpectralField, StokesBasis, dealias_nodal, differentiate
from ..TRN.transport import DEFAULT_CFL_LIMIT, advance_density
from .forcing import Forcing

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FluidParams:
    """Viscosity mu, relaxation time kappa and forcing.

    kappa = 0 is accepted for Navier-Stokes comparison runs, which lie
    outside the existence theory.
    """

    mu: float
    kappa: float = 1.0
    forcing: Forcing = field(default_factory=Forcing)

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"viscosity mu must be positive, got {self.mu}")
        if not self.kappa >= 0:
            raise ValueError(f"relaxation time kappa must be non-negative, got {self.kappa}")

    @property
    def sigma(self) -> float:
        return self.kappa / self.mu

    @property
    def in_theory(self) -> bool:
        return self.kappa > 0


@dataclass(frozen=True, eq=False)
class GalerkinState:
    time: float
    coeffs: np.ndarray
    rho: DensityField
    basis: StokesBasis
    dissipation: float = 0.0  # mu * int_0^t |grad u|^2

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape != (self.basis.size,):
            raise ContractViolation(f"expected {self.basis.size} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise NumericalFailure("non-finite Galerkin coefficients", self.time)
        if self.rho.grid != self.basis.grid:
            raise ContractViolation("density and basis live on different grids")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def velocity(self) -> np.ndarray:
        return self.basis.synthesize(self.coeffs)


def convective_term(basis: StokesBasis, coeffs: np.ndarray) -> np.ndarray:
    """Dealiased nodal (u.grad) u for u = sum_i coeffs[i] psi_i."""
    grid = basis.grid
    u = basis.synthesize(coeffs)
    if not np.any(coeffs):
        return np.zeros_like(u)
    gradient = differentiate(SpectralField.from_nodal(grid, u), "gradient").to_nodal()
    gradient = gradient.reshape((grid.dim, grid.dim) + grid.shape)
    return dealias_nodal(grid, np.einsum("a...,ca...->c...", u, gradient))


class GalerkinSolver:
    """Assembles and advances the Galerkin system for one basis and parameter set.

    Each Runge-Kutta stage solves with the density frozen at the start of the
    step; the density is then transported once with the stage-averaged
    velocity.
    """

    def __init__(self, basis: StokesBasis, params: FluidParams, cfl_limit: float = DEFAULT_CFL_LIMIT) -> None:
        self.basis = basis
        self.params = params
        self.cfl_limit = cfl_limit
        self.stiffness = basis.wavenumber_sq

    def mass_matrix(self, rho: DensityField, time: float = 0.0) -> np.ndarray:
        # rho psi_l psi_i is integrated on the nodes without dealiasing
        mass = self.basis.weighted_gram(rho.values) + self.params.kappa * np.diag(self.stiffness)
        if not np.all(np.isfinite(mass)):
            raise NumericalFailure("non-finite mass matrix", time)
        return mass

    def right_hand_side(self, coeffs: np.ndarray, rho: DensityField, time: float) -> np.ndarray:
        rho_values = rho.values
        # rho (u.grad) u is projected without a second dealiasing pass; only the
        # basis wavevectors of the product are read
        rhs = -self.basis.project(rho_values * convective_term(self.basis, coeffs))
        rhs -= self.params.mu * self.stiffness * coeffs
        forcing = self.params.forcing
        if not forcing.is_zero:
            rhs += self.basis.project(rho_values * forcing.evaluate(self.basis.grid, time))
        if not np.all(np.isfinite(rhs)):
            raise NumericalFailure("non-finite right-hand side", time)
        return rhs

    def assemble_system(self, state: GalerkinState) -> tuple[np.ndarray, np.ndarray]:
        self._require_basis(state)
        return (
            self.mass_matrix(state.rho, state.time),
            self.right_hand_side(state.coeffs, state.rho, state.time),
        )

    def _factor(self, mass: np.ndarray, time: float):
        try:
            return cho_factor(mass)
        except LinAlgError as error:
            raise DegeneracyError(
                "mass matrix is not positive definite: without the relaxation term and with "
                "vanishing density the momentum equation degenerates into an elliptic equation",
                time,
            ) from error

    def time_derivative(self, state: GalerkinState) -> np.ndarray:
        """Coefficient derivative c' from the mass-matrix solve at ``state``."""
        mass, rhs = self.assemble_system(state)
        return cho_solve(self._factor(mass, state.time), rhs)

    def step(self, state: GalerkinState, dt: float, new_time: Optional[float] = None) -> GalerkinState:
        """Classical RK4 for the coefficients, then one density transport step."""
        if dt <= 0:
            raise ValueError(f"time step must be positive, got {dt}")
        self._require_basis(state)
        rho, t0, c0 = state.rho, state.time, state.coeffs
        factor = self._factor(self.mass_matrix(rho, t0), t0)

        def slope(coeffs: np.ndarray, time: float) -> np.ndarray:
            return cho_solve(factor, self.right_hand_side(coeffs, rho, time))

        k1 = slope(c0, t0)
        c2 = c0 + 0.5 * dt * k1
        k2 = slope(c2, t0 + 0.5 * dt)
        c3 = c0 + 0.5 * dt * k2
        k3 = slope(c3, t0 + 0.5 * dt)
        c4 = c0 + dt * k3
        k4 = slope(c4, t0 + dt)
        coeffs = c0 + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        # The dissipation integral rides on the same stages, keeping fourth order.
        rates = [self.params.mu * np.dot(self.stiffness, c * c) for c in (c0, c2, c3, c4)]
        dissipation = state.dissipation + dt / 6.0 * (rates[0] + 2.0 * rates[1] + 2.0 * rates[2] + rates[3])

        averaged = (c0 + 2.0 * c2 + 2.0 * c3 + c4) / 6.0
        rho_next = advance_density(rho, self.basis.synthesize(averaged), dt, self.cfl_limit)
        time = t0 + dt if new_time is None else new_time
        return GalerkinState(time, coeffs, rho_next, self.basis, dissipation)

    def _require_basis(self, state: GalerkinState) -> None:
        other = state.basis
        if other is self.basis:
            return
        if (
            other.grid != self.basis.grid
            or not np.array_equal(other.wavevectors, self.basis.wavevectors)
            or not np.array_equal(other.phases, self.basis.phases)
        ):
            raise ContractViolation("state was built on a different basis")


def initial_state(init: InitialData, basis: StokesBasis, perturbation: float = 0.0) -> GalerkinState:
    """Galerkin state at t = 0 from mollified data.

    ``perturbation`` is added to the first coefficient.
    """
    if init.grid != basis.grid:
        raise ContractViolation("initial data and basis live on different grids")
    rho0n, u0n = init.regularized()
    coeffs = project_velocity(u0n, basis)
    if perturbation:
        coeffs = coeffs.copy()
        coeffs[0] += perturbation
    return GalerkinState(0.0, coeffs, rho0n, basis)


def assemble_system(state: GalerkinState, params: FluidParams) -> tuple[np.ndarray, np.ndarray]:
    return GalerkinSolver(state.basis, params).assemble_system(state)


def step(state: GalerkinState, params: FluidParams, dt: float, cfl_limit: float = DEFAULT_CFL_LIMIT) -> GalerkinState:
    return GalerkinSolver(state.basis, params, cfl_limit).step(state, dt)


def reconstruct_velocity(state: GalerkinState) -> SpectralField:
    return SpectralField.from_nodal(state.basis.grid, state.velocity)
