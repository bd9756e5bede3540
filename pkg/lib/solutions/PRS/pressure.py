"""Pressure recovery from the Galerkin momentum balance.

The momentum residual R = rho f - rho u_t - rho (u.grad) u + mu Lap u
+ kappa Lap u_t equals grad p plus a solenoidal remainder. Its gradient part
is extracted with a spectral Poisson solve and the pressure is normalized to
zero mean.
"""

from __future__ import annotations

import logging
from typing import Union

import numpy as np

from ..errors import ContractViolation, UnsupportedConfiguration
from ..GAL.galerkin_solver import FluidParams, GalerkinState, convective_term
from ..SPC.spectral_core import Grid, SpectralField, dealias, differentiate

logger = logging.getLogger(__name__)


def _as_field(grid: Grid, values: Union[SpectralField, np.ndarray]) -> SpectralField:
    field = values if isinstance(values, SpectralField) else SpectralField.from_nodal(grid, values)
    if field.grid != grid or not field.is_vector:
        raise ContractViolation("momentum residual must be a vector field on the grid")
    return field


def pressure_from_residual(grid: Grid, residual: Union[SpectralField, np.ndarray]) -> SpectralField:
    """Zero-mean p with Lap p = div R, R dealiased first."""
    coefficients = dealias(_as_field(grid, residual)).coefficients
    k = grid.wavenumbers
    k_sq = grid.wavenumber_sq
    inverse = np.divide(1.0, k_sq, out=np.zeros_like(k_sq), where=k_sq > 0)
    return SpectralField(grid, -1j * np.sum(k * coefficients, axis=0) * inverse)


def _state_fields(state: GalerkinState, state_dot: np.ndarray, params: FluidParams) -> dict[str, np.ndarray]:
    basis = state.basis
    state_dot = np.asarray(state_dot, dtype=float)
    if state_dot.shape != state.coeffs.shape:
        raise ContractViolation(f"expected {basis.size} coefficient derivatives, got shape {state_dot.shape}")
    rho = state.rho.values
    return {
        "rho": rho,
        "u_t": basis.synthesize(state_dot),
        "lap_u": basis.synthesize(-basis.wavenumber_sq * state.coeffs),
        "lap_u_t": basis.synthesize(-basis.wavenumber_sq * state_dot),
        "convection": convective_term(basis, state.coeffs),
        "forcing": params.forcing.evaluate(basis.grid, state.time),
    }


def _inertial_balance(fields: dict[str, np.ndarray]) -> np.ndarray:
    rho = fields["rho"]
    return rho * fields["forcing"] - rho * fields["u_t"] - rho * fields["convection"]


def momentum_residual(state: GalerkinState, state_dot: np.ndarray, params: FluidParams) -> np.ndarray:
    fields = _state_fields(state, state_dot, params)
    return _inertial_balance(fields) + params.mu * fields["lap_u"] + params.kappa * fields["lap_u_t"]


def recover_pressure(state: GalerkinState, state_dot: np.ndarray, params: FluidParams) -> SpectralField:
    return pressure_from_residual(state.basis.grid, momentum_residual(state, state_dot, params))


def pressure_gradient_norm(p: SpectralField) -> float:
    """L2 norm of grad p by Parseval."""
    if p.components != 1:
        raise ContractViolation("pressure must be a scalar field")
    return float(np.sqrt(p.grid.volume * np.sum(p.grid.wavenumber_sq * np.abs(p.coefficients[0]) ** 2)))


def voigt_stokes_check(
    state: GalerkinState,
    state_dot: np.ndarray,
    params: FluidParams,
    p: SpectralField = None,
) -> float:
    """Residual of -mu Lap w + grad p = rho f - rho u_t - rho (u.grad) u within span(basis).

    w = u + sigma u_t with sigma = kappa / mu, so the stationary Stokes
    problem reproduces the Voigt momentum balance at a fixed time. The part
    of the residual outside the Galerkin space is the solenoidal remainder of
    the balance, nonzero for variable density, and is not measured.
    """
    if not params.kappa > 0:
        raise UnsupportedConfiguration("the stationary Stokes reformulation needs kappa > 0")
    basis = state.basis
    grid = basis.grid
    fields = _state_fields(state, state_dot, params)
    source = _inertial_balance(fields)
    if p is None:
        p = pressure_from_residual(grid, source + params.mu * fields["lap_u"] + params.kappa * fields["lap_u_t"])
    lap_w = fields["lap_u"] + params.sigma * fields["lap_u_t"]
    grad_p = differentiate(p, "gradient").to_nodal()
    residual = -params.mu * lap_w + grad_p - source
    # orthonormal modes: the coefficient norm is the L2 norm of the projection
    return float(np.linalg.norm(basis.project(residual)))
