import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lib.solutions.errors import ContractViolation, DegeneracyError, NumericalFailure
from lib.solutions.EST.estimates import energy_convergence_ratios
from lib.solutions.GAL.forcing import Forcing
from lib.solutions.GAL.galerkin_solver import (
    FluidParams,
    GalerkinSolver,
    GalerkinState,
    assemble_system,
    convective_term,
    initial_state,
    reconstruct_velocity,
    step,
)
from lib.solutions.INI.initial_data import DensityField, InitialData, VacuumSpec, make_vacuum_density, make_velocity
from lib.solutions.SPC.spectral_core import Grid, build_basis, differentiate

SHEAR = 2  # index of the (cos y, 0) mode among the four lowest
coefficients = arrays(np.float64, (8,), elements=st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False))


def shear_state(grid, j=4, amplitude=1.0, rho=1.0):
    basis = build_basis(grid, j, 1.0)
    coeffs = np.zeros(j)
    coeffs[SHEAR] = amplitude
    return GalerkinState(0.0, coeffs, DensityField.constant(grid, rho), basis)


def taylor_green_state(grid, j=8, rho=None):
    basis = build_basis(grid, j, 1.0)
    coeffs = basis.project(make_velocity(grid, "taylor_green").to_nodal())
    density = rho if rho is not None else DensityField.constant(grid, 1.0)
    return GalerkinState(0.0, coeffs, density, basis)


def advance(solver, state, dt, steps):
    for k in range(1, steps + 1):
        state = solver.step(state, dt, new_time=k * dt)
    return state


class TestFluidParams:
    def test_sigma(self):
        assert FluidParams(0.5, 2.0).sigma == 4.0

    @pytest.mark.parametrize("mu,kappa", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
    def test_invalid(self, mu, kappa):
        with pytest.raises(ValueError):
            FluidParams(mu, kappa)

    def test_navier_stokes_limit_is_outside_the_theory(self):
        assert not FluidParams(1.0, 0.0).in_theory


class TestGalerkinState:
    def test_rejects_non_finite_coefficients(self):
        grid = Grid(2, 16)
        basis = build_basis(grid, 4, 1.0)
        with pytest.raises(NumericalFailure):
            GalerkinState(0.5, [np.inf, 0, 0, 0], DensityField.constant(grid, 1.0), basis)

    def test_rejects_wrong_coefficient_count(self):
        grid = Grid(2, 16)
        with pytest.raises(ContractViolation):
            GalerkinState(0.0, np.zeros(3), DensityField.constant(grid, 1.0), build_basis(grid, 4, 1.0))

    def test_velocity_reconstruction(self):
        grid = Grid(2, 16)
        state = shear_state(grid, amplitude=-math.sqrt(2) * math.pi)
        velocity = reconstruct_velocity(state).to_nodal()
        assert np.allclose(velocity[0], np.cos(grid.coordinates[1]), atol=1e-12)
        assert np.allclose(velocity[1], 0.0, atol=1e-12)

    @given(coeffs=coefficients)
    @settings(max_examples=50, deadline=None)
    def test_reconstruction_keeps_the_coefficient_norm(self, coeffs):
        grid = Grid(2, 16)
        state = GalerkinState(0.0, coeffs, DensityField.constant(grid, 1.0), build_basis(grid, 8, 1.0))
        norm = reconstruct_velocity(state).norm()
        assert norm == pytest.approx(np.linalg.norm(coeffs), rel=1e-10, abs=1e-12)


class TestAssembly:
    def test_unit_density_gives_identity_plus_relaxation(self):
        grid = Grid(2, 16)
        state = shear_state(grid, j=8)
        mass, rhs = assemble_system(state, FluidParams(0.1, 2.0))
        assert np.allclose(mass, np.diag(1.0 + 2.0 * state.basis.wavenumber_sq), atol=1e-12)
        assert rhs[SHEAR] == pytest.approx(-0.1)

    def test_variable_density_against_a_finer_quadrature(self):
        grid, fine = Grid(2, 16), Grid(2, 32)
        rho = DensityField(grid, 1.0 + 0.5 * np.cos(grid.coordinates[0]))
        mass = GalerkinSolver(build_basis(grid, 2, 1.0), FluidParams(1.0, 0.0)).mass_matrix(rho)
        modes = build_basis(fine, 2, 1.0).values
        weight = 1.0 + 0.5 * np.cos(fine.coordinates[0])
        expected = np.einsum("i...,j...,...->ij", modes, modes, weight) * fine.cell_volume
        assert np.allclose(mass, expected, atol=1e-12)

    def test_mass_matrix_is_symmetric_positive_definite_with_vacuum(self):
        grid = Grid(2, 32)
        rho = DensityField(grid, make_vacuum_density(grid, VacuumSpec("disk"), 1.0).values)
        solver = GalerkinSolver(build_basis(grid, 16, 1.0), FluidParams(1.0, 0.5))
        mass = solver.mass_matrix(rho)
        assert np.allclose(mass, mass.T)
        assert np.linalg.eigvalsh(mass).min() > 0

    def test_vanishing_density_without_relaxation_degenerates(self):
        grid = Grid(2, 16)
        state = shear_state(grid, rho=0.0)
        with pytest.raises(DegeneracyError, match="elliptic") as error:
            GalerkinSolver(state.basis, FluidParams(1.0, 0.0)).time_derivative(state)
        assert error.value.time == 0.0

    def test_shear_flow_has_no_convection(self):
        grid = Grid(2, 16)
        state = shear_state(grid)
        assert np.allclose(convective_term(state.basis, state.coeffs), 0.0, atol=1e-14)

    def test_taylor_green_convection_is_a_gradient(self):
        grid = Grid(2, 16)
        state = taylor_green_state(grid)
        convection = convective_term(state.basis, state.coeffs)
        x, y = grid.coordinates
        assert np.allclose(convection[0], 0.5 * np.sin(2 * x), atol=1e-12)
        assert np.allclose(convection[1], 0.5 * np.sin(2 * y), atol=1e-12)

    def test_forcing_enters_the_right_hand_side(self):
        grid = Grid(2, 16)
        state = shear_state(grid, amplitude=0.0)
        params = FluidParams(1.0, 1.0, Forcing("preset", "steady_shear", amplitude=1.0))
        rhs = GalerkinSolver(state.basis, params).right_hand_side(state.coeffs, state.rho, 0.0)
        # (sin y, 0) is minus the sine mode of the y line, scaled by sqrt(2 pi^2)
        assert rhs[1] == pytest.approx(-math.sqrt(2) * math.pi)
        assert np.allclose(np.delete(rhs, 1), 0.0, atol=1e-12)

    def test_state_on_another_basis(self):
        grid = Grid(2, 16)
        solver = GalerkinSolver(build_basis(grid, 8, 1.0), FluidParams(1.0))
        with pytest.raises(ContractViolation):
            solver.time_derivative(shear_state(grid, j=4))


class TestSingleModeDecay:
    @pytest.mark.parametrize(
        "kappa,expected",
        [
            (1.0, 0.951229424500714),  # exp(-mu T / (1 + kappa))
            (0.0, 0.904837418035960),  # Navier-Stokes control, exp(-mu T)
        ],
    )
    def test_amplitude_ratio(self, kappa, expected):
        grid = Grid(2, 16)
        state = shear_state(grid)
        solver = GalerkinSolver(state.basis, FluidParams(0.1, kappa))
        final = advance(solver, state, 1e-3, 1000)
        assert final.time == 1.0
        assert final.coeffs[SHEAR] == pytest.approx(expected, rel=1e-6)
        assert np.allclose(np.delete(final.coeffs, SHEAR), 0.0, atol=1e-12)

    def test_module_level_step(self):
        grid = Grid(2, 16)
        state = shear_state(grid)
        stepped = step(state, FluidParams(0.1, 1.0), 0.01)
        assert stepped.time == pytest.approx(0.01)
        assert stepped.coeffs[SHEAR] == pytest.approx(math.exp(-0.0005), rel=1e-12)


class TestEnergyIdentity:
    def test_energy_functional_converges_at_fourth_order(self):
        grid = Grid(2, 16)
        params = FluidParams(1.0, 0.1)
        residuals = []
        for steps in (10, 20, 40, 80):
            state = taylor_green_state(grid)
            solver = GalerkinSolver(state.basis, params)
            final = advance(solver, state, 1.0 / steps, steps)
            energy = [
                0.5 * np.dot(s.coeffs, s.coeffs)
                + 0.5 * params.kappa * np.dot(s.basis.wavenumber_sq, s.coeffs**2)
                + s.dissipation
                for s in (state, final)
            ]
            residuals.append(abs(energy[1] - energy[0]))
        ratios = energy_convergence_ratios(residuals)
        assert all(12 <= ratio <= 20 for ratio in ratios)

    def test_density_keeps_its_bounds(self):
        grid = Grid(2, 64)
        rho = DensityField(grid, make_vacuum_density(grid, VacuumSpec("disk"), 1.0).values + 0.125)
        state = taylor_green_state(grid, j=8, rho=rho)
        solver = GalerkinSolver(state.basis, FluidParams(0.1, 1.0))
        for k in range(1, 11):
            state = solver.step(state, 0.02, new_time=0.02 * k)
            assert state.rho.minimum >= 0.125
            assert state.rho.maximum <= 1.125


def test_initial_state_from_mollified_data():
    grid = Grid(2, 32)
    init = InitialData(DensityField.constant(grid, 0.75), make_velocity(grid, "taylor_green"), 1.0, 4)
    basis = build_basis(grid, 8, 1.0)
    state = initial_state(init, basis, perturbation=1e-3)
    assert state.time == 0.0
    assert np.all(state.rho.values == 1.0)
    assert differentiate(reconstruct_velocity(state), "divergence").norm() < 1e-10
    assert state.coeffs[0] == pytest.approx(1e-3)


class TestLimits:
    @staticmethod
    def smooth_run(j, kappa=1.0, steps=10, dt=0.02):
        grid = Grid(2, 32)
        rho = DensityField(grid, 1.0 + 0.5 * np.cos(grid.coordinates[0]))
        state = taylor_green_state(grid, j=j, rho=rho)
        return advance(GalerkinSolver(state.basis, FluidParams(0.1, kappa)), state, dt, steps)

    def test_velocity_converges_in_j(self):
        finals = [self.smooth_run(j) for j in (8, 16, 32, 64)]
        velocities = [state.velocity for state in finals]
        weight = finals[0].basis.grid.cell_volume
        gaps = [math.sqrt(weight * np.sum((b - a) ** 2)) for a, b in zip(velocities, velocities[1:])]
        assert gaps[1] <= gaps[0] + 1e-10
        assert gaps[2] <= gaps[1] + 1e-10

    def test_small_relaxation_approaches_navier_stokes(self):
        relaxed = self.smooth_run(8, kappa=1e-6, steps=25)
        limit = self.smooth_run(8, kappa=0.0, steps=25)
        assert np.linalg.norm(relaxed.coeffs - limit.coeffs) < 1e-3

    def test_vacuum_disk_runs_to_half_a_time_unit(self):
        grid = Grid(2, 32)
        rho = make_vacuum_density(grid, VacuumSpec("disk"), 1.0)
        state = taylor_green_state(grid, j=8, rho=rho)
        final = advance(GalerkinSolver(state.basis, FluidParams(0.1, 1.0)), state, 0.05, 10)
        assert final.time == pytest.approx(0.5)
        assert np.all(np.isfinite(final.coeffs))
        assert final.rho.minimum >= 0.0 and final.rho.maximum <= 1.0
