"""Time loop driving the Galerkin solver, the pressure recovery and the estimates."""

from __future__ import annotations

import logging
from typing import Callable, NamedTuple, Optional, Protocol

from ..errors import SimulationError
from ..EST.estimates import EstimateLedger, EstimateRecord, record
from ..INI.initial_data import InitialData
from ..PRS.pressure import recover_pressure
from ..SPC.spectral_core import Grid, build_basis
from .galerkin_solver import FluidParams, GalerkinSolver, GalerkinState, initial_state

logger = logging.getLogger(__name__)


class RunSettings(Protocol):
    T: float
    dt: float
    j: int
    snapshot_stride: int
    cfl_limit: float

    @property
    def grid(self) -> Grid: ...


class SimulationResult(NamedTuple):
    trajectory: list[GalerkinState]  # snapshots, the final state included
    ledger: EstimateLedger


class GalerkinSimulation:
    """Runs one simulation to the horizon T with a fixed step dt.

    Every step is recorded in the ledger; every ``snapshot_stride``-th state
    and the final one are kept in the trajectory. T = 0 records and keeps the
    initial state only. The callbacks see each
    record and snapshot as soon as it exists.
    """

    def __init__(
        self,
        settings: RunSettings,
        params: FluidParams,
        on_record: Optional[Callable[[EstimateRecord], None]] = None,
        on_snapshot: Optional[Callable[[GalerkinState], None]] = None,
    ) -> None:
        self.settings = settings
        self.params = params
        self.on_record = on_record
        self.on_snapshot = on_snapshot
        self.steps = int(round(settings.T / settings.dt))
        if settings.T < 0:
            raise ValueError(f"horizon T = {settings.T} is negative")
        if settings.T > 0 and self.steps < 1:
            raise ValueError(f"horizon T = {settings.T} holds no step of dt = {settings.dt}")

    def _observe(self, solver: GalerkinSolver, state: GalerkinState, ledger: EstimateLedger) -> None:
        state_dot = solver.time_derivative(state)
        entry = record(state, state_dot, recover_pressure(state, state_dot, self.params), self.params)
        ledger.append(entry)
        if self.on_record is not None:
            self.on_record(entry)
        logger.debug(
            "t = %.6g kinetic = %.6e rho in [%.4g, %.4g]",
            entry.time,
            entry.sqrt_rho_u_sq,
            entry.rho_min,
            entry.rho_max,
        )

    def _keep(self, state: GalerkinState, trajectory: list[GalerkinState]) -> None:
        trajectory.append(state)
        if self.on_snapshot is not None:
            self.on_snapshot(state)

    def run(self, init: InitialData, perturbation: float = 0.0) -> SimulationResult:
        settings = self.settings
        basis = build_basis(init.grid, settings.j, self.params.mu)
        solver = GalerkinSolver(basis, self.params, settings.cfl_limit)
        ledger = EstimateLedger(self.params)
        state = initial_state(init, basis, perturbation)
        trajectory: list[GalerkinState] = []
        logger.info(
            "running j = %d, n = %d, dt = %g to T = %g (%d steps)",
            basis.size,
            init.n,
            settings.dt,
            settings.T,
            self.steps,
        )
        try:
            self._observe(solver, state, ledger)
            self._keep(state, trajectory)
            for k in range(1, self.steps + 1):
                state = solver.step(state, settings.dt, new_time=k * settings.dt)
                self._observe(solver, state, ledger)
                if k % settings.snapshot_stride == 0 or k == self.steps:
                    self._keep(state, trajectory)
        except SimulationError as error:
            # Failures carry the time of the last state that was reached.
            if getattr(error, "time", None) is None:
                error.time = state.time
            logger.error("simulation failed at t = %.6g: %s", error.time, error)
            raise
        logger.info("finished at t = %.6g", state.time)
        return SimulationResult(trajectory, ledger)


def run(settings: RunSettings, params: FluidParams, init: InitialData, perturbation: float = 0.0) -> SimulationResult:
    return GalerkinSimulation(settings, params).run(init, perturbation)
