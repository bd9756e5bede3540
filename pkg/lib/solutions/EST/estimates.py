"""Monitored norms and the K-functionals built from them.

K1 = sup(|sqrt(rho) u|^2 + kappa |grad u|^2) + mu int |grad u|^2
K2 = int(|sqrt(rho) u_t|^2 + kappa |grad u_t|^2),  K2p = sup of the same
K3 = kappa sup |D2 u|^2 + mu int |D2 u|^2
K4 = kappa^2 int |D2 u_t|^2,  K4p = kappa^2 sup |D2 u_t|^2
K5 = int |grad p|^2,  K6 = sup |grad p|^2

Time integrals use the trapezoid rule over the recorded steps.
"""

from __future__ import annotations

import logging
from typing import Mapping, NamedTuple, Sequence

import numpy as np
from scipy.integrate import trapezoid

from ..errors import ContractViolation, EstimateError
from ..GAL.galerkin_solver import FluidParams, GalerkinState
from ..PRS.pressure import pressure_gradient_norm
from ..SPC.spectral_core import SpectralField

logger = logging.getLogger(__name__)

K_NAMES = ("K1", "K2", "K2p", "K3", "K4", "K4p", "K5", "K6")


class EstimateRecord(NamedTuple):
    """Norms of one time step; the field order is the serialized column order."""

    time: float
    sqrt_rho_u_sq: float
    grad_u_sq: float
    sqrt_rho_ut_sq: float
    grad_ut_sq: float
    d2u_sq: float
    d2ut_sq: float
    grad_p_sq: float
    rho_min: float
    rho_max: float
    energy_functional: float
    forcing_sq: float
    forcing_dt_sq: float


class KReport(NamedTuple):
    mu: float
    kappa: float
    horizon: float
    K1: float
    K2: float
    K2p: float
    K3: float
    K4: float
    K4p: float
    K5: float
    K6: float
    forcing_l2_sq: float  # int |f|^2
    forcing_linf_sq: float  # sup |f|^2
    forcing_dt_l2_sq: float  # int |f_t|^2
    energy_residual: float
    rho_min: float
    rho_max: float
    in_theory: bool
    forcing_hypothesis: str


class KVerdict(NamedTuple):
    name: str
    maximum: float
    j_spread: float
    n_spread: float
    growth: bool
    passed: bool


def record(state: GalerkinState, state_dot: np.ndarray, p: SpectralField, params: FluidParams) -> EstimateRecord:
    basis = state.basis
    grid = basis.grid
    weight = grid.cell_volume
    rho = state.rho.values
    state_dot = np.asarray(state_dot, dtype=float)
    k_sq = basis.wavenumber_sq
    u = basis.synthesize(state.coeffs)
    u_t = basis.synthesize(state_dot)
    sqrt_rho_u_sq = float(weight * np.sum(rho * u * u))
    grad_u_sq = float(np.dot(k_sq, state.coeffs**2))
    forcing = params.forcing
    forcing_sq = 0.0 if forcing.is_zero else float(weight * np.sum(forcing.evaluate(grid, state.time) ** 2))
    forcing_dt_sq = 0.0 if forcing.is_zero else float(weight * np.sum(forcing.time_derivative(grid, state.time) ** 2))
    return EstimateRecord(
        time=float(state.time),
        sqrt_rho_u_sq=sqrt_rho_u_sq,
        grad_u_sq=grad_u_sq,
        sqrt_rho_ut_sq=float(weight * np.sum(rho * u_t * u_t)),
        grad_ut_sq=float(np.dot(k_sq, state_dot**2)),
        d2u_sq=float(np.dot(k_sq**2, state.coeffs**2)),
        d2ut_sq=float(np.dot(k_sq**2, state_dot**2)),
        grad_p_sq=pressure_gradient_norm(p) ** 2,
        rho_min=state.rho.minimum,
        rho_max=state.rho.maximum,
        energy_functional=0.5 * sqrt_rho_u_sq + 0.5 * params.kappa * grad_u_sq + state.dissipation,
        forcing_sq=forcing_sq,
        forcing_dt_sq=forcing_dt_sq,
    )


class EstimateLedger:
    """Time-ordered estimate records of one run."""

    def __init__(self, params: FluidParams) -> None:
        self.params = params
        self.records: list[EstimateRecord] = []

    def append(self, entry: EstimateRecord) -> None:
        if self.records and not entry.time > self.records[-1].time:
            raise EstimateError(
                f"record at t = {entry.time} does not follow t = {self.records[-1].time}"
            )
        self.records.append(entry)

    def __len__(self) -> int:
        return len(self.records)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(entry, name) for entry in self.records])


def finalize(ledger: EstimateLedger) -> KReport:
    """Sup and trapezoid aggregates of a ledger.

    A single record (T = 0) gives zero time integrals and a zero horizon.
    """
    if not ledger.records:
        raise EstimateError("a K report needs at least one record")
    mu, kappa = ledger.params.mu, ledger.params.kappa
    t = ledger.series("time")
    s = ledger.series

    def integral(values: np.ndarray) -> float:
        return float(trapezoid(values, t))

    velocity_rate = s("sqrt_rho_ut_sq") + kappa * s("grad_ut_sq")
    energy = s("energy_functional")
    return KReport(
        mu=mu,
        kappa=kappa,
        horizon=float(t[-1] - t[0]),
        K1=float(np.max(s("sqrt_rho_u_sq") + kappa * s("grad_u_sq"))) + mu * integral(s("grad_u_sq")),
        K2=integral(velocity_rate),
        K2p=float(np.max(velocity_rate)),
        K3=kappa * float(np.max(s("d2u_sq"))) + mu * integral(s("d2u_sq")),
        K4=kappa**2 * integral(s("d2ut_sq")),
        K4p=kappa**2 * float(np.max(s("d2ut_sq"))),
        K5=integral(s("grad_p_sq")),
        K6=float(np.max(s("grad_p_sq"))),
        forcing_l2_sq=integral(s("forcing_sq")),
        forcing_linf_sq=float(np.max(s("forcing_sq"))),
        forcing_dt_l2_sq=integral(s("forcing_dt_sq")),
        energy_residual=float(abs(energy[-1] - energy[0])),
        rho_min=float(np.min(s("rho_min"))),
        rho_max=float(np.max(s("rho_max"))),
        in_theory=ledger.params.in_theory,
        forcing_hypothesis=ledger.params.forcing.hypothesis,
    )


def _relative_spread(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _pairs_along(values: Mapping[tuple[int, int], float], axis: int, tolerance: float) -> tuple[float, bool]:
    """Spread between the two largest indices along one axis, and growth at the top."""
    others = sorted({key[1 - axis] for key in values})
    spread, growth = 0.0, False
    for fixed in others:
        line = {key[axis]: value for key, value in values.items() if key[1 - axis] == fixed}
        indices = sorted(line)
        if len(indices) < 2:
            continue
        top, second = indices[-1], indices[-2]
        spread = max(spread, _relative_spread(line[top], line[second]))
        lower_max = max(line[index] for index in indices[:-1])
        if line[top] > (1.0 + tolerance) * lower_max:
            growth = True
    return spread, growth


def sweep_boundedness(
    reports: Mapping[tuple[int, int], KReport],
    tolerance: float = 0.1,
    names: Sequence[str] = K_NAMES,
) -> dict[str, KVerdict]:
    """Check that every K-functional stays bounded across a (j, n) sweep of at
    least two j and two n.

    A K passes when its relative spread between the two largest j (and the
    two largest n) stays below ``tolerance`` and its value at the largest
    index does not exceed the others by more than ``tolerance``.
    """
    if not reports:
        raise EstimateError("a sweep needs at least one completed cell")
    reference = next(iter(reports.values()))
    for key, report in reports.items():
        if (report.mu, report.kappa) != (reference.mu, reference.kappa) or not np.isclose(
            report.horizon, reference.horizon
        ):
            raise EstimateError(f"cell {key} was run with different physical parameters")
    js, ns = {key[0] for key in reports}, {key[1] for key in reports}
    if len(js) < 2 or len(ns) < 2:
        raise ContractViolation(
            f"boundedness needs at least two j and two n, the sweep holds {sorted(js)} x {sorted(ns)}"
        )
    verdicts = {}
    for name in names:
        values = {key: getattr(report, name) for key, report in reports.items()}
        j_spread, j_growth = _pairs_along(values, 0, tolerance)
        n_spread, n_growth = _pairs_along(values, 1, tolerance)
        growth = j_growth or n_growth
        verdicts[name] = KVerdict(
            name=name,
            maximum=max(values.values()),
            j_spread=j_spread,
            n_spread=n_spread,
            growth=growth,
            passed=j_spread <= tolerance and n_spread <= tolerance and not growth,
        )
        if not verdicts[name].passed:
            logger.warning("%s is not uniformly bounded: j spread %.3g, n spread %.3g", name, j_spread, n_spread)
    return verdicts


def failed_names(verdicts: Mapping[str, KVerdict]) -> list[str]:
    return [name for name, verdict in verdicts.items() if not verdict.passed]


def energy_convergence_ratios(residuals: Sequence[float]) -> list[float]:
    """Ratios of successive energy residuals under dt halving (16 for fourth order)."""
    if any(not residual > 0 for residual in residuals[1:]):
        raise EstimateError("an energy residual vanished; the study has reached roundoff")
    return [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
