"""Experiments driven from a configuration: single runs, (j, n) sweeps and stability pairs."""

from __future__ import annotations

import glob
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any, Iterable, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import SimulationError
from ..EST.estimates import (
    K_NAMES,
    EstimateRecord,
    KReport,
    KVerdict,
    energy_convergence_ratios,
    failed_names,
    finalize,
    sweep_boundedness,
)
from ..GAL.galerkin_solver import GalerkinSolver, GalerkinState
from ..GAL.simulation import GalerkinSimulation
from ..STB.stability import GronwallMonitor, GronwallReport, scale_invariance
from ..TRN.transport import lq_drift
from .config import SimConfig, config_hash, serialize_config
from .output import RecordStream, read_stream, snapshot_path, write_csv, write_snapshot

logger = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    "status",
    "failed_time",
    "message",
    "steps",
    "amplitude_ratio",
    "maximum_principle",
    "lq_drift_1",
    "lq_drift_2",
    "lq_drift_4",
) + KReport._fields
CELL_FIELDS = ("j", "n", "status", "failed_time", "message") + K_NAMES
STABILITY_FIELDS = ("epsilon", "time", "energy", "bound", "rate", "production")
PAIR_FIELDS = ("epsilon", "role", "constant", "passed", "production_bounded", "max_ratio")
CONVERGENCE_FIELDS = ("dt", "steps", "energy_residual", "ratio")
LQ_EXPONENTS = (1, 2, 4)


class ExperimentReport(NamedTuple):
    passed: bool
    exit_status: int
    failed_time: Optional[float]
    message: str
    summary: dict[str, Any]
    k_report: Optional[KReport]


class SweepReport(NamedTuple):
    passed: bool
    exit_status: int
    cells: dict[tuple[int, int], ExperimentReport]
    verdicts: dict[str, KVerdict]
    failed_names: list[str]


class StabilityReport(NamedTuple):
    passed: bool
    exit_status: int
    constant: float
    pairs: dict[float, GronwallReport]
    scale_passed: bool
    scale_deviation: float


class ConvergenceReport(NamedTuple):
    passed: bool
    exit_status: int
    steps: list[int]
    residuals: list[float]
    ratios: list[float]


def _write_config(directory: str, config: SimConfig, digest: str) -> None:
    with open(os.path.join(directory, "config.txt"), "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# config_hash={digest}\n")
        f.write(serialize_config(config))


def _maximum_principle(records: Sequence[EstimateRecord], config: SimConfig) -> bool:
    """Every recorded density stays in [1/n, M + 1/n]."""
    low, high = 1.0 / config.n, config.M + 1.0 / config.n
    return all(low <= entry.rho_min and entry.rho_max <= high for entry in records)


def run_experiment(config: SimConfig, out_dir: Optional[str] = None) -> ExperimentReport:
    """Run one simulation, writing its ledger, snapshots and summary to ``out_dir``."""
    directory = out_dir or config.output_directory
    os.makedirs(directory, exist_ok=True)
    digest = config_hash(config)
    _write_config(directory, config, digest)
    if config.kappa == 0:
        logger.warning("kappa = 0 runs the Navier-Stokes limit, outside the existence theory")

    snapshots = []

    def keep(state: GalerkinState) -> None:
        write_snapshot(
            snapshot_path(directory, len(snapshots)), digest, state.time, state.rho.values, state.velocity
        )
        snapshots.append(state)

    summary: dict[str, Any] = {name: None for name in SUMMARY_FIELDS}
    k_report = None
    with RecordStream(os.path.join(directory, "ledger.jsonl"), "ledger", EstimateRecord._fields, digest) as ledger_file:
        try:
            params = config.fluid_params()
            simulation = GalerkinSimulation(config, params, on_record=ledger_file.append_tuple, on_snapshot=keep)
            result = simulation.run(config.initial_data())
            k_report = finalize(result.ledger)
        except SimulationError as error:
            summary.update(status="failed", failed_time=getattr(error, "time", None), message=str(error))
        else:
            first, last = result.trajectory[0].coeffs, result.trajectory[-1].coeffs
            initial_norm = float(np.linalg.norm(first))
            principle = _maximum_principle(result.ledger.records, config)
            drift = lq_drift(result.trajectory[0].rho, result.trajectory[-1].rho, LQ_EXPONENTS)
            summary.update({f"lq_drift_{q}": drift[q] for q in LQ_EXPONENTS})
            summary.update(k_report._asdict())
            summary.update(
                status="ok" if principle else "failed",
                message="" if principle else "density left [1/n, M + 1/n]",
                steps=len(result.ledger) - 1,
                amplitude_ratio=float(np.linalg.norm(last)) / initial_norm if initial_norm > 0 else 0.0,
                maximum_principle=principle,
            )
    with RecordStream(os.path.join(directory, "summary.jsonl"), "summary", SUMMARY_FIELDS, digest) as summary_file:
        summary_file.append(summary)
    passed = summary["status"] == "ok"
    if not passed:
        logger.error("run in %s failed: %s", directory, summary["message"])
    return ExperimentReport(passed, 0 if passed else 1, summary["failed_time"], summary["message"], summary, k_report)


def _run_cell(task: tuple[SimConfig, int, int, str]) -> tuple[int, int, ExperimentReport]:
    config, j, n, directory = task
    cell = replace(config, j=j, n=n)
    report = run_experiment(cell, os.path.join(directory, f"cell_j{j}_n{n}"))
    logger.info("sweep cell j = %d, n = %d: %s", j, n, "ok" if report.passed else "failed")
    return j, n, report


def _map(function, tasks: list, workers: int) -> list:
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(function, tasks))
    return [function(task) for task in tasks]


def run_sweep(
    base: SimConfig,
    js: Sequence[int],
    ns: Sequence[int],
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> SweepReport:
    """Run every (j, n) cell and check that the K-functionals stay bounded.

    Boundedness is judged once the completed cells span two j and two n; a
    smaller sweep passes when every cell completes.
    """
    if not js or not ns:
        raise ValueError("a sweep needs at least one j and one n")
    directory = out_dir or base.output_directory
    os.makedirs(directory, exist_ok=True)
    digest = config_hash(base)
    _write_config(directory, base, digest)
    tasks = [(base, j, n, directory) for j in js for n in ns]
    cells = {(j, n): report for j, n, report in _map(_run_cell, tasks, workers)}

    with RecordStream(os.path.join(directory, "sweep_cells.jsonl"), "sweep_cells", CELL_FIELDS, digest) as stream:
        for (j, n), report in cells.items():
            row = {name: report.summary.get(name) for name in K_NAMES}
            row.update(j=j, n=n, status=report.summary["status"], failed_time=report.failed_time, message=report.message)
            stream.append(row)

    completed = {key: report.k_report for key, report in cells.items() if report.passed}
    spans_both = len({j for j, _ in completed}) >= 2 and len({n for _, n in completed}) >= 2
    verdicts = sweep_boundedness(completed, base.sweep_spread) if spans_both else {}
    with RecordStream(os.path.join(directory, "sweep_matrix.jsonl"), "sweep_matrix", KVerdict._fields, digest) as stream:
        for verdict in verdicts.values():
            stream.append_tuple(verdict)

    unbounded = failed_names(verdicts)
    if unbounded:
        logger.error("K-functionals not uniformly bounded: %s", ", ".join(unbounded))
    failed = [key for key, report in cells.items() if not report.passed]
    if failed:
        logger.error("sweep cells failed: %s", ", ".join(f"j={j} n={n}" for j, n in failed))
    passed = not failed and not unbounded
    return SweepReport(passed, 0 if passed else 1, cells, verdicts, unbounded)


def _trajectory(task: tuple[SimConfig, float]) -> list[GalerkinState]:
    config, epsilon = task
    return GalerkinSimulation(config, config.fluid_params()).run(config.initial_data(), perturbation=epsilon).trajectory


def _pair_row(epsilon: float, role: str, report: GronwallReport) -> dict[str, Any]:
    return {
        "epsilon": epsilon,
        "role": role,
        "constant": report.constant,
        "passed": report.passed,
        "production_bounded": report.production_bounded,
        "max_ratio": float(np.max(report.relative_energies())),
    }


def run_stability(
    base: SimConfig,
    epsilons: Sequence[float],
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> StabilityReport:
    """Compare perturbed runs with the base run under the Gronwall majorant.

    The constant is taken from the config, or calibrated on a separate run
    perturbed by ``calibration_epsilon`` and then frozen; the runs for
    ``epsilons`` are only checked. The first two epsilons are also compared
    for scale invariance of E(t)/E(0).
    """
    if not epsilons or any(not epsilon > 0 for epsilon in epsilons):
        raise ValueError(f"perturbation sizes must be positive, got {list(epsilons)}")
    calibrating = base.gronwall_constant is None
    if calibrating and base.calibration_epsilon in epsilons:
        raise ValueError(
            f"calibration_epsilon = {base.calibration_epsilon} is also checked; pick a separate perturbation size"
        )
    directory = out_dir or base.output_directory
    os.makedirs(directory, exist_ok=True)
    digest = config_hash(base)
    _write_config(directory, base, digest)
    params = base.fluid_params()

    sizes = [0.0] + list(epsilons) + ([base.calibration_epsilon] if calibrating else [])
    runs = _map(_trajectory, [(base, epsilon) for epsilon in sizes], workers)
    reference, perturbed = runs[0], dict(zip(sizes[1:], runs[1:]))
    monitor = GronwallMonitor(
        params,
        GalerkinSolver(reference[0].basis, params, base.cfl_limit),
        constant=base.gronwall_constant,
        margin=base.margin,
    )
    calibration = None
    if calibrating:
        monitor.calibrate(perturbed[base.calibration_epsilon], reference)
        calibration = monitor.monitor(perturbed[base.calibration_epsilon], reference)

    pairs = {epsilon: monitor.monitor(perturbed[epsilon], reference) for epsilon in epsilons}
    scale_passed, deviation = True, 0.0
    if len(epsilons) > 1:
        scale_passed, deviation = scale_invariance(pairs[epsilons[0]], pairs[epsilons[1]], base.scale_tolerance)
        if not scale_passed:
            logger.warning("E(t)/E(0) differs by %.3g between epsilon = %g and %g", deviation, epsilons[0], epsilons[1])

    with RecordStream(os.path.join(directory, "stability.jsonl"), "stability", STABILITY_FIELDS, digest) as stream:
        for epsilon, report in pairs.items():
            for row in zip(report.times, report.energies, report.bounds, report.rates, report.productions):
                stream.append({"epsilon": epsilon, **dict(zip(STABILITY_FIELDS[1:], row))})
    with RecordStream(os.path.join(directory, "stability_pairs.jsonl"), "stability_pairs", PAIR_FIELDS, digest) as stream:
        if calibration is not None:
            stream.append(_pair_row(base.calibration_epsilon, "calibration", calibration))
        for epsilon, report in pairs.items():
            stream.append(_pair_row(epsilon, "check", report))

    passed = scale_passed and all(report.passed for report in pairs.values())
    return StabilityReport(passed, 0 if passed else 1, monitor.constant, pairs, scale_passed, deviation)


def _run_level(task: tuple[SimConfig, str]) -> ExperimentReport:
    config, directory = task
    return run_experiment(config, directory)


def run_convergence(
    base: SimConfig,
    halvings: int = 3,
    out_dir: Optional[str] = None,
    workers: int = 1,
    band: tuple[float, float] = (12.0, 20.0),
) -> ConvergenceReport:
    """Energy residual |E(T) - E(0)| under repeated halving of dt.

    RK4 gives ratios near 16 between successive residuals; the check passes
    when every ratio lies in ``band``.
    """
    if halvings < 1:
        raise ValueError(f"a convergence study needs at least one halving, got {halvings}")
    if not base.T > 0:
        raise ValueError("a convergence study needs a positive horizon")
    directory = out_dir or base.output_directory
    os.makedirs(directory, exist_ok=True)
    digest = config_hash(base)
    _write_config(directory, base, digest)
    configs = [
        replace(base, dt=base.dt / 2**level, snapshot_stride=base.steps * 2**level) for level in range(halvings + 1)
    ]
    tasks = [(config, os.path.join(directory, f"dt_{level}")) for level, config in enumerate(configs)]
    reports = _map(_run_level, tasks, workers)
    if not all(report.passed for report in reports):
        failed = [config.dt for config, report in zip(configs, reports) if not report.passed]
        raise SimulationError(f"convergence runs failed for dt = {failed}")
    residuals = [report.k_report.energy_residual for report in reports]
    ratios = energy_convergence_ratios(residuals)

    with RecordStream(os.path.join(directory, "convergence.jsonl"), "convergence", CONVERGENCE_FIELDS, digest) as stream:
        for level, (config, residual) in enumerate(zip(configs, residuals)):
            ratio = ratios[level - 1] if level else None
            stream.append({"dt": config.dt, "steps": config.steps, "energy_residual": residual, "ratio": ratio})

    low, high = band
    passed = all(low <= ratio <= high for ratio in ratios)
    if not passed:
        logger.error("energy residual ratios %s leave [%g, %g]", ", ".join(f"{r:.3g}" for r in ratios), low, high)
    return ConvergenceReport(passed, 0 if passed else 1, [config.steps for config in configs], residuals, ratios)


def _streams(directory: str) -> Iterable[str]:
    return sorted(glob.glob(os.path.join(directory, "**", "*.jsonl"), recursive=True))


def export_plots(directory: str) -> list[str]:
    """Write a CSV next to every record stream under ``directory``."""
    written = []
    for path in _streams(directory):
        contents = read_stream(path)
        target = os.path.splitext(path)[0] + ".csv"
        write_csv(target, contents.header["fields"], contents.records, contents.header.get("config_hash"))
        written.append(target)
    logger.info("exported %d CSV series from %s", len(written), directory)
    return written
