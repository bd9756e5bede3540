import math
import os

import pytest

from lib.solutions.HRN.config import SimConfig, config_hash
from lib.solutions.HRN.experiments import export_plots, run_convergence, run_experiment, run_stability, run_sweep
from lib.solutions.HRN.output import read_snapshot, read_stream


def decay_config(**overrides):
    # 0.5 + 1/2 lifts to a unit density
    fields = dict(points=16, T=0.2, dt=0.01, j=4, mu=0.1, kappa=1.0, n=2, M=0.5, snapshot_stride=5)
    fields.update(overrides)
    return SimConfig(**fields)


def read_bytes(directory):
    contents = {}
    for name in sorted(os.listdir(directory)):
        with open(os.path.join(directory, name), "rb") as f:
            contents[name] = f.read()
    return contents


class TestRunExperiment:
    def test_single_step_run(self, tmp_path):
        config = decay_config(T=0.01)
        report = run_experiment(config, str(tmp_path))
        assert report.passed and report.exit_status == 0
        ledger = read_stream(str(tmp_path / "ledger.jsonl"))
        assert len(ledger.records) == 2
        assert ledger.header["config_hash"] == config_hash(config)

    def test_zero_horizon_records_the_initial_state(self, tmp_path):
        report = run_experiment(decay_config(T=0.0), str(tmp_path))
        assert report.passed
        assert report.summary["steps"] == 0
        assert report.summary["amplitude_ratio"] == 1.0
        assert report.k_report.horizon == 0.0
        assert len(read_stream(str(tmp_path / "ledger.jsonl")).records) == 1

    def test_summary_reports_lq_drift(self, tmp_path):
        config = decay_config(velocity="taylor_green", density="vacuum_disk", points=32, n=4, M=1.0, j=8)
        summary = run_experiment(config, str(tmp_path)).summary
        assert all(0.0 <= summary[f"lq_drift_{q}"] < 1e-2 for q in (1, 2, 4))
        assert read_stream(str(tmp_path / "summary.jsonl")).records[0]["lq_drift_2"] == summary["lq_drift_2"]

    def test_summary_reports_the_decay(self, tmp_path):
        report = run_experiment(decay_config(T=1.0, snapshot_stride=50), str(tmp_path))
        assert report.summary["amplitude_ratio"] == pytest.approx(math.exp(-0.05), rel=1e-6)
        assert report.summary["maximum_principle"]
        assert report.k_report.in_theory
        summary = read_stream(str(tmp_path / "summary.jsonl"))
        assert summary.records[0]["status"] == "ok"

    def test_snapshots_at_the_stride(self, tmp_path):
        run_experiment(decay_config(), str(tmp_path))
        times = [read_snapshot(str(tmp_path / f"snapshot_{i:06d}.bin")).time for i in range(5)]
        assert times == pytest.approx([0.0, 0.05, 0.1, 0.15, 0.2])

    def test_outputs_are_deterministic(self, tmp_path):
        config = decay_config(velocity="taylor_green", density="vacuum_disk", points=32, n=4, M=1.0, j=8)
        run_experiment(config, str(tmp_path / "first"))
        run_experiment(config, str(tmp_path / "second"))
        assert read_bytes(tmp_path / "first") == read_bytes(tmp_path / "second")

    def test_solver_failure_sets_the_exit_status(self, tmp_path):
        report = run_experiment(decay_config(velocity_amplitude=5.0, dt=0.05, cfl_limit=0.01), str(tmp_path))
        assert not report.passed and report.exit_status == 1
        assert report.failed_time == 0.0
        assert "CFL" in report.message

    def test_navier_stokes_control(self, tmp_path):
        report = run_experiment(decay_config(kappa=0.0, T=1.0), str(tmp_path))
        assert report.passed
        assert not report.k_report.in_theory
        assert report.summary["amplitude_ratio"] == pytest.approx(math.exp(-0.1), rel=1e-6)


class TestRunSweep:
    def test_single_cell_sweep_passes(self, tmp_path):
        report = run_sweep(decay_config(), [4], [2], str(tmp_path))
        assert report.passed and report.exit_status == 0
        assert os.path.isdir(tmp_path / "cell_j4_n2")

    def test_failing_cell_is_marked(self, tmp_path):
        report = run_sweep(decay_config(), [4, 100000], [2], str(tmp_path))
        assert report.exit_status == 1
        assert report.cells[4, 2].passed
        assert not report.cells[100000, 2].passed
        cells = read_stream(str(tmp_path / "sweep_cells.jsonl")).records
        assert [cell["status"] for cell in cells] == ["ok", "failed"]

    def test_parallel_cells_match_serial_ones(self, tmp_path):
        serial = run_sweep(decay_config(), [2, 4], [2], str(tmp_path / "serial"))
        parallel = run_sweep(decay_config(), [2, 4], [2], str(tmp_path / "parallel"), workers=2)
        assert serial.cells[2, 2].k_report == parallel.cells[2, 2].k_report
        assert read_bytes(tmp_path / "serial" / "cell_j4_n2") == read_bytes(tmp_path / "parallel" / "cell_j4_n2")

    def test_two_by_two_sweep_judges_boundedness(self, tmp_path):
        report = run_sweep(decay_config(points=32), [2, 4], [2, 4], str(tmp_path))
        assert set(report.verdicts) == {"K1", "K2", "K2p", "K3", "K4", "K4p", "K5", "K6"}
        assert report.failed_names == [name for name, verdict in report.verdicts.items() if not verdict.passed]
        assert len(read_stream(str(tmp_path / "sweep_matrix.jsonl")).records) == 8

    def test_needs_indices(self, tmp_path):
        with pytest.raises(ValueError):
            run_sweep(decay_config(), [], [2], str(tmp_path))


class TestRunStability:
    def test_perturbed_decay(self, tmp_path):
        report = run_stability(decay_config(), [1e-3, 1e-4], str(tmp_path))
        assert report.passed and report.scale_passed
        assert report.constant >= 0
        series = read_stream(str(tmp_path / "stability.jsonl")).records
        assert len(series) == 2 * 5

    def test_frozen_constant_from_config(self, tmp_path):
        report = run_stability(decay_config(gronwall_constant=0.5), [1e-3], str(tmp_path))
        assert report.constant == 0.5
        assert report.passed

    def test_calibration_run_is_kept_apart(self, tmp_path):
        report = run_stability(decay_config(calibration_epsilon=1e-2), [1e-3], str(tmp_path))
        assert list(report.pairs) == [1e-3]
        rows = read_stream(str(tmp_path / "stability_pairs.jsonl")).records
        assert [(row["epsilon"], row["role"]) for row in rows] == [(1e-2, "calibration"), (1e-3, "check")]
        assert rows[1]["constant"] == rows[0]["constant"] == report.constant

    def test_calibration_size_cannot_be_checked(self, tmp_path):
        with pytest.raises(ValueError, match="calibration_epsilon"):
            run_stability(decay_config(calibration_epsilon=1e-3), [1e-3], str(tmp_path))

    def test_epsilons_must_be_positive(self, tmp_path):
        with pytest.raises(ValueError):
            run_stability(decay_config(), [0.0], str(tmp_path))



class TestRunConvergence:
    def test_fourth_order_energy_residual(self, tmp_path):
        config = decay_config(velocity="taylor_green", mu=1.0, kappa=0.1, T=1.0, dt=0.1, j=8)
        report = run_convergence(config, 3, str(tmp_path))
        assert report.steps == [10, 20, 40, 80]
        assert report.passed and all(12 <= ratio <= 20 for ratio in report.ratios)
        rows = read_stream(str(tmp_path / "convergence.jsonl")).records
        assert [row["steps"] for row in rows] == [10, 20, 40, 80]
        assert rows[0]["ratio"] is None

    def test_needs_a_halving(self, tmp_path):
        with pytest.raises(ValueError):
            run_convergence(decay_config(), 0, str(tmp_path))

def test_export_plots(tmp_path):
    run_experiment(decay_config(), str(tmp_path))
    written = export_plots(str(tmp_path))
    assert sorted(os.path.basename(path) for path in written) == ["ledger.csv", "summary.csv"]
    with open(tmp_path / "ledger.csv") as f:
        assert f.readline().startswith("# config_hash=")
        assert f.readline().startswith("time,sqrt_rho_u_sq")
