import logging

from solutions.HRN.experiments import export_plots, run_convergence, run_experiment, run_stability, run_sweep
from runner.utils import Utils

logger = logging.getLogger(__name__)


class EntryPointMapping:
    """One method per command line action, each returning the exit status."""

    # ~~~~~~~~ Single runs ~~~~~~

    def run(self, user_input):
        config = Utils.get_config(user_input)
        report = run_experiment(config, Utils.get_output_directory(user_input, config))
        if report.passed:
            logger.info("run passed: K1 = %.6g, energy residual = %.3e", report.k_report.K1, report.k_report.energy_residual)
        return report.exit_status

    # ~~~~~~~~ Experiments over several runs ~~~~~~

    def sweep(self, user_input):
        config = Utils.get_config(user_input)
        report = run_sweep(
            config,
            user_input.j or [config.j],
            user_input.n or [config.n],
            Utils.get_output_directory(user_input, config),
            user_input.workers,
        )
        if report.failed_names:
            logger.warning("not uniformly bounded: %s", ", ".join(report.failed_names))
        for verdict in report.verdicts.values():
            logger.info(
                "%s: max %.6g, j spread %.3g, n spread %.3g, %s",
                verdict.name,
                verdict.maximum,
                verdict.j_spread,
                verdict.n_spread,
                "bounded" if verdict.passed else "NOT bounded",
            )
        return report.exit_status

    def stability(self, user_input):
        config = Utils.get_config(user_input)
        report = run_stability(
            config,
            user_input.epsilon,
            Utils.get_output_directory(user_input, config),
            user_input.workers,
        )
        logger.info(
            "Gronwall constant %.6g, scale deviation %.3g, %s",
            report.constant,
            report.scale_deviation,
            "passed" if report.passed else "failed",
        )
        return report.exit_status

    def convergence(self, user_input):
        config = Utils.get_config(user_input)
        report = run_convergence(
            config,
            user_input.halvings,
            Utils.get_output_directory(user_input, config),
            user_input.workers,
        )
        logger.info(
            "energy residual ratios under dt halving: %s",
            ", ".join(f"{ratio:.3g}" for ratio in report.ratios),
        )
        return report.exit_status

    # ~~~~~~~~ Post-processing ~~~~~~

    def export_plots(self, user_input):
        written = export_plots(Utils.get_output_directory(user_input))
        return 0 if written else 1
