import logging
import sys

from entry_point_mapping import EntryPointMapping
from runner.utils import Utils
from runner.user_input_action import get_user_input
from solutions.errors import SimulationError


"""
  ~~~~~~~~~~ Running the simulator: ~~~~~~~~~~~~~

    From command line:
       PYTHONPATH=lib python lib/run_simulation.py run --config config/single_mode.cfg --out out/single_mode

    To run the unit tests locally:
       python -m pytest -q test/solution_tests/

  ~~~~~~~~~~ The actions ~~~~~~~~~~~~~

    +--------------+----------------------------------------------------------------+
    | Action       | What it does                                                   |
    +--------------+----------------------------------------------------------------+
    | run          | One simulation: ledger.jsonl, snapshots, summary.jsonl.        |
    | sweep        | Every (j, n) of --j/--n, one cell_j{j}_n{n} directory each,    |
    |              | plus sweep_cells.jsonl and the sweep_matrix.jsonl verdicts.    |
    | stability    | Base run and one perturbed run per --epsilon, monitored by     |
    |              | the Gronwall majorant: stability.jsonl, stability_pairs.jsonl. |
    | convergence  | The run repeated with dt halved --halvings times, one dt_{k}   |
    |              | directory each, and the residual ratios in convergence.jsonl.  |
    | export-plots | A CSV next to every .jsonl stream under --out.                 |
    +--------------+----------------------------------------------------------------+

    The exit status is 0 only when every requested check passed.

"""

logger = logging.getLogger("run_simulation")

ACTIONS = {
    "run": "run",
    "sweep": "sweep",
    "stability": "stability",
    "convergence": "convergence",
    "export-plots": "export_plots",
}


def main(argv):
    user_input = get_user_input(argv)
    Utils.configure_logging(user_input.log_level)
    entry_point_mapping = EntryPointMapping()
    try:
        return getattr(entry_point_mapping, ACTIONS[user_input.action])(user_input)
    except SimulationError as error:
        logger.error("%s", error)
        return 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
