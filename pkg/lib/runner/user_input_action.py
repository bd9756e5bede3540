import argparse

ACTIONS = ("run", "sweep", "stability", "convergence", "export-plots")


def _integers(text):
    return [int(part) for part in text.split(",") if part.strip()]


def _floats(text):
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="run_simulation",
        description="Galerkin simulations of the Navier-Stokes-Voigt equations with variable density.",
    )
    parser.add_argument("action", choices=ACTIONS, help="what to run")
    parser.add_argument("--config", help="configuration file (required except for export-plots)")
    parser.add_argument("--out", help="output directory, overrides [output] directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel sweep cells or stability runs")
    parser.add_argument("--seed", type=int, help="overrides [initial] seed")
    parser.add_argument("--j", type=_integers, help="comma separated basis sizes for a sweep")
    parser.add_argument("--n", type=_integers, help="comma separated mollification indices for a sweep")
    parser.add_argument(
        "--epsilon", type=_floats, default=[1e-3, 1e-4], help="comma separated perturbation sizes"
    )
    parser.add_argument("--halvings", type=int, default=3, help="dt halvings of a convergence study")
    parser.add_argument("--log-level", default="INFO", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return parser


def get_user_input(args):
    """Parsed command line; the action is prompted for when none is given."""
    args = list(args)
    if not args:
        args = str(input("> ")).split()
    return build_parser().parse_args(args)
