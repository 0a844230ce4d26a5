"""App main module."""

import argparse
import logging
import sys

from ocpecx import __version__
from ocpecx.controllers.config import COMMANDS, RunConfig
from ocpecx.controllers.pipeline_controller import EXIT_FAILED, PipelineController
from ocpecx.models.errors import ConfigError

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

log = logging.getLogger(__name__)


def parser() -> argparse.ArgumentParser:
    """Build the command-line parser.

    Example:
        >>> args = parser().parse_args(["simulate", "--problem", "p.json", "--nodes", "11"])
        >>> args.command, args.problem, args.nodes, args.seed
        ('simulate', 'p.json', 11, None)
    """
    main_parser = argparse.ArgumentParser(prog="ocpecx", description="OCPEC solver and stationarity checker.")
    main_parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = main_parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = commands.add_parser(command)
        sub.add_argument("--problem", required=True, help="problem file or builtin:<name>")
        sub.add_argument("--nodes", type=int, help="number of grid intervals N")
        sub.add_argument("--tau0", type=float, help="first relaxation parameter")
        sub.add_argument("--tau-min", dest="tau_min", type=float, help="last relaxation parameter")
        sub.add_argument("--tol-act", dest="tol_act", type=float, help="activity tolerance")
        sub.add_argument("--tol-div", dest="tol_div", type=float, help="divergence tolerance between λ and η")
        sub.add_argument("--radius", type=float, help="Weierstrass radius override")
        sub.add_argument("--samples", type=int, help="Weierstrass samples per node")
        sub.add_argument("--seed", type=int, help="sampling seed")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--traj", help="trajectory CSV for check and cq")
        sub.add_argument("--lambda0", type=int, choices=(0, 1), help="cost multiplier")
        sub.add_argument("-v", "--verbose", action="store_true", default=None, help="debug logging")
    return main_parser


def main(argv=None) -> int:
    """Run the command line and return the exit status."""
    args = parser().parse_args(argv)
    logging.basicConfig(format=LOG_FORMAT, level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        config = RunConfig.from_args(args)
    except ConfigError as error:
        log.error("invalid configuration: %s", error)
        return EXIT_FAILED
    return PipelineController(config).run()


if __name__ == "__main__":
    sys.exit(main())
