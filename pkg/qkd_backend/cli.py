"""
Command-line front end.

    qkd simulate --pairs 100000 --strategy random-xz --passes both --seed 7
    qkd exact --strategy fixed-y --passes both
    qkd table
    qkd deferred
    qkd circuit circuits/r_measurement.circ
    qkd survey

Reports go to stdout; logs and diagnostics go to stderr.
Exit status: 0 success, 1 usage error, 2 internal invariant violation.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from qkd_backend import __version__
from qkd_backend.config import get_settings, setup_logging
from qkd_backend.core.protocol import PassModel, STRATEGY_NAMES
from qkd_backend.errors import InvariantViolation, UsageError
from qkd_backend.models.schemas import RunConfig
from qkd_backend.services.analysis import AnalysisService
from qkd_backend.services.circuit_check import CircuitService
from qkd_backend.services.rendering import FORMATS, render
from qkd_backend.services.simulation import SimulationService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVARIANT = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_format(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=FORMATS, default="json", help="report format (default: json)")


def _add_strategy(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--strategy", choices=STRATEGY_NAMES, default="none")
    parser.add_argument("--passes", choices=[p.value for p in PassModel], default="both",
                        help="which legs of the round trip Eve measures")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="qkd", description="Pre/post-selection QKD simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="overrides QKD_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    simulate = sub.add_parser("simulate", help="Monte Carlo run of the protocol")
    simulate.add_argument("--pairs", type=int, required=True)
    _add_strategy(simulate)
    simulate.add_argument("--mode", choices=("immediate", "deferred"), default="immediate")
    simulate.add_argument("--seed", type=int, required=True)
    _add_format(simulate)

    exact = sub.add_parser("exact", help="exact figures by branch enumeration")
    _add_strategy(exact)
    _add_format(exact)

    table = sub.add_parser("table", help="regenerate the retrodiction table")
    _add_format(table)

    deferred = sub.add_parser("deferred", help="deferred-measurement equivalence check")
    _add_format(deferred)

    circuit = sub.add_parser("circuit", help="check a circuit file against the R measurement")
    circuit.add_argument("path")
    _add_format(circuit)

    survey = sub.add_parser("survey", help="detection probability for every strategy and pass model")
    _add_format(survey)
    return parser


def cmd_simulate(args) -> str:
    try:
        config = RunConfig(pairs=args.pairs, strategy=args.strategy, passes=args.passes,
                           mode=args.mode, seed=args.seed, format=args.format)
    except ValidationError as e:
        raise UsageError(f"Invalid run configuration: {e.errors()[0]['loc'][0]}: {e.errors()[0]['msg']}") from e
    return render(SimulationService().simulate(config), config.format)


def cmd_exact(args) -> str:
    return render(AnalysisService().exact(args.strategy, args.passes), args.format)


def cmd_table(args) -> str:
    return render(AnalysisService().table(), args.format)


def cmd_deferred(args) -> str:
    return render(AnalysisService().deferred(), args.format)


def cmd_circuit(args) -> str:
    try:
        return render(CircuitService().check_file(args.path), args.format)
    except OSError as e:
        raise UsageError(f"Cannot read circuit file {args.path}: {e.strerror}") from e


def cmd_survey(args) -> str:
    return render(AnalysisService().survey(), args.format)


COMMANDS = {
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "table": cmd_table,
    "deferred": cmd_deferred,
    "circuit": cmd_circuit,
    "survey": cmd_survey,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
        setup_logging(args.log_level or settings.log_level)
        output = COMMANDS[args.command](args)
    except UsageError as e:
        print(f"qkd: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as e:
        logger.error(f"Invariant violation in {args.command}: {e}")
        print(f"qkd: internal error: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    sys.stdout.write(output)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
