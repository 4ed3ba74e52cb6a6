#!/usr/bin/env python3

"""
Main entry point for peerfx
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

from . import __version__
from .app_context import AnalysisContext
from .core.spaces import cached_space
from .models.population import Population
from .reporting.report_writer import dumps_json, write_assignment_csv
from .rtest.statistics import NullHypothesis, Statistic
from .utils.config import ConfigManager
from .utils.error_handling import ConfigurationError, OracleCheckFailure, PeerfxError, ValidationError
from .utils.helpers import parse_int_list

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(debug: bool = False) -> None:
    """Route every diagnostic to stderr; stdout carries only the command output"""
    level = logging.DEBUG if debug else logging.WARNING
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt='%Y-%m-%d %H:%M:%S'))
    root = logging.getLogger('peerfx')
    root.handlers[:] = [handler]
    root.setLevel(level)
    root.propagate = False


def _add_overrides(parser: argparse.ArgumentParser, *, simulation: bool = True) -> None:
    """Flags that override configuration keys"""
    parser.add_argument("--design", choices=["rp", "cr"], help="rp (random partitioning) or cr (complete randomization)")
    parser.add_argument("--composition", metavar="L", help="Composition vector over canonical group sets, e.g. 0,1,1,0,0")
    parser.add_argument("--alpha", type=float, help="Interval level is 1 - alpha")
    parser.add_argument("--contrasts", metavar="SPEC", help="'all' or R1-R2,R1-R3 (1-based peer sets)")
    parser.add_argument("--unconditional", action="store_true", default=None,
                        help="Use random-partition kernels instead of conditioning on the observed composition")
    if simulation:
        parser.add_argument("--seed", type=int, help="Random seed, 0 <= seed < 2^64")
        parser.add_argument("--draws", type=int, help="Monte Carlo draws")
        parser.add_argument("--workers", type=int, help="Worker threads, 0 sizes from the machine")


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(
        prog="peerfx",
        description="Design-based inference for peer effects under random group formation"
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}"
    )

    parser.add_argument(
        "--debug",
        action="store_true",
        help="Enable debug logging and tracebacks"
    )

    parser.add_argument(
        "--config",
        type=str,
        metavar="FILE",
        help="Configuration file layered over the user configuration"
    )

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    enumerate_parser = commands.add_parser("enumerate", help="List canonical peer sets and group sets")
    enumerate_parser.add_argument("--attributes", type=int, required=True, metavar="H")
    enumerate_parser.add_argument("--peers", type=int, required=True, metavar="K")

    assign_parser = commands.add_parser("assign", help="Draw a group assignment as unit_id,group_id CSV")
    assign_parser.add_argument("data", type=Path)
    assign_parser.add_argument("--peers", type=int, required=True, metavar="K")
    _add_overrides(assign_parser)

    probs_parser = commands.add_parser("probs", help="Dump the exact probability kernel")
    probs_parser.add_argument("data", type=Path, nargs="?")
    probs_parser.add_argument("--counts", metavar="N1,N2,...", help="Attribute counts instead of a dataset")
    probs_parser.add_argument("--peers", type=int, metavar="K")
    _add_overrides(probs_parser, simulation=False)

    estimate_parser = commands.add_parser("estimate", help="Subgroup means, effects and variance estimates")
    estimate_parser.add_argument("data", type=Path)
    estimate_parser.add_argument("--target", metavar="ATTR", help="Also report the target-subpopulation estimate")
    estimate_parser.add_argument("--emit-plot-data", action="store_true", default=None,
                                 help="Add per-cell means with interval endpoints")
    _add_overrides(estimate_parser)

    test_parser = commands.add_parser("test", help="Randomization tests of no peer effect")
    test_parser.add_argument("data", type=Path)
    test_parser.add_argument("--null", metavar="sharp|ATTR", help="Sharp null or the attribute of a subgroup null")
    test_parser.add_argument("--statistic", choices=[s.value for s in Statistic])
    test_parser.add_argument("--attribute", metavar="ATTR", help="Attribute of T_a or F_a under the sharp null")
    _add_overrides(test_parser)

    optimize_parser = commands.add_parser("optimize", help="Composition maximizing the estimated total outcome")
    optimize_parser.add_argument("data", type=Path)
    optimize_parser.add_argument("--new-counts", required=True, metavar="N1,N2,...")
    _add_overrides(optimize_parser)

    fiducial_parser = commands.add_parser("fiducial", help="Fiducial distribution of the optimal composition")
    fiducial_parser.add_argument("data", type=Path)
    fiducial_parser.add_argument("--new-counts", required=True, metavar="N1,N2,...")
    _add_overrides(fiducial_parser)

    oracle_parser = commands.add_parser("oracle-check", help="Exhaustive-enumeration self-check")
    oracle_parser.add_argument("--suite", choices=["standard", "quick"], default="standard")

    return parser.parse_args(argv)


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Configuration keys given on the command line; absent flags stay None"""
    keys = ['design', 'composition', 'alpha', 'contrasts', 'unconditional', 'seed', 'draws', 'workers',
            'emit_plot_data']
    return {key: getattr(args, key, None) for key in keys}


def _attribute(population: Population, label: str) -> int:
    """0-based index of an attribute given by its label in the dataset"""
    try:
        return population.attribute_labels.index(label)
    except ValueError:
        raise ValidationError(
            f"Unknown attribute {label!r}; known attributes are {list(population.attribute_labels)}") from None


def _emit(text: str) -> None:
    sys.stdout.write(text)
    sys.stdout.flush()


def cmd_enumerate(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    space = cached_space(args.attributes, args.peers)
    _emit(dumps_json(ctx.envelope("enumerate", ctx.enumerate_spaces(args.attributes, args.peers), space=space)))
    return 0


def cmd_assign(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    dataset = ctx.load(args.data, args.peers)
    assignment = ctx.assign(dataset)
    write_assignment_csv(assignment, dataset.population, sys.stdout)
    return 0


def cmd_probs(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    if args.data is not None:
        population = ctx.load(args.data, args.peers).population
        prob = ctx.probabilities(population)
    else:
        counts = parse_int_list(args.counts, 'counts')
        if counts is None or args.peers is None:
            raise ValidationError("probs needs a dataset or --counts with --peers")
        population = Population.from_counts(counts, args.peers)
        prob = ctx.probabilities(population)
    _emit(dumps_json(ctx.envelope("probs", prob.to_dict(), population)))
    return 0


def cmd_estimate(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    data = ctx.load(args.data).outcome_data()
    target = _attribute(data.population, args.target) if args.target is not None else None
    result = ctx.estimate(data, target)
    _emit(dumps_json(ctx.envelope("estimate", result, data.population)))
    return 0


def cmd_test(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    data = ctx.load(args.data).outcome_data()
    population = data.population
    null = None
    if args.null is not None:
        sharp = args.null.strip().lower() == 'sharp'
        null = NullHypothesis() if sharp else NullHypothesis(_attribute(population, args.null))
    statistic = Statistic(args.statistic) if args.statistic else None
    attribute = _attribute(population, args.attribute) if args.attribute is not None else None
    if attribute is not None:
        subgroup = statistic.per_attribute if statistic is not None else (null is not None and not null.is_sharp)
        if not subgroup:
            raise ConfigurationError("--attribute applies only to the subgroup statistics T_a and F_a")
    result = ctx.test(data, null, statistic, attribute)
    _emit(dumps_json(ctx.envelope("test", result, population)))
    return 0


def cmd_optimize(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    data = ctx.load(args.data).outcome_data()
    result = ctx.optimize(data, parse_int_list(args.new_counts, 'new-counts'))
    _emit(dumps_json(ctx.envelope("optimize", result, data.population)))
    return 0


def cmd_fiducial(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    data = ctx.load(args.data).outcome_data()
    result = ctx.fiducial(data, parse_int_list(args.new_counts, 'new-counts'))
    _emit(dumps_json(ctx.envelope("fiducial", result, data.population)))
    return 0


def cmd_oracle_check(ctx: AnalysisContext, args: argparse.Namespace) -> int:
    report = ctx.oracle_check(args.suite)
    _emit(dumps_json(ctx.envelope("oracle-check", report.to_dict())))
    if not report.passed:
        logging.getLogger(__name__).error("%d oracle checks failed", len(report.failures))
        return OracleCheckFailure.exit_code
    return 0


COMMANDS: Dict[str, Callable[[AnalysisContext, argparse.Namespace], int]] = {
    "enumerate": cmd_enumerate,
    "assign": cmd_assign,
    "probs": cmd_probs,
    "estimate": cmd_estimate,
    "test": cmd_test,
    "optimize": cmd_optimize,
    "fiducial": cmd_fiducial,
    "oracle-check": cmd_oracle_check,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = parse_arguments(argv)
    setup_logging(args.debug)

    logger = logging.getLogger(__name__)
    logger.debug("peerfx %s running %s", __version__, args.command)

    try:
        manager = ConfigManager(config_file=Path(args.config) if args.config else None)
        ctx = AnalysisContext(config_manager=manager, overrides=config_overrides(args))
        return COMMANDS[args.command](ctx, args)
    except PeerfxError as e:
        if args.debug:
            logger.exception("%s failed", args.command)
        print(f"peerfx {args.command}: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("peerfx: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
