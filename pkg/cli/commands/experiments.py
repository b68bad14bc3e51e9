"""
Experiment commands: ablate, sweep-temperature, fraction-sweep
"""
import argparse
import logging

from core.schemas import CommandResult
from cli.commands.common import (
    add_config_arguments,
    add_io_arguments,
    config_from_args,
    get_connector,
    output_dir,
    parse_floats,
    read_corpus,
)
from services.experiment_service import DEFAULT_FRACTIONS, DEFAULT_TAUS, ExperimentResult, ExperimentService

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    ablate = subparsers.add_parser("ablate", help="compare graph constructions over seeded runs")
    _add_common(ablate)
    ablate.set_defaults(handler=ablate_command)

    sweep = subparsers.add_parser("sweep-temperature", help="test accuracy per Gumbel temperature")
    _add_common(sweep)
    sweep.add_argument("--taus", help="comma-separated temperatures (default %s)" % ",".join(map(str, DEFAULT_TAUS)))
    sweep.set_defaults(handler=temperature_command)

    fractions = subparsers.add_parser("fraction-sweep", help="micro/macro F1 per fraction of training data")
    _add_common(fractions)
    fractions.add_argument(
        "--fractions", help="comma-separated fractions (default %s)" % ",".join(map(str, DEFAULT_FRACTIONS))
    )
    fractions.set_defaults(handler=fraction_command)


def _add_common(parser: argparse.ArgumentParser) -> None:
    add_io_arguments(parser)
    add_config_arguments(parser)
    parser.add_argument("--runs", type=int, help="seeded runs per row")


def _service(args: argparse.Namespace) -> ExperimentService:
    return ExperimentService(runs=args.runs, embeddings_path=args.embeddings)


def _result(args: argparse.Namespace, result: ExperimentResult) -> CommandResult:
    connector = get_connector()
    out = output_dir(args)
    artifacts = {
        "table": str(connector.write_table(result.table, out / f"{result.name}.tsv")),
        "runs": str(connector.write_table(result.runs, out / f"{result.name}_runs.tsv")),
    }
    rows = result.table.astype(object).where(result.table.notna(), None).to_dict(orient="records")
    return CommandResult(
        command=args.command,
        exit_code=result.exit_code,
        summary={"rows": rows, "failed_runs": result.failed},
        artifacts=artifacts,
        error=f"{result.failed} run(s) failed" if result.failed else None,
        error_code="RUN_FAILED" if result.failed else None,
    )


def ablate_command(args: argparse.Namespace) -> CommandResult:
    config = config_from_args(args)
    corpus = read_corpus(args)
    return _result(args, _service(args).run_ablation(corpus, config))


def temperature_command(args: argparse.Namespace) -> CommandResult:
    config = config_from_args(args)
    taus = parse_floats(args.taus, "--taus") or list(DEFAULT_TAUS)
    corpus = read_corpus(args)
    return _result(args, _service(args).run_temperature_sweep(corpus, config, taus))


def fraction_command(args: argparse.Namespace) -> CommandResult:
    config = config_from_args(args)
    fractions = parse_floats(args.fractions, "--fractions") or list(DEFAULT_FRACTIONS)
    corpus = read_corpus(args)
    return _result(args, _service(args).run_fraction_sweep(corpus, config, fractions))
