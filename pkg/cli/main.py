"""
Command-line entry point for the document graph structure learner
"""
import argparse
import logging
import sys
from typing import List, Optional

from core.config import settings
from core.errors import DocGraphError
from core.schemas import CommandResult
from cli.commands import data, experiments, training

logger = logging.getLogger(__name__)

JSON_LOG_FORMAT = '{"time": "%(asctime)s", "logger": "%(name)s", "level": "%(levelname)s", "message": "%(message)s"}'
TEXT_LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging() -> None:
    # stdout carries the command summary only
    logging.basicConfig(
        level=getattr(logging, settings.LOG_LEVEL),
        format=JSON_LOG_FORMAT if settings.LOG_FORMAT == "json" else TEXT_LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docgraph", description=settings.PROJECT_NAME)
    subparsers = parser.add_subparsers(dest="command", required=True)
    data.register(subparsers)
    training.register(subparsers)
    experiments.register(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> CommandResult:
    """Parse arguments, dispatch, and map failures onto a CommandResult"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except DocGraphError as e:
        logger.error(f"{args.command} failed: {str(e)}")
        return CommandResult(command=args.command, exit_code=2, error=str(e), error_code=e.error_code)
    except Exception as e:
        logger.error(f"Unhandled exception in {args.command}: {str(e)}", exc_info=True)
        return CommandResult(command=args.command, exit_code=1, error=str(e), error_code="INTERNAL_ERROR")


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    result = run(argv)
    sys.stdout.write(result.model_dump_json(indent=2) + "\n")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
