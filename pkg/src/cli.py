import argparse
import sys
from typing import List, Optional

from src.commands import (
    demixCommand,
    evaluateCommand,
    plotCommand,
    recoverCommand,
    simulateCommand,
    sweepCommand,
    synthCommand,
)
from src.config.logging import configure_logging, get_logger

logger = get_logger(__name__)

COMMANDS = [simulateCommand, recoverCommand, demixCommand, evaluateCommand, plotCommand, synthCommand, sweepCommand]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vibro",
        description="Event-camera speckle vibrometry: simulate, recover, demix and evaluate audio from event streams.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except Exception as e:
        logger.error("cli_command_failed", cli_command=args.command, error=str(e))
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
