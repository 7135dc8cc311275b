# This file is part of qpf_cylinder.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Command line runner: ``qpf-cylinder <command> --config FILE``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from . import commands  # noqa: F401
from .command import EXIT_PARSING, BaseCommand, construct_error_message, execute_command
from .config import load_config
from .context import RunContext
from .utils import RunFormatter

__all__ = ["build_parser", "configure_logging", "main"]

logger = logging.getLogger("qpf.cylinder.cli")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qpf-cylinder",
        description="Translated and invariant curves of quasi-periodically forced cylinder maps.",
    )
    parser.add_argument("command", choices=sorted(BaseCommand.command_registry), help="Command to run.")
    parser.add_argument("-c", "--config", required=True, type=str, help="YAML or JSON run configuration.")
    parser.add_argument("-j", "--jobs", default=1, type=int, help="Number of worker threads.")
    parser.add_argument("-o", "--out", default="runs", type=str, help="Base output directory.")
    parser.add_argument("-N", "--modes", default=None, type=int, help="Override the truncation order N.")
    parser.add_argument(
        "--log",
        default="INFO",
        help="Set the logging level of the qpf.cylinder modules (DEBUG, INFO, WARNING, ERROR, CRITICAL).",
    )
    parser.add_argument(
        "--log-all",
        default="WARNING",
        help="Set the logging level of the remainder of packages (DEBUG, INFO, WARNING, ERROR, CRITICAL).",
    )
    return parser


def configure_logging(package_level: str, root_level: str) -> None:
    """Colour the package logs on stderr and keep other packages quieter."""
    log_level = getattr(logging, root_level.upper(), None)
    if not isinstance(log_level, int):
        raise ValueError(f"Invalid log level: {root_level}")
    logging.basicConfig(level=log_level)

    package_log_level = getattr(logging, package_level.upper(), None)
    if not isinstance(package_log_level, int):
        raise ValueError(f"Invalid log level: {package_level}")

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(RunFormatter())
    package_logger = logging.getLogger("qpf.cylinder")
    package_logger.setLevel(package_log_level)
    package_logger.handlers = [handler]
    package_logger.propagate = False


def main(argv: Sequence[str] | None = None) -> int:
    """Run one command and return its exit code.

    0 on success, 1 for a malformed configuration, 2 when a computation
    did not converge and 3 when a precondition failed.
    """
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log, args.log_all)
    except ValueError as err:
        print(construct_error_message("parsing error", str(err), "", EXIT_PARSING))
        return EXIT_PARSING
    if args.jobs < 1:
        print(construct_error_message("parsing error", f"--jobs must be positive, got {args.jobs}", "", 1))
        return EXIT_PARSING

    overrides = {} if args.modes is None else {"modes": args.modes}
    try:
        parameters = load_config(args.config, overrides)
    except Exception as err:
        logger.error(f"Could not read the configuration {args.config}: {err}")
        print(construct_error_message("parsing error", str(err), "", EXIT_PARSING))
        return EXIT_PARSING

    context = RunContext(args.out, args.jobs)
    try:
        response = execute_command({"name": args.command, "parameters": parameters}, context)
    finally:
        context.close()
    print(response)
    return int(json.loads(response)["exit_code"])


if __name__ == "__main__":
    sys.exit(main())
