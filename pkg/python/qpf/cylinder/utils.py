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

import logging
from enum import Enum
from typing import Any

import numpy as np

__all__ = ["RunFormatter", "to_builtin", "SOLVER_LEVEL", "SWEEP_LEVEL", "COMMAND_LEVEL", "WORKER_LEVEL"]

# Custom log levels for the solvers and the command line runner
SOLVER_LEVEL = 21
SWEEP_LEVEL = 22
COMMAND_LEVEL = 23
WORKER_LEVEL = 24
logging.addLevelName(SOLVER_LEVEL, "SOLVER")
logging.addLevelName(SWEEP_LEVEL, "SWEEP")
logging.addLevelName(COMMAND_LEVEL, "COMMAND")
logging.addLevelName(WORKER_LEVEL, "WORKER")


def solver(self, message, *args, **kws):
    """Special log level for solver iterations"""
    if self.isEnabledFor(SOLVER_LEVEL):
        self._log(SOLVER_LEVEL, message, args, **kws)


def sweep(self, message, *args, **kws):
    """Special log level for sweeps and continuations"""
    if self.isEnabledFor(SWEEP_LEVEL):
        self._log(SWEEP_LEVEL, message, args, **kws)


def command(self, message, *args, **kws):
    """Special log level for commands"""
    if self.isEnabledFor(COMMAND_LEVEL):
        self._log(COMMAND_LEVEL, message, args, **kws)


def worker(self, message, *args, **kws):
    """Special log level for the worker pool"""
    if self.isEnabledFor(WORKER_LEVEL):
        self._log(WORKER_LEVEL, message, args, **kws)


logging.Logger.solver = solver  # type: ignore[attr-defined]
logging.Logger.sweep = sweep  # type: ignore[attr-defined]
logging.Logger.command = command  # type: ignore[attr-defined]
logging.Logger.worker = worker  # type: ignore[attr-defined]


# ANSI color codes for printing to the terminal
class Colors(Enum):
    RESET = 0
    RED = 31
    GREEN = 32
    YELLOW = 33
    BLUE = 34
    MAGENTA = 35
    CYAN = 36
    WHITE = 37
    BRIGHT_BLACK = 90
    BRIGHT_RED = 91

    @property
    def ansi_code(self):
        return f"\x1b[{self.value};20m"


class RunFormatter(logging.Formatter):
    log_format = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    FORMATS = {
        logging.DEBUG: Colors.BRIGHT_BLACK.ansi_code + log_format + Colors.RESET.ansi_code,
        logging.INFO: Colors.WHITE.ansi_code + log_format + Colors.RESET.ansi_code,
        SOLVER_LEVEL: Colors.CYAN.ansi_code + log_format + Colors.RESET.ansi_code,
        SWEEP_LEVEL: Colors.BLUE.ansi_code + log_format + Colors.RESET.ansi_code,
        COMMAND_LEVEL: Colors.GREEN.ansi_code + log_format + Colors.RESET.ansi_code,
        WORKER_LEVEL: Colors.MAGENTA.ansi_code + log_format + Colors.RESET.ansi_code,
        logging.WARNING: Colors.YELLOW.ansi_code + log_format + Colors.RESET.ansi_code,
        logging.ERROR: Colors.RED.ansi_code + log_format + Colors.RESET.ansi_code,
        logging.CRITICAL: Colors.BRIGHT_RED.ansi_code + log_format + Colors.RESET.ansi_code,
    }

    def format(self, record):
        log_fmt = self.FORMATS.get(record.levelno, self.log_format)
        formatter = logging.Formatter(log_fmt)
        return formatter.format(record)


def to_builtin(value: Any) -> Any:
    """Convert numpy scalars and arrays (also nested) into JSON types."""
    if isinstance(value, dict):
        return {str(key): to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return to_builtin(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value
