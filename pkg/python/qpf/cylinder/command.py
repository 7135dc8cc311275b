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

from __future__ import annotations

import json
import logging
import os
import traceback
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

from pydantic import ValidationError

from .config import RunConfig, format_validation_error
from .context import write_json
from .errors import ConvergenceFailure, PreconditionFailure
from .utils import to_builtin

if TYPE_CHECKING:
    from .context import RunContext

__all__ = [
    "EXIT_CONVERGENCE",
    "EXIT_OK",
    "EXIT_PARSING",
    "EXIT_PRECONDITION",
    "BaseCommand",
    "CommandExecutionError",
    "CommandParsingError",
    "CommandResponseError",
    "execute_command",
]

logger = logging.getLogger("qpf.cylinder.command")

EXIT_OK = 0
EXIT_PARSING = 1
EXIT_CONVERGENCE = 2
EXIT_PRECONDITION = 3


def construct_error_message(error_name: str, description: str, traceback: str, exit_code: int) -> str:
    """Use a standard format for all error messages.

    Parameters
    ----------
    error_name :
        Name of the error.
    description :
        Description of the error.
    exit_code :
        Process exit code that the error maps to.

    Returns
    -------
    result :
        JSON formatted string.
    """
    return json.dumps(
        {
            "type": "error",
            "exit_code": exit_code,
            "content": {
                "error": error_name,
                "description": description,
                "traceback": traceback,
            },
        }
    )


def exit_code_for(error: BaseException) -> int:
    """Exit code of an error raised while executing a command."""
    if isinstance(error, ConvergenceFailure):
        return EXIT_CONVERGENCE
    if isinstance(error, PreconditionFailure):
        return EXIT_PRECONDITION
    return EXIT_PARSING


def error_msg(error: Exception, traceback: str) -> str:
    """Handle errors received while parsing or executing a command.

    Parameters
    ----------
    error :
        The error that was raised while parsing, executing,
        or responding to a command.

    Returns
    -------
    response :
        The JSON formatted error message.
    """
    if isinstance(error, json.decoder.JSONDecodeError):
        return construct_error_message("JSON decoder error", error.args[0], traceback, EXIT_PARSING)

    if isinstance(error, CommandParsingError):
        return construct_error_message("parsing error", error.args[0], traceback, EXIT_PARSING)

    if isinstance(error, CommandExecutionError):
        cause = error.__cause__
        name = "execution error" if cause is None else cause.__class__.__name__
        return construct_error_message(name, error.args[0], traceback, exit_code_for(cause or error))

    if isinstance(error, CommandResponseError):
        return construct_error_message("command response error", error.args[0], traceback, EXIT_PARSING)

    msg = "An unknown error occurred, you should never reach this message."
    return construct_error_message(error.__class__.__name__, msg, traceback, EXIT_PARSING)


class CommandParsingError(Exception):
    """An `~Exception` caused by an error in parsing a command or its
    configuration.
    """

    pass


class CommandExecutionError(Exception):
    """An error occurred while executing a command."""

    pass


class CommandResponseError(Exception):
    """An error occurred while converting a command result to JSON"""

    pass


@dataclass(kw_only=True)
class BaseCommand(ABC):
    """Base class for commands.

    Attributes
    ----------
    config :
        The validated run configuration.
    result :
        The response generated by the command as a `dict` that can
        be converted into JSON.
    response_type :
        The type of response that this command sends to the user.
        This should be unique for each command.
    exit_code :
        Set by `build_contents` when the result is valid but not converged.
    """

    command_registry = {}
    config: RunConfig
    result: dict | None = None
    response_type: str
    exit_code: int = field(default=EXIT_OK)

    @abstractmethod
    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        """Run the computation and write its tables into ``run_dir``.

        Parameters
        ----------
        context :
            Output location and worker pool.
        run_dir :
            Directory reserved for this run.

        Returns
        -------
        contents :
            Diagnostics, written to ``result.json`` next to the tables.
        """
        pass

    def execute(self, context: RunContext):
        """Execute the command.

        This method does not return anything, but sets the `result` and
        writes ``result.json`` with the full resolved configuration.
        """
        config = self.config.resolved()
        run_dir = context.run_directory(self.response_type, config)
        logger.command(f"Running '{self.response_type}' into {run_dir}")
        contents = self.build_contents(context, run_dir)
        summary = {"command": self.response_type, "config": config, **contents}
        write_json(os.path.join(run_dir, "result.json"), summary)
        self.result = {
            "type": self.response_type,
            "exit_code": self.exit_code,
            "content": {"run_dir": run_dir, **contents},
        }

    def to_json(self, request_id: str | None = None):
        """Convert the `result` into JSON."""
        if self.result is None:
            raise CommandExecutionError(f"Null result for command {self.__class__.__name__}")
        if request_id is not None:
            self.result["requestId"] = request_id
        return json.dumps(to_builtin(self.result))

    @classmethod
    def register(cls, name: str):
        """Register a command."""
        BaseCommand.command_registry[name] = cls


def execute_command(command: str | dict[str, Any], context: RunContext) -> str:
    """Parse a command, validate its configuration and execute it.

    Command format:
    ```
    {
        name: command name,
        parameters: the run configuration
    }
    ```

    Parameters
    ----------
    command :
        The command, either JSON formatted or already decoded.
    context :
        Output location and worker pool.

    Returns
    -------
    response :
        JSON envelope with ``type``, ``exit_code`` and ``content``.
    """
    try:
        command_dict = json.loads(command) if isinstance(command, str) else command
        if not isinstance(command_dict, dict):
            raise CommandParsingError(f"Could not generate a valid command from {command}")
    except Exception as err:
        logging.exception("Error converting command to JSON.")
        traceback_string = traceback.format_exc()
        return error_msg(err, traceback_string)

    try:
        if "name" not in command_dict.keys():
            raise CommandParsingError("No command 'name' given")

        if command_dict["name"] not in BaseCommand.command_registry.keys():
            raise CommandParsingError(f"Unrecognized command '{command_dict['name']}'")

        try:
            config = RunConfig.model_validate(command_dict.get("parameters", {}))
        except ValidationError as err:
            raise CommandParsingError(format_validation_error(err)) from None
        run = BaseCommand.command_registry[command_dict["name"]](config=config)

    except CommandParsingError as err:
        logger.error(f"Invalid command: {err}")
        return error_msg(err, traceback.format_exc())
    except Exception as err:
        logging.exception(f"Error parsing command {command_dict}")
        traceback_string = traceback.format_exc()
        return error_msg(CommandParsingError(f"'{err}' error while parsing command"), traceback_string)

    try:
        run.execute(context)
    except Exception as err:
        logging.exception(f"Error executing command {command_dict['name']}")
        traceback_string = traceback.format_exc()
        execution_error = CommandExecutionError(f"{err}")
        execution_error.__cause__ = err
        return error_msg(execution_error, traceback_string)

    try:
        if "requestId" in command_dict:
            result = run.to_json(command_dict["requestId"])
        else:
            result = run.to_json()
    except Exception as err:
        logging.exception("Error converting command response to JSON.")
        traceback_string = traceback.format_exc()
        return error_msg(
            CommandResponseError(f"{err} error converting command response to JSON."), traceback_string
        )

    logger.command(f"Finished '{command_dict['name']}' with exit code {run.exit_code}")
    return result
