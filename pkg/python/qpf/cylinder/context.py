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

import hashlib
import json
import logging
import os
from typing import Any, Sequence

from astropy.table import Table

from .utils import to_builtin
from .worker import WorkerPool

__all__ = ["RunContext", "config_digest", "write_csv", "write_json"]

logger = logging.getLogger("qpf.cylinder.context")

# 17 significant digits round-trip every double
FLOAT_FORMAT = "%.17g"


def config_digest(config: dict[str, Any]) -> str:
    """First 12 hex digits of the SHA-256 of the canonical JSON config."""
    canonical = json.dumps(to_builtin(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def write_csv(path: str, columns: dict[str, Sequence[Any]]) -> None:
    """Write equally long columns as a CSV table with a header row."""
    table = Table(list(columns.values()), names=list(columns.keys()))
    formats = {name: FLOAT_FORMAT for name in table.colnames if table[name].dtype.kind == "f"}
    table.write(path, format="ascii.csv", formats=formats, overwrite=True)
    logger.debug(f"Wrote {len(table)} rows to {path}")


def write_json(path: str, content: dict[str, Any]) -> None:
    with open(path, "w") as file:
        json.dump(to_builtin(content), file, sort_keys=True, indent=2, allow_nan=False)
        file.write("\n")
    logger.debug(f"Wrote {path}")


class RunContext:
    """Resources shared by the commands of one invocation.

    Attributes
    ----------
    out :
        Base output directory. Every run writes into its own
        subdirectory ``<command>-<config digest>``.
    pool :
        Worker pool used for sweeps and Φ sampling.
    """

    out: str
    pool: WorkerPool

    def __init__(self, out: str, jobs: int = 1):
        self.out = out
        self.pool = WorkerPool(jobs)

    def run_directory(self, command: str, config: dict[str, Any]) -> str:
        path = os.path.join(self.out, f"{command}-{config_digest(config)}")
        os.makedirs(path, exist_ok=True)
        return path

    def close(self) -> None:
        self.pool.close()
