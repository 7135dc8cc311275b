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

import logging
import os
from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..bifurcation import find_invariant_curves, intervals_IN, mode_lock_interval
from ..command import BaseCommand
from ..context import write_csv

if TYPE_CHECKING:
    from ..context import RunContext

__all__ = ["FindInvariantCommand", "ModeLockCommand"]

logger = logging.getLogger("qpf.cylinder.commands.bifurcation")


@dataclass(kw_only=True)
class FindInvariantCommand(BaseCommand):
    """Zeros of Φ in ``c_range`` with their stability.

    Writes the Φ samples to ``phi.csv``.
    """

    response_type: str = "find-invariant"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        report = find_invariant_curves(
            forced_map,
            config.epsilon,
            config.frequency(),
            config.c_range,
            config.root_options(),
            context.pool,
        )
        write_csv(os.path.join(run_dir, "phi.csv"), {"c": report.c_samples, "phi": report.phi_samples})
        return {"map": forced_map.describe(), **report.summary()}


@dataclass(kw_only=True)
class ModeLockCommand(BaseCommand):
    """Mode-locking interval [ω_*, ω*] of the configured map's drift ω₁.

    With ``n_range`` the intervals I_N are reported as well.
    """

    response_type: str = "mode-lock"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        family = config.map_family()
        alpha = config.frequency()
        options = config.root_options()
        interval = mode_lock_interval(family, config.epsilon, alpha, options, context.pool)
        write_csv(os.path.join(run_dir, "phi.csv"), {"c": interval.c_samples, "phi": interval.phi_samples})
        contents = {"map": family(0.0).describe(), **interval.summary()}
        if config.n_range is not None:
            lower, upper = config.n_range
            intervals = intervals_IN(
                family,
                config.epsilon,
                alpha,
                range(lower, upper + 1),
                options,
                config.omega_window,
                context.pool,
                interval,
            )
            contents["intervals"] = [
                {"n": item.n, "lower": item.lower, "upper": item.upper} for item in intervals
            ]
        return contents


FindInvariantCommand.register("find-invariant")
ModeLockCommand.register("mode-lock")
