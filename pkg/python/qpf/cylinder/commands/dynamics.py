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

import numpy as np

from ..bifurcation import find_invariant_curves
from ..command import BaseCommand
from ..context import write_csv
from ..dynamics import fibred_rotation_number, lyapunov, orbit_sample
from ..maps import CylinderPoint

if TYPE_CHECKING:
    from ..context import RunContext

__all__ = ["LyapunovCommand", "OrbitCommand"]

logger = logging.getLogger("qpf.cylinder.commands.dynamics")


@dataclass(kw_only=True)
class LyapunovCommand(BaseCommand):
    """Lyapunov exponents of every invariant curve found in ``c_range``.

    ``trace.csv`` holds the running averages (1/n) Σ log a for each root.
    """

    response_type: str = "lyapunov"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        alpha = config.frequency()
        report = find_invariant_curves(
            forced_map, config.epsilon, alpha, config.c_range, config.root_options(), context.pool
        )
        products = [
            lyapunov(root.curve, forced_map, alpha, n_max=config.n_max, theta0=config.theta0)
            for root in report.roots
        ]
        rows: dict[str, list] = {"root": [], "n": [], "average": []}
        for index, product in enumerate(products):
            rows["root"].extend([index] * len(product.n_values))
            rows["n"].extend(int(n) for n in product.n_values)
            rows["average"].extend(float(value) for value in product.averages)
        write_csv(os.path.join(run_dir, "trace.csv"), rows)
        return {
            "map": forced_map.describe(),
            "roots": [
                {**root.summary(), **product.summary()} for root, product in zip(report.roots, products)
            ],
        }


@dataclass(kw_only=True)
class OrbitCommand(BaseCommand):
    """Orbit of ``x0`` after ``n_transient`` steps, written as ``orbit.csv``
    (n, r, θ). For maps periodic in r the fibred rotation number is
    reported as well.
    """

    response_type: str = "orbit"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        alpha = config.frequency()
        x0 = CylinderPoint(*config.x0)
        points = orbit_sample(
            forced_map, config.epsilon, alpha, x0, config.n_transient, config.n_keep, config.inverse
        )
        first = config.n_transient + 1
        write_csv(
            os.path.join(run_dir, "orbit.csv"),
            {
                "n": np.arange(first, first + len(points)),
                "r": [point.r for point in points],
                "theta": [point.theta for point in points],
            },
        )
        contents = {"map": forced_map.describe(), "alpha": str(alpha), "points": len(points)}
        if forced_map.periodic_in_r:
            rotation = fibred_rotation_number(forced_map, config.epsilon, alpha, x0, config.n_rotation)
            contents["rotation_number"] = {
                "rho": rotation.rho,
                "rho_double": rotation.rho_double,
                "extrapolated": rotation.extrapolated,
                "tail_estimate": rotation.tail_estimate,
                "n": rotation.n,
            }
        return contents


LyapunovCommand.register("lyapunov")
OrbitCommand.register("orbit")
