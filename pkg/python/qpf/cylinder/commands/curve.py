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

from ..command import EXIT_CONVERGENCE, BaseCommand
from ..context import write_csv
from ..curves import (
    CurveConvergenceError,
    continuation_in_eps,
    foliation_sweep,
    functional_residual,
    rational_obstruction,
    translated_curve,
)
from ..periodic import grid

if TYPE_CHECKING:
    from ..context import RunContext
    from ..curves import TranslatedCurve

__all__ = ["ContinueCommand", "CurveCommand", "RationalCheckCommand", "SweepCommand"]

logger = logging.getLogger("qpf.cylinder.commands.curve")


def _curve_columns(curves: list[TranslatedCurve], size: int) -> dict[str, np.ndarray]:
    theta = grid(size)
    return {
        "c": np.repeat([curve.c for curve in curves], size),
        "theta": np.tile(theta, len(curves)),
        "psi": np.concatenate([curve.psi.sample(size) for curve in curves]),
    }


@dataclass(kw_only=True)
class CurveCommand(BaseCommand):
    """Translated curve with mean ``c`` at ``epsilon``.

    Writes ``curve.csv`` (θ, ψ), ``modes.csv`` (n, Re û_n, Im û_n) and
    the curve diagnostics.
    """

    response_type: str = "curve"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        alpha = config.frequency()
        curve = translated_curve(forced_map, config.epsilon, alpha, config.c, config.curve_options())
        theta = grid(config.grid_size)
        psi = curve.psi.sample(config.grid_size)
        write_csv(os.path.join(run_dir, "curve.csv"), {"theta": theta, "psi": psi})
        write_csv(
            os.path.join(run_dir, "modes.csv"),
            {"n": curve.psi.modes, "real": curve.psi.coeffs.real, "imag": curve.psi.coeffs.imag},
        )
        if not curve.converged:
            self.exit_code = EXIT_CONVERGENCE
        refined_size = 2 * config.curve_options().grid_factor * curve.n_modes
        refined = functional_residual(curve, forced_map, alpha, refined_size)
        return {
            "map": forced_map.describe(),
            "alpha": str(alpha),
            "curve": curve.summary(),
            "refined_residual_sup": refined,
        }


@dataclass(kw_only=True)
class SweepCommand(BaseCommand):
    """Translated curves for ``c_values`` (or ``c_count`` values in
    ``c_range``), checked for ordering.
    """

    response_type: str = "sweep"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        alpha = config.frequency()
        sweep = foliation_sweep(
            forced_map, config.epsilon, alpha, config.sweep_values(), config.curve_options(), context.pool
        )
        curves = list(sweep.curves)
        write_csv(
            os.path.join(run_dir, "curves.csv"),
            {
                "c": [curve.c for curve in curves],
                "lambda": [curve.lam for curve in curves],
                "residual_sup": [curve.residual_sup for curve in curves],
                "d2_norm": [curve.d2_norm for curve in curves],
                "converged": [curve.converged for curve in curves],
            },
        )
        write_csv(os.path.join(run_dir, "psi.csv"), _curve_columns(curves, config.grid_size))
        if not all(curve.converged for curve in curves):
            self.exit_code = EXIT_CONVERGENCE
        return {
            "map": forced_map.describe(),
            "alpha": str(alpha),
            "lipschitz": sweep.lipschitz,
            "ordered": sweep.ordered,
            "curves": [curve.summary() for curve in curves],
        }


@dataclass(kw_only=True)
class ContinueCommand(BaseCommand):
    """Follow the curve with mean ``c`` along ``eps_ladder``.

    A breakdown is part of the result, not an error.
    """

    response_type: str = "continue"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        if config.eps_ladder is None:
            raise ValueError("The 'continue' command requires eps_ladder")
        forced_map = config.build_map()
        report = continuation_in_eps(
            forced_map, config.frequency(), config.c, config.eps_ladder, config.curve_options()
        )
        write_csv(
            os.path.join(run_dir, "trace.csv"),
            {"epsilon": [eps for eps, _ in report.trace], "d2_norm": [d2 for _, d2 in report.trace]},
        )
        return {
            "map": forced_map.describe(),
            "breakdown_eps": report.breakdown_eps,
            "reason": report.reason,
            "critical_epsilon": report.critical_epsilon,
            "curves": [curve.summary() for curve in report.curves],
        }


@dataclass(kw_only=True)
class RationalCheckCommand(BaseCommand):
    """Search for an obstruction certificate at a rational ``alpha``.

    A certificate is a successful result. The iteration is then run
    anyway at ``epsilon`` and its outcome recorded.
    """

    response_type: str = "rational-check"

    def build_contents(self, context: RunContext, run_dir: str) -> dict:
        config = self.config
        forced_map = config.build_map()
        alpha = config.frequency()
        certificate = rational_obstruction(forced_map, config.epsilon, alpha)
        try:
            curve = translated_curve(forced_map, config.epsilon, alpha, config.c, config.curve_options())
            iteration = {"converged": curve.converged, "curve": curve.summary()}
        except CurveConvergenceError as err:
            iteration = {"converged": False, "error": str(err)}
        return {
            "map": forced_map.describe(),
            "alpha": str(alpha),
            "certificate": None if certificate is None else certificate.summary(),
            "iteration": iteration,
        }


CurveCommand.register("curve")
SweepCommand.register("sweep")
ContinueCommand.register("continue")
RationalCheckCommand.register("rational-check")
