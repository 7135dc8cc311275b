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

"""Run configuration: maps, rotation numbers and tolerances."""

from __future__ import annotations

import logging
import math
from typing import Annotated, Any, Callable, Literal

import numpy as np
import sympy
import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    NonNegativeFloat,
    NonNegativeInt,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from .arithmetic import Frequency, parse_frequency
from .bifurcation import RootOptions
from .curves import CurveOptions
from .expression import THETA, ExpressionError, parse_forcing
from .maps import (
    ForcedMap,
    builtin_arnold,
    builtin_arnold_scaled,
    builtin_expression,
    builtin_linear_test,
    builtin_rational_counterexample,
    builtin_transformed_arnold,
)
from .periodic import PeriodicFunction

__all__ = [
    "ArnoldScaledSpec",
    "ArnoldSpec",
    "ExpressionSpec",
    "LinearSpec",
    "RationalSpec",
    "RunConfig",
    "Tolerances",
    "TransformedSpec",
    "format_validation_error",
    "load_config",
]

logger = logging.getLogger("qpf.cylinder.config")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", allow_inf_nan=False, frozen=True)


class ArnoldSpec(_Model):
    """r₁ = r + ω + k sin r + b sin θ, run with ε = 1."""

    type: Literal["arnold"]
    omega: float
    k: float
    b: float

    def build(self, alpha: Frequency) -> ForcedMap:
        return builtin_arnold(self.omega, self.k, self.b)

    def without_drift(self) -> ArnoldSpec:
        return self.model_copy(update={"omega": 0.0})


class ArnoldScaledSpec(_Model):
    type: Literal["arnold_scaled"]
    omega0: float = 0.0
    omega1: float
    b: float

    def build(self, alpha: Frequency) -> ForcedMap:
        return builtin_arnold_scaled(self.omega0, self.omega1, self.b)

    def without_drift(self) -> ArnoldScaledSpec:
        return self.model_copy(update={"omega1": 0.0})


class TransformedSpec(_Model):
    type: Literal["transformed"]
    omega1: float
    b0: float
    b1: float = 0.0

    def build(self, alpha: Frequency) -> ForcedMap:
        return builtin_transformed_arnold(self.omega1, self.b0, self.b1, alpha)

    def without_drift(self) -> TransformedSpec:
        return self.model_copy(update={"omega1": 0.0})


class LinearSpec(_Model):
    """F = -r + g(θ) with g a trigonometric expression in θ."""

    type: Literal["linear"]
    g: str = "cos(theta)"
    modes: PositiveInt = 64

    @field_validator("g")
    @classmethod
    def check_g(cls, value: str) -> str:
        expr = parse_forcing(value)
        if not expr.free_symbols <= {THETA}:
            raise ExpressionError(f"g may only depend on theta, received '{value}'")
        return value

    def build(self, alpha: Frequency) -> ForcedMap:
        func = sympy.lambdify(THETA, parse_forcing(self.g), modules="numpy")
        g = PeriodicFunction.from_function(func, self.modes)
        return builtin_linear_test(g)

    def without_drift(self) -> LinearSpec:
        return self


class RationalSpec(_Model):
    """F = (1 + sin² r) sin qθ."""

    type: Literal["rationalq"]
    q: PositiveInt

    def build(self, alpha: Frequency) -> ForcedMap:
        return builtin_rational_counterexample(self.q)

    def without_drift(self) -> RationalSpec:
        return self


class ExpressionSpec(_Model):
    type: Literal["expr"]
    F: str
    params: dict[str, float] = Field(default_factory=dict)
    periodic_in_r: bool | None = None

    @model_validator(mode="after")
    def check_expression(self) -> ExpressionSpec:
        parse_forcing(self.F, self.params)
        return self

    def build(self, alpha: Frequency) -> ForcedMap:
        return builtin_expression(self.F, self.params, self.periodic_in_r)

    def without_drift(self) -> ExpressionSpec:
        return self


MapSpec = Annotated[
    ArnoldSpec | ArnoldScaledSpec | TransformedSpec | LinearSpec | RationalSpec | ExpressionSpec,
    Field(discriminator="type"),
]


class Tolerances(_Model):
    tol_step: PositiveFloat = 1e-11
    tol_residual: PositiveFloat = 1e-9
    max_iter: PositiveInt = 200
    a_bounds: tuple[PositiveFloat, PositiveFloat] = (0.5, 1.5)
    d2_ceiling: PositiveFloat = 1.0
    adaptive: bool = True
    max_modes: PositiveInt = 2048
    tol_root: PositiveFloat = 1e-10
    tol_c: PositiveFloat = 1e-12
    tol_zero_factor: PositiveFloat = 1e-3

    @field_validator("a_bounds")
    @classmethod
    def check_bounds(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not value[0] < 1 < value[1]:
            raise ValueError("a_bounds must satisfy lower < 1 < upper")
        return value


def _check_range(value: tuple[float, float] | None) -> tuple[float, float] | None:
    if value is not None and not value[0] < value[1]:
        raise ValueError(f"Range must be increasing, received {list(value)}")
    return value


class RunConfig(_Model):
    """Everything a command needs, validated before any computation.

    Attributes
    ----------
    map :
        The forced map, selected by its ``type``.
    alpha :
        ``golden``, ``sqrt2m1``, ``p/q`` or a decimal in (0, 1).
    epsilon :
        Perturbation size.
    eps_ladder :
        Increasing values of ε for ``continue``.
    c, c_range, c_values, c_count :
        Mean of a single curve, a range for searches and sweeps, explicit
        sweep values, and the number of sweep values taken from ``c_range``.
    modes :
        Initial truncation order N.
    grid_size :
        Number of θ samples in curve tables.
    """

    map: MapSpec
    alpha: str | float = "golden"
    epsilon: NonNegativeFloat = 0.05
    eps_ladder: list[PositiveFloat] | None = None
    c: float = 0.0
    c_range: tuple[float, float] = (0.0, 2 * math.pi)
    c_values: list[float] | None = None
    c_count: Annotated[int, Field(ge=2)] = 41
    modes: PositiveInt = 256
    grid_size: PositiveInt = 256
    tolerances: Tolerances = Field(default_factory=Tolerances)
    theta0: float = 0.0
    x0: tuple[float, float] = (0.0, 0.0)
    n_max: PositiveInt = 10_000
    n_transient: NonNegativeInt = 1000
    n_keep: PositiveInt = 1000
    n_rotation: PositiveInt = 10_000
    inverse: bool = False
    samples_per_period: PositiveInt = 512
    n_range: tuple[int, int] | None = None
    omega_window: tuple[float, float] = (-math.pi, math.pi)

    @field_validator("alpha")
    @classmethod
    def check_alpha(cls, value: str | float) -> str | float:
        parse_frequency(value)
        return value

    @field_validator("eps_ladder")
    @classmethod
    def check_ladder(cls, value: list[float] | None) -> list[float] | None:
        if value is not None:
            if not value:
                raise ValueError("eps_ladder must not be empty")
            if any(upper <= lower for lower, upper in zip(value[:-1], value[1:])):
                raise ValueError("eps_ladder must be strictly increasing")
        return value

    @field_validator("c_range", "omega_window")
    @classmethod
    def check_range(cls, value: tuple[float, float]) -> tuple[float, float]:
        return _check_range(value)

    @field_validator("n_range")
    @classmethod
    def check_n_range(cls, value: tuple[int, int] | None) -> tuple[int, int] | None:
        if value is not None and value[0] > value[1]:
            raise ValueError(f"n_range must be non-decreasing, received {list(value)}")
        return value

    def frequency(self) -> Frequency:
        return parse_frequency(self.alpha)

    def build_map(self) -> ForcedMap:
        return self.map.build(self.frequency())

    def map_family(self) -> Callable[[float], ForcedMap]:
        """ω₁ ↦ the configured map with its drift replaced by ω₁."""
        base = self.map.without_drift().build(self.frequency())
        return base.with_drift

    def curve_options(self) -> CurveOptions:
        tolerances = self.tolerances
        return CurveOptions(
            modes=self.modes,
            tol_step=tolerances.tol_step,
            tol_residual=tolerances.tol_residual,
            max_iter=tolerances.max_iter,
            a_bounds=tolerances.a_bounds,
            d2_ceiling=tolerances.d2_ceiling,
            adaptive=tolerances.adaptive,
            max_modes=max(tolerances.max_modes, self.modes),
        )

    def root_options(self) -> RootOptions:
        return RootOptions(
            samples_per_period=self.samples_per_period,
            tol_root=self.tolerances.tol_root,
            tol_c=self.tolerances.tol_c,
            tol_zero_factor=self.tolerances.tol_zero_factor,
            curve=self.curve_options(),
        )

    def sweep_values(self) -> list[float]:
        if self.c_values is not None:
            return list(self.c_values)
        return [float(c) for c in np.linspace(*self.c_range, self.c_count)]

    def resolved(self) -> dict[str, Any]:
        """The configuration with every default filled in, as JSON types."""
        return self.model_dump(mode="json")


def format_validation_error(error: ValidationError) -> str:
    """One line per problem, prefixed with the dotted path of the field."""
    lines = []
    for problem in error.errors():
        path = ".".join(str(part) for part in problem["loc"]) or "<root>"
        lines.append(f"{path}: {problem['msg']}")
    return "; ".join(lines)


def load_config(path: str, overrides: dict[str, Any] | None = None) -> dict[str, Any]:
    """Read a YAML or JSON configuration file into a dictionary.

    ``overrides`` replace top level entries, e.g. ``{"modes": 128}`` for
    the ``--modes`` flag.
    """
    with open(path, "r") as file:
        config = yaml.safe_load(file)
    if not isinstance(config, dict):
        raise ValueError(f"Configuration file {path} does not contain a mapping")
    config.update(overrides or {})
    return config
