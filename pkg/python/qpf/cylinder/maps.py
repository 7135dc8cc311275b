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

"""Quasi-periodically forced maps of the cylinder.

A map is the skew product

    r₁ = r + ω₀ + ε F(r, θ; ε),    θ₁ = θ + 2πα  (mod 2π)

where ω₀ is an optional constant offset (zero except for the scaled
Arnold family).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import TYPE_CHECKING, Any, Callable, Mapping

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize

from .errors import PreconditionFailure
from .expression import compile_forcing

if TYPE_CHECKING:
    from .arithmetic import Frequency
    from .periodic import PeriodicFunction

__all__ = [
    "MAP_PARTIALS",
    "CylinderPoint",
    "ForcedMap",
    "MapDefinitionError",
    "MapPreconditionError",
    "builtin_arnold",
    "builtin_arnold_scaled",
    "builtin_expression",
    "builtin_linear_test",
    "builtin_rational_counterexample",
    "builtin_transformed_arnold",
    "check_partials",
    "estimate_derivative_bound",
    "inverse_step",
    "step",
]

logger = logging.getLogger("qpf.cylinder.maps")

MAP_PARTIALS = ("F", "F_r", "F_theta", "F_rr", "F_thetar")
TWO_PI = 2 * np.pi

MapFunction = Callable[[Any, Any, float], np.ndarray]


class MapDefinitionError(PreconditionFailure):
    """A map is missing partials or contradicts its declared properties."""

    pass


class MapPreconditionError(PreconditionFailure):
    """A map lacks a property required by an operation."""

    pass


def _alpha_value(alpha: Frequency | float) -> float:
    return float(getattr(alpha, "alpha", alpha))


@dataclass(frozen=True)
class CylinderPoint:
    """A point (r, θ) of ℝ × 𝕋 with θ stored in [0, 2π)."""

    r: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


def _broadcast(func: MapFunction) -> MapFunction:
    def evaluate(r: ArrayLike, theta: ArrayLike, eps: float) -> np.ndarray:
        r_arr = np.asarray(r, dtype=float)
        theta_arr = np.asarray(theta, dtype=float)
        return np.zeros(np.broadcast_shapes(r_arr.shape, theta_arr.shape)) + func(r_arr, theta_arr, eps)

    return evaluate


@dataclass(frozen=True, kw_only=True)
class ForcedMap:
    """A forcing F(r, θ; ε) together with its partial derivatives.

    Attributes
    ----------
    name :
        Identifier used in outputs.
    functions :
        Vectorized callables ``(r, θ, ε) -> array`` for every entry of
        `MAP_PARTIALS`.
    periodic_in_r :
        Whether F(r + 2π, θ) = F(r, θ). Required by mode locking and
        rotation numbers.
    offset :
        Constant ω₀ added to r by every step.
    derivative_bound :
        User-supplied bound k_F of F and its derivatives. When missing
        `k_f` falls back to a sampled estimate.
    params :
        The parameters the map was built from.
    """

    name: str
    functions: Mapping[str, MapFunction]
    periodic_in_r: bool
    offset: float = 0.0
    derivative_bound: float | None = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        missing = [which for which in MAP_PARTIALS if which not in self.functions]
        if missing:
            raise MapDefinitionError(f"Map '{self.name}' is missing the partials {missing}")
        wrapped = {which: _broadcast(self.functions[which]) for which in MAP_PARTIALS}
        object.__setattr__(self, "functions", wrapped)

    def partial(self, which: str) -> MapFunction:
        try:
            return self.functions[which]
        except KeyError:
            raise ValueError(f"Unknown partial '{which}', expected one of {MAP_PARTIALS}") from None

    def evaluate(self, r: ArrayLike, theta: ArrayLike, eps: float) -> np.ndarray:
        return self.functions["F"](r, theta, eps)

    __call__ = evaluate

    @cached_property
    def k_f(self) -> float:
        if self.derivative_bound is not None:
            return self.derivative_bound
        return estimate_derivative_bound(self)

    def with_drift(self, omega1: float) -> ForcedMap:
        """The map with forcing ω₁ + F."""
        forcing = self.functions["F"]

        def shifted(r: Any, theta: Any, eps: float) -> np.ndarray:
            return forcing(r, theta, eps) + omega1

        functions = dict(self.functions)
        functions["F"] = shifted
        params = dict(self.params)
        params["drift"] = params.get("drift", 0.0) + omega1
        return replace(self, functions=functions, params=params, derivative_bound=None)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "periodic_in_r": self.periodic_in_r,
            "offset": self.offset,
        }


def _check_periodicity(functions: Mapping[str, MapFunction], name: str) -> bool:
    rng = np.random.default_rng(0)
    r = rng.uniform(-10, 10, 64)
    theta = rng.uniform(0, TWO_PI, 64)
    eps = 0.1
    forcing = _broadcast(functions["F"])
    values = forcing(r, theta, eps)
    shifted = forcing(r + TWO_PI, theta, eps)
    periodic = bool(np.all(np.abs(shifted - values) <= 1e-10 * (1 + np.abs(values))))
    logger.debug(f"Map '{name}' periodic in r: {periodic}")
    return periodic


def builtin_arnold(omega: float, k: float, b: float) -> ForcedMap:
    """Raw forced Arnold map r₁ = r + ω + k sin r + b sin θ (use ε = 1)."""

    return ForcedMap(
        name="arnold",
        functions={
            "F": lambda r, t, e: omega + k * np.sin(r) + b * np.sin(t),
            "F_r": lambda r, t, e: k * np.cos(r),
            "F_theta": lambda r, t, e: b * np.cos(t),
            "F_rr": lambda r, t, e: -k * np.sin(r),
            "F_thetar": lambda r, t, e: 0.0,
        },
        periodic_in_r=True,
        derivative_bound=abs(omega) + abs(k) + abs(b),
        params={"omega": omega, "k": k, "b": b},
    )


def builtin_arnold_scaled(omega0: float, omega1: float, b: float) -> ForcedMap:
    """Arnold map with k = ε, ω = ω₀ + εω₁ and forcing amplitude εb.

    The step is r₁ = r + ω₀ + ε(ω₁ + sin r + b sin θ).
    """
    return ForcedMap(
        name="arnold_scaled",
        functions={
            "F": lambda r, t, e: omega1 + np.sin(r) + b * np.sin(t),
            "F_r": lambda r, t, e: np.cos(r),
            "F_theta": lambda r, t, e: b * np.cos(t),
            "F_rr": lambda r, t, e: -np.sin(r),
            "F_thetar": lambda r, t, e: 0.0,
        },
        periodic_in_r=True,
        offset=omega0,
        derivative_bound=abs(omega1) + 1 + abs(b),
        params={"omega0": omega0, "omega1": omega1, "b": b},
    )


def transformed_amplitude(b0: float, alpha: Frequency | float) -> float:
    """A = b₀ / (2 sin πα), the amplitude of the conjugating function G₀."""
    return b0 / (2 * math.sin(math.pi * _alpha_value(alpha)))


def builtin_transformed_arnold(omega1: float, b0: float, b1: float, alpha: Frequency | float) -> ForcedMap:
    """Arnold map after removing the order-one forcing b₀ sin θ.

    F(r, θ) = ω₁ + sin(r + G₀(θ)) + b₁ sin θ with
    G₀(θ) = -A cos(θ - πα), which solves G₀(θ + 2πα) - G₀(θ) = b₀ sin θ.
    """
    alpha_value = _alpha_value(alpha)
    amplitude = transformed_amplitude(b0, alpha_value)
    phase = math.pi * alpha_value

    def g0(t: np.ndarray) -> np.ndarray:
        return -amplitude * np.cos(t - phase)

    def g0_prime(t: np.ndarray) -> np.ndarray:
        return amplitude * np.sin(t - phase)

    return ForcedMap(
        name="transformed",
        functions={
            "F": lambda r, t, e: omega1 + np.sin(r + g0(t)) + b1 * np.sin(t),
            "F_r": lambda r, t, e: np.cos(r + g0(t)),
            "F_theta": lambda r, t, e: np.cos(r + g0(t)) * g0_prime(t) + b1 * np.cos(t),
            "F_rr": lambda r, t, e: -np.sin(r + g0(t)),
            "F_thetar": lambda r, t, e: -np.sin(r + g0(t)) * g0_prime(t),
        },
        periodic_in_r=True,
        derivative_bound=abs(omega1) + (1 + abs(amplitude)) ** 3 + abs(b1),
        params={"omega1": omega1, "b0": b0, "b1": b1, "alpha": alpha_value, "amplitude": amplitude},
    )


def builtin_linear_test(g: PeriodicFunction) -> ForcedMap:
    """F(r, θ) = -r + g(θ), with translated curves in closed form."""
    g_prime = g.derivative()

    return ForcedMap(
        name="linear",
        functions={
            "F": lambda r, t, e: -r + g.evaluate(t),
            "F_r": lambda r, t, e: -1.0,
            "F_theta": lambda r, t, e: g_prime.evaluate(t),
            "F_rr": lambda r, t, e: 0.0,
            "F_thetar": lambda r, t, e: 0.0,
        },
        periodic_in_r=False,
        derivative_bound=None,
        params={"g_modes": g.n_modes},
    )


def builtin_rational_counterexample(q: int) -> ForcedMap:
    """F(r, θ) = (1 + sin² r) sin qθ, without translated curves at α = p/q."""
    if q < 1:
        raise MapDefinitionError(f"q must be a positive integer, received {q}")

    return ForcedMap(
        name="rationalq",
        functions={
            "F": lambda r, t, e: (1 + np.sin(r) ** 2) * np.sin(q * t),
            "F_r": lambda r, t, e: np.sin(2 * r) * np.sin(q * t),
            "F_theta": lambda r, t, e: q * (1 + np.sin(r) ** 2) * np.cos(q * t),
            "F_rr": lambda r, t, e: 2 * np.cos(2 * r) * np.sin(q * t),
            "F_thetar": lambda r, t, e: q * np.sin(2 * r) * np.cos(q * t),
        },
        periodic_in_r=True,
        derivative_bound=2.0 * q * q,
        params={"q": q},
    )


def builtin_expression(
    text: str,
    params: Mapping[str, float] | None = None,
    periodic_in_r: bool | None = None,
) -> ForcedMap:
    """A map whose forcing is given as an expression in r, θ and ε.

    Periodicity in r is detected by sampling when not declared, and a
    declared periodicity is checked the same way.
    """
    functions = compile_forcing(text, params)
    detected = _check_periodicity(functions, text)
    if periodic_in_r is None:
        periodic_in_r = detected
    elif periodic_in_r and not detected:
        raise MapDefinitionError(f"Forcing '{text}' was declared periodic in r but is not")
    return ForcedMap(
        name="expr",
        functions=functions,
        periodic_in_r=periodic_in_r,
        params={"F": text, **dict(params or {})},
    )


def step(forced_map: ForcedMap, eps: float, alpha: Frequency | float, point: CylinderPoint) -> CylinderPoint:
    """Image of ``point`` under the skew map."""
    r_next = point.r + forced_map.offset + eps * float(forced_map(point.r, point.theta, eps))
    turns = (point.theta / TWO_PI + _alpha_value(alpha)) % 1.0
    return CylinderPoint(r_next, TWO_PI * turns)


def inverse_step(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency | float,
    point: CylinderPoint,
    tol: float = 1e-14,
    max_iter: int = 50,
) -> CylinderPoint:
    """Preimage of ``point``; r is recovered by Newton's method."""
    turns = (point.theta / TWO_PI - _alpha_value(alpha)) % 1.0
    theta = TWO_PI * turns
    forcing = forced_map.partial("F")
    forcing_r = forced_map.partial("F_r")

    def residual(r: float) -> float:
        return r + forced_map.offset + eps * float(forcing(r, theta, eps)) - point.r

    def slope(r: float) -> float:
        return 1 + eps * float(forcing_r(r, theta, eps))

    guess = point.r - forced_map.offset - eps * float(forcing(point.r, theta, eps))
    try:
        r = optimize.newton(residual, guess, fprime=slope, tol=tol, maxiter=max_iter)
    except RuntimeError as err:
        raise MapPreconditionError(f"Could not invert the map at {point}: {err}") from None
    return CylinderPoint(float(r), theta)


def check_partials(
    forced_map: ForcedMap,
    eps: float = 0.1,
    rng: np.random.Generator | None = None,
    n_points: int = 64,
    step_size: float = 1e-5,
) -> dict[str, float]:
    """Compare the analytic partials with central differences.

    Returns the largest error of each partial, scaled by 1 + |value|.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    r = rng.uniform(-np.pi, np.pi, n_points)
    theta = rng.uniform(0, TWO_PI, n_points)
    h = step_size
    f = forced_map.partial("F")
    f_r = forced_map.partial("F_r")
    checks = {
        "F_r": (f_r(r, theta, eps), (f(r + h, theta, eps) - f(r - h, theta, eps)) / (2 * h)),
        "F_theta": (
            forced_map.partial("F_theta")(r, theta, eps),
            (f(r, theta + h, eps) - f(r, theta - h, eps)) / (2 * h),
        ),
        "F_rr": (
            forced_map.partial("F_rr")(r, theta, eps),
            (f_r(r + h, theta, eps) - f_r(r - h, theta, eps)) / (2 * h),
        ),
        "F_thetar": (
            forced_map.partial("F_thetar")(r, theta, eps),
            (f_r(r, theta + h, eps) - f_r(r, theta - h, eps)) / (2 * h),
        ),
    }
    return {
        which: float(np.max(np.abs(analytic - numeric) / (1 + np.abs(analytic))))
        for which, (analytic, numeric) in checks.items()
    }


def estimate_derivative_bound(
    forced_map: ForcedMap, eps: float = 0.0, r_span: tuple[float, float] = (-np.pi, np.pi), samples: int = 64
) -> float:
    """Largest sampled magnitude of F and its available partials."""
    r, theta = np.meshgrid(np.linspace(*r_span, samples), np.linspace(0, TWO_PI, samples, endpoint=False))
    return float(max(np.max(np.abs(forced_map.partial(which)(r, theta, eps))) for which in MAP_PARTIALS))
