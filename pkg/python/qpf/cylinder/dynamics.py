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

"""Cocycles, Birkhoff averages, rotation numbers and orbits."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import PreconditionFailure
from .maps import CylinderPoint, MapPreconditionError, inverse_step, step
from .periodic import GRID_FACTOR, grid

if TYPE_CHECKING:
    from .arithmetic import Frequency
    from .curves import TranslatedCurve
    from .maps import ForcedMap
    from .periodic import PeriodicFunction

__all__ = [
    "AttractionProfile",
    "BirkhoffRate",
    "CocycleError",
    "CocycleProduct",
    "OrbitEscapeError",
    "RotationNumber",
    "birkhoff_rate",
    "chi_plus",
    "default_n_values",
    "fibred_rotation_number",
    "local_attraction",
    "lyapunov",
    "orbit_sample",
]

logger = logging.getLogger("qpf.cylinder.dynamics")

ESCAPE_RADIUS = 1e12
TWO_PI = 2 * np.pi


class CocycleError(PreconditionFailure):
    """The cocycle is not positive or the curve is not invariant."""

    pass


class OrbitEscapeError(PreconditionFailure):
    """An orbit left |r| ≤ `ESCAPE_RADIUS`."""

    pass


def default_n_values(n_max: int) -> np.ndarray:
    """Roughly log-spaced orbit lengths from 1 to ``n_max``."""
    return np.unique(np.geomspace(1, n_max, num=60).astype(int))


def orbit_angles(alpha: Frequency, theta0: float, n: int) -> np.ndarray:
    """θ_k = θ₀ + 2πkα reduced modulo 2π, k = 0..n-1."""
    return TWO_PI * np.mod(theta0 / TWO_PI + np.arange(n) * alpha.alpha, 1.0)


def _cocycle(curve: TranslatedCurve, forced_map: ForcedMap, theta: np.ndarray) -> np.ndarray:
    eps = curve.epsilon
    values = 1 + eps * forced_map.partial("F_r")(curve.psi.evaluate(theta), theta, eps)
    if np.any(values <= 0):
        raise CocycleError(f"Cocycle 1 + εF_r∘ψ is not positive (minimum {values.min():.3e})")
    return values


def chi_plus(curve: TranslatedCurve, forced_map: ForcedMap) -> float:
    """χ⁺ = (1/2π)∫ log(1 + εF_r(ψ(θ), θ; ε)) dθ by grid quadrature."""
    eps = curve.epsilon
    size = GRID_FACTOR * curve.n_modes
    theta = grid(size)
    values = 1 + eps * forced_map.partial("F_r")(curve.psi.sample(size), theta, eps)
    if np.any(values <= 0):
        raise CocycleError(f"Cocycle 1 + εF_r∘ψ is not positive (minimum {values.min():.3e})")
    return float(np.mean(np.log(values)))


def _check_invariant(curve: TranslatedCurve, tol: float) -> None:
    wrapped = curve.lam - TWO_PI * round(curve.lam / TWO_PI)
    if abs(wrapped) > tol:
        raise CocycleError(f"Curve with c = {curve.c} is not invariant: λ = {curve.lam:.3e}")


@dataclass(frozen=True, eq=False)
class CocycleProduct:
    """(1/n) log Π_{k<n} a(θ₀ + 2πkα) for several n, against the integral χ⁺.

    ``rate_constant`` is max_n n|average_n - χ⁺|, which stays bounded for
    constant-type rotation numbers.
    """

    theta0: float
    n_values: np.ndarray
    averages: np.ndarray
    chi_plus: float
    rate_constant: float

    def summary(self) -> dict:
        return {"theta0": self.theta0, "chi_plus": self.chi_plus, "rate_constant": self.rate_constant}


def lyapunov(
    curve: TranslatedCurve,
    forced_map: ForcedMap,
    alpha: Frequency,
    n_max: int = 10_000,
    theta0: float = 0.0,
    n_values: Sequence[int] | None = None,
    invariance_tol: float = 1e-8,
) -> CocycleProduct:
    """Normal Lyapunov exponent of an invariant curve.

    The finite products are accumulated as sums of logarithms.

    Raises
    ------
    CocycleError
        If the curve is not invariant or the cocycle is not positive.
    """
    _check_invariant(curve, invariance_tol)
    n_list = default_n_values(n_max) if n_values is None else np.asarray(n_values, dtype=int)
    theta = orbit_angles(alpha, theta0, int(n_list.max()))
    sums = np.cumsum(np.log(_cocycle(curve, forced_map, theta)))
    averages = sums[n_list - 1] / n_list
    integral = chi_plus(curve, forced_map)
    rate = float(np.max(n_list * np.abs(averages - integral)))
    logger.info(f"χ⁺ = {integral:.10g} at c = {curve.c}, rate constant {rate:.4g}")
    return CocycleProduct(
        theta0=theta0, n_values=n_list, averages=averages, chi_plus=integral, rate_constant=rate
    )


@dataclass(frozen=True, eq=False)
class BirkhoffRate:
    """Birkhoff averages of f along a rotation orbit.

    Attributes
    ----------
    scaled_errors :
        n|average_n - f̂_0| for every n.
    bound_max :
        Largest scaled error.
    proof_bound :
        2μ Σ|f̂_m||m|, which bounds every scaled error when α has constant
        type; infinite otherwise.
    """

    n_values: np.ndarray
    averages: np.ndarray
    scaled_errors: np.ndarray
    bound_max: float
    proof_bound: float


def birkhoff_rate(
    f: PeriodicFunction, alpha: Frequency, theta0: float = 0.0, n_values: Sequence[int] | None = None
) -> BirkhoffRate:
    """Convergence rate of (1/n) Σ_{k<n} f(θ₀ + 2πkα) to the mean of f."""
    n_list = default_n_values(100_000) if n_values is None else np.asarray(n_values, dtype=int)
    theta = orbit_angles(alpha, theta0, int(n_list.max()))
    sums = np.cumsum(f.evaluate(theta))
    averages = sums[n_list - 1] / n_list
    scaled = n_list * np.abs(averages - f.mean())
    if alpha.is_rational:
        logger.info(f"Rotation number {alpha} is rational; averages lock to the orbit mean")
    proof_bound = 2 * alpha.mu * float(np.sum(np.abs(f.coeffs) * np.abs(f.modes)))
    return BirkhoffRate(
        n_values=n_list,
        averages=averages,
        scaled_errors=scaled,
        bound_max=float(scaled.max()),
        proof_bound=proof_bound,
    )


def _orbit(
    forced_map: ForcedMap, eps: float, alpha: Frequency, x0: CylinderPoint, n: int, inverse: bool = False
) -> list[CylinderPoint]:
    points = [x0]
    point = x0
    for _ in range(n):
        advance = inverse_step if inverse else step
        point = advance(forced_map, eps, alpha, point)
        if not abs(point.r) <= ESCAPE_RADIUS:
            raise OrbitEscapeError(f"Orbit from {x0} escaped to r = {point.r:.3e}")
        points.append(point)
    return points


def orbit_sample(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    x0: CylinderPoint,
    n_transient: int,
    n_keep: int,
    inverse: bool = False,
) -> list[CylinderPoint]:
    """Iterate ``n_transient`` steps, then keep the next ``n_keep`` points.

    With ``n_transient = 0`` the first kept point is the image of x₀.
    ``inverse`` iterates the inverse map, which follows repellers.
    """
    orbit = _orbit(forced_map, eps, alpha, x0, n_transient + n_keep, inverse)
    return orbit[n_transient + 1 :]


@dataclass(frozen=True)
class RotationNumber:
    """(r_n - r₀)/n with the same quantity at 2n and a Richardson estimate."""

    rho: float
    rho_double: float
    extrapolated: float
    tail_estimate: float
    n: int


def fibred_rotation_number(
    forced_map: ForcedMap, eps: float, alpha: Frequency, x0: CylinderPoint, n: int = 10_000
) -> RotationNumber:
    """Fibred rotation number of the lift, from orbits of length n and 2n.

    Raises
    ------
    MapPreconditionError
        If F is not 2π-periodic in r.
    """
    if not forced_map.periodic_in_r:
        raise MapPreconditionError(f"Map '{forced_map.name}' is not periodic in r; no rotation number")
    orbit = _orbit(forced_map, eps, alpha, x0, 2 * n)
    rho = (orbit[n].r - x0.r) / n
    rho_double = (orbit[2 * n].r - x0.r) / (2 * n)
    return RotationNumber(
        rho=rho,
        rho_double=rho_double,
        extrapolated=2 * rho_double - rho,
        tail_estimate=abs(rho_double - rho),
        n=n,
    )


@dataclass(frozen=True, eq=False)
class AttractionProfile:
    """Distances |r_k - ψ(θ_k)| of an orbit started near an invariant curve,
    and K_emp = max_k |z_k| / (e^{kχ⁺}|z₀|).
    """

    distances: np.ndarray
    chi_plus: float
    k_emp: float


def local_attraction(
    curve: TranslatedCurve,
    forced_map: ForcedMap,
    alpha: Frequency,
    offset: float = 0.01,
    n: int = 200,
    theta0: float = 0.0,
    invariance_tol: float = 1e-8,
) -> AttractionProfile:
    """Follow the orbit of (ψ(θ₀) + offset, θ₀) and compare with e^{nχ⁺}."""
    if abs(curve.lam) > invariance_tol:
        raise CocycleError(f"Curve with c = {curve.c} is not invariant: λ = {curve.lam:.3e}")
    x0 = CylinderPoint(float(curve.psi.evaluate(theta0)) + offset, theta0)
    orbit = _orbit(forced_map, curve.epsilon, alpha, x0, n)
    r = np.array([point.r for point in orbit])
    theta = np.array([point.theta for point in orbit])
    distances = np.abs(r - curve.psi.evaluate(theta))
    exponent = chi_plus(curve, forced_map)
    k_emp = float(np.max(distances / (np.exp(np.arange(n + 1) * exponent) * distances[0])))
    return AttractionProfile(distances=distances, chi_plus=exponent, k_emp=k_emp)
