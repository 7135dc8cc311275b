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

"""The bifurcation function Φ(c) = mean_θ F(ψ_c(θ), θ; ε) and its zeros.

Translated curves with Φ(c) = 0 are invariant. Their stability is given
by the sign of the normal Lyapunov exponent χ⁺, and for a family
ω₁ + F the values of ω₁ with invariant curves form the mode-locking
interval [-max Φ, -min Φ].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np
from scipy import optimize, special

from .curves import CurveOptions, TranslatedCurve, dpsi_dc, solve_curves, translated_curve
from .dynamics import chi_plus
from .errors import ConvergenceFailure
from .maps import MapPreconditionError, transformed_amplitude
from .periodic import GRID_FACTOR, grid

if TYPE_CHECKING:
    from .arithmetic import Frequency
    from .maps import ForcedMap
    from .worker import WorkerPool

__all__ = [
    "BifurcationReport",
    "InvariantCurve",
    "LockedInterval",
    "ModeLockInterval",
    "PhiMismatchError",
    "RootOptions",
    "find_invariant_curves",
    "intervals_IN",
    "mode_lock_interval",
    "phi",
    "phi0",
    "phi0_prime",
    "phi0_roots",
    "phi0_transformed_arnold",
    "phi_of_curve",
    "phi_prime",
]

logger = logging.getLogger("qpf.cylinder.bifurcation")

PHI_TOLERANCE = 1e-8

MapFamily = Callable[[float], "ForcedMap"]


class PhiMismatchError(ConvergenceFailure):
    """Φ by quadrature disagrees with the translation -(λ + ω₀)/ε."""

    pass


@dataclass(kw_only=True)
class RootOptions:
    """Tunables of the root search.

    Attributes
    ----------
    samples_per_period :
        Density of the initial Φ samples, per 2π of c.
    tol_root :
        Target |Φ(c*)| after the Newton polish.
    tol_c :
        Bracket width of the bisection.
    tol_zero_factor :
        χ⁺ within ±tol_zero_factor·ε counts as degenerate.
    curve :
        Options of every translated-curve solve.
    """

    samples_per_period: int = 512
    tol_root: float = 1e-10
    tol_c: float = 1e-12
    tol_zero_factor: float = 1e-3
    newton_steps: int = 8
    curve: CurveOptions = field(default_factory=CurveOptions)


def phi_of_curve(curve: TranslatedCurve, forced_map: ForcedMap) -> float:
    """Φ by grid quadrature of F along the curve, checked against λ."""
    eps = curve.epsilon
    size = GRID_FACTOR * curve.n_modes
    theta = grid(size)
    value = float(np.mean(forced_map(curve.psi.sample(size), theta, eps)))
    if eps > 0:
        from_translation = -(curve.lam + forced_map.offset) / eps
        if abs(value - from_translation) > PHI_TOLERANCE * (1 + abs(value)):
            raise PhiMismatchError(
                f"Φ = {value:.12g} disagrees with -(λ + ω₀)/ε = {from_translation:.12g} at c = {curve.c}"
            )
    return value


def phi(
    forced_map: ForcedMap, eps: float, alpha: Frequency, c: float, options: CurveOptions | None = None
) -> float:
    """The bifurcation function Φ(c) at perturbation size ε."""
    return phi_of_curve(translated_curve(forced_map, eps, alpha, c, options), forced_map)


def phi0(forced_map: ForcedMap, c: float, samples: int = 256) -> float:
    """Φ₀(c) = mean_θ F(c, θ; 0), the ε → 0 limit of Φ."""
    theta = grid(samples)
    return float(np.mean(forced_map(c, theta, 0.0)))


def phi0_prime(forced_map: ForcedMap, c: float, samples: int = 256) -> float:
    """Φ₀'(c) = mean_θ F_r(c, θ; 0)."""
    theta = grid(samples)
    return float(np.mean(forced_map.partial("F_r")(c, theta, 0.0)))


def phi0_transformed_arnold(c: float, omega1: float, b0: float, alpha: Frequency | float) -> float:
    """Closed form Φ₀(c) = ω₁ + J₀(A) sin c of the transformed Arnold map."""
    return omega1 + float(special.j0(transformed_amplitude(b0, alpha))) * math.sin(c)


def phi0_roots(
    forced_map: ForcedMap, c_range: tuple[float, float], samples: int = 512
) -> list[tuple[float, str]]:
    """Simple zeros of Φ₀ with the stability they predict for small ε.

    A zero with Φ₀' < 0 continues to an attracting invariant curve, one
    with Φ₀' > 0 to a repelling one.
    """
    c_values = np.linspace(*c_range, samples + 1)
    values = np.array([phi0(forced_map, c) for c in c_values])
    roots = []
    for lower, upper, f_lower, f_upper in zip(c_values[:-1], c_values[1:], values[:-1], values[1:]):
        if f_lower * f_upper < 0:
            root = optimize.brentq(lambda c: phi0(forced_map, c), lower, upper, xtol=1e-14)
            slope = phi0_prime(forced_map, root)
            roots.append((float(root), "attractor" if slope < 0 else "repeller"))
    return roots


def phi_prime(curve: TranslatedCurve, forced_map: ForcedMap, alpha: Frequency) -> float:
    """Φ'(c) = mean_θ F_r(ψ_c, θ; ε) δ(θ) with δ = ∂ψ_c/∂c."""
    delta = dpsi_dc(curve, forced_map, alpha)
    size = GRID_FACTOR * curve.n_modes
    theta = grid(size)
    f_r = forced_map.partial("F_r")(curve.psi.sample(size), theta, curve.epsilon)
    return float(np.mean(f_r * delta.sample(size)))


@dataclass(frozen=True, eq=False)
class InvariantCurve:
    """A zero of Φ, its invariant curve and its stability.

    ``polished`` is False when Newton's method did not reach ``tol_root``
    and the bisection result was kept instead.
    """

    c: float
    phi: float
    phi_prime: float
    chi_plus: float
    kind: str
    curve: TranslatedCurve
    polished: bool = True

    def summary(self) -> dict:
        return {
            "c": self.c,
            "phi": self.phi,
            "phi_prime": self.phi_prime,
            "chi_plus": self.chi_plus,
            "kind": self.kind,
            "lambda": self.curve.lam,
            "residual_sup": self.curve.residual_sup,
            "polished": self.polished,
        }


@dataclass(frozen=True, eq=False)
class BifurcationReport:
    """Invariant curves found in a range of c, with the Φ samples."""

    epsilon: float
    c_range: tuple[float, float]
    roots: tuple[InvariantCurve, ...]
    c_samples: np.ndarray
    phi_samples: np.ndarray

    @property
    def attractors(self) -> list[InvariantCurve]:
        return [root for root in self.roots if root.kind == "attractor"]

    @property
    def repellers(self) -> list[InvariantCurve]:
        return [root for root in self.roots if root.kind == "repeller"]

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "c_range": list(self.c_range),
            "roots": [root.summary() for root in self.roots],
        }


def _invariance_defect(curve: TranslatedCurve, forced_map: ForcedMap) -> float:
    # λ = -εΦ - ω₀ vanishes where Φ = -ω₀/ε
    value = phi_of_curve(curve, forced_map)
    if curve.epsilon > 0:
        value += forced_map.offset / curve.epsilon
    return value


def _sample_defect(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c_values: np.ndarray,
    options: RootOptions,
    pool: WorkerPool | None,
) -> np.ndarray:
    curves = solve_curves(forced_map, eps, alpha, c_values, options.curve, pool)
    return np.array([_invariance_defect(curve, forced_map) for curve in curves])


def _polish(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c: float,
    bracket: tuple[float, float],
    options: RootOptions,
) -> tuple[float, bool]:
    """Newton steps with Φ' that stay inside the bracket."""
    for _ in range(options.newton_steps):
        curve = translated_curve(forced_map, eps, alpha, c, options.curve)
        value = _invariance_defect(curve, forced_map)
        if abs(value) <= options.tol_root:
            return c, True
        slope = phi_prime(curve, forced_map, alpha)
        if slope == 0:
            break
        candidate = c - value / slope
        if not bracket[0] <= candidate <= bracket[1]:
            break
        c = candidate
    logger.warning(f"Newton polish did not reach tol_root near c = {c:.12g}; keeping the bisection root")
    return c, False


def _classify(
    forced_map: ForcedMap, eps: float, alpha: Frequency, c: float, polished: bool, options: RootOptions
) -> InvariantCurve:
    curve = translated_curve(forced_map, eps, alpha, c, options.curve)
    value = _invariance_defect(curve, forced_map)
    if abs(curve.lam) > max(eps, 1.0) * options.tol_root:
        logger.warning(f"Curve at c = {c:.12g} has translation λ = {curve.lam:.3e}")
    exponent = chi_plus(curve, forced_map)
    tol_zero = options.tol_zero_factor * eps
    if exponent < -tol_zero:
        kind = "attractor"
    elif exponent > tol_zero:
        kind = "repeller"
    else:
        kind = "degenerate"
    return InvariantCurve(
        c=c,
        phi=value,
        phi_prime=phi_prime(curve, forced_map, alpha),
        chi_plus=exponent,
        kind=kind if polished else "degenerate",
        curve=curve,
        polished=polished,
    )


def find_invariant_curves(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c_range: tuple[float, float],
    options: RootOptions | None = None,
    pool: WorkerPool | None = None,
) -> BifurcationReport:
    """Locate the invariant curves with mean in ``c_range`` and classify them.

    Invariant curves are the zeros of Φ (of Φ + ω₀/ε for maps with an
    offset). Φ is sampled, sign changes are bisected to width ``tol_c``
    and polished with Newton's method. Local minima of |Φ| that are small
    compared to the sampled variation of Φ are refined as possible
    tangential zeros.
    """
    options = options or RootOptions()
    lower, upper = float(c_range[0]), float(c_range[1])
    if not lower < upper:
        raise ValueError(f"Empty range of c: {c_range}")
    count = max(16, math.ceil(options.samples_per_period * (upper - lower) / (2 * np.pi)))
    c_values = np.linspace(lower, upper, count + 1)
    logger.sweep(f"Sampling Φ at {count + 1} values of c in [{lower}, {upper}] at ε = {eps}")
    values = _sample_defect(forced_map, eps, alpha, c_values, options, pool)

    def defect(c: float) -> float:
        return _invariance_defect(translated_curve(forced_map, eps, alpha, c, options.curve), forced_map)

    candidates: list[tuple[float, bool]] = [
        (float(c), True) for c, value in zip(c_values, values) if value == 0
    ]
    for index in range(count):
        if values[index] * values[index + 1] < 0:
            bracket = (float(c_values[index]), float(c_values[index + 1]))
            root = optimize.bisect(defect, *bracket, xtol=options.tol_c)
            candidates.append(_polish(forced_map, eps, alpha, root, bracket, options))

    variation = float(np.max(np.abs(np.diff(values))))
    magnitude = np.abs(values)
    for index in range(1, count):
        if values[index] == 0 or values[index - 1] * values[index + 1] <= 0:
            continue
        if magnitude[index] <= magnitude[index - 1] and magnitude[index] <= magnitude[index + 1]:
            if magnitude[index] > variation:
                continue
            result = optimize.minimize_scalar(
                lambda c: abs(defect(c)),
                bounds=(float(c_values[index - 1]), float(c_values[index + 1])),
                method="bounded",
                options={"xatol": options.tol_c},
            )
            if result.fun <= options.tol_root:
                candidates.append((float(result.x), True))

    roots: list[tuple[float, bool]] = []
    for c, polished in sorted(candidates):
        if not roots or c - roots[-1][0] > 10 * options.tol_c:
            roots.append((c, polished))
    classified = tuple(_classify(forced_map, eps, alpha, c, polished, options) for c, polished in roots)
    logger.sweep(f"Found {len(classified)} invariant curves at ε = {eps}")
    return BifurcationReport(
        epsilon=eps, c_range=(lower, upper), roots=classified, c_samples=c_values, phi_samples=values
    )


@dataclass(frozen=True, eq=False)
class ModeLockInterval:
    """Values of the drift ω₁ for which ω₁ + F has invariant curves.

    Attributes
    ----------
    omega_lower, omega_upper :
        -max Φ and -min Φ of the undrifted map.
    c_at_max, c_at_min :
        Where Φ attains them.
    midpoint :
        Invariant curves of the family at the interval midpoint, searched
        over one period starting at ``c_at_max``.
    """

    epsilon: float
    omega_lower: float
    omega_upper: float
    c_at_max: float
    c_at_min: float
    c_samples: np.ndarray
    phi_samples: np.ndarray
    midpoint: BifurcationReport | None

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "omega_lower": self.omega_lower,
            "omega_upper": self.omega_upper,
            "c_at_max": self.c_at_max,
            "c_at_min": self.c_at_min,
            "midpoint": None if self.midpoint is None else self.midpoint.summary(),
        }


def _refine_extremum(func: Callable[[float], float], centre: float, width: float) -> tuple[float, float]:
    result = optimize.minimize_scalar(func, bounds=(centre - width, centre + width), method="bounded")
    return float(result.x), float(result.fun)


def mode_lock_interval(
    family: MapFamily,
    eps: float,
    alpha: Frequency,
    options: RootOptions | None = None,
    pool: WorkerPool | None = None,
    check_midpoint: bool = True,
) -> ModeLockInterval:
    """The mode-locking interval of the family ω₁ ↦ ω₁ + F.

    ``family(ω₁)`` must return the map with forcing ω₁ + F(0), so that
    all members share their translated curves.

    Raises
    ------
    MapPreconditionError
        If F is not 2π-periodic in r.
    """
    options = options or RootOptions()
    base = family(0.0)
    if not base.periodic_in_r:
        raise MapPreconditionError(f"Map '{base.name}' is not periodic in r; Φ has no period")
    count = options.samples_per_period
    c_values = grid(count)
    values = _sample_defect(base, eps, alpha, c_values, options, pool)
    width = 2 * np.pi / count

    def bifurcation_function(c: float) -> float:
        return _invariance_defect(translated_curve(base, eps, alpha, c, options.curve), base)

    c_max, neg_max = _refine_extremum(
        lambda c: -bifurcation_function(c), float(c_values[np.argmax(values)]), width
    )
    c_min, phi_min = _refine_extremum(bifurcation_function, float(c_values[np.argmin(values)]), width)
    phi_max = max(-neg_max, float(values.max()))
    phi_min = min(phi_min, float(values.min()))
    omega_lower, omega_upper = -phi_max, -phi_min
    logger.info(f"Mode-locking interval at ε = {eps}: [{omega_lower:.10g}, {omega_upper:.10g}]")

    midpoint = None
    if check_midpoint:
        middle = 0.5 * (omega_lower + omega_upper)
        period = (c_max, c_max + 2 * np.pi)
        midpoint = find_invariant_curves(family(middle), eps, alpha, period, options, pool)
        if len(midpoint.roots) < 2:
            logger.warning(f"Only {len(midpoint.roots)} invariant curves found at the interval midpoint")
    return ModeLockInterval(
        epsilon=eps,
        omega_lower=omega_lower,
        omega_upper=omega_upper,
        c_at_max=c_max,
        c_at_min=c_min,
        c_samples=c_values,
        phi_samples=values,
        midpoint=midpoint,
    )


@dataclass(frozen=True)
class LockedInterval:
    """I_N: drifts ω₁ with an invariant curve of translation 2πN, or None."""

    n: int
    lower: float | None
    upper: float | None

    @property
    def empty(self) -> bool:
        return self.lower is None


def intervals_IN(  # NOQA: N802
    family: MapFamily,
    eps: float,
    alpha: Frequency,
    n_range: Sequence[int],
    options: RootOptions | None = None,
    omega_window: tuple[float, float] = (-np.pi, np.pi),
    pool: WorkerPool | None = None,
    interval: ModeLockInterval | None = None,
) -> list[LockedInterval]:
    """Intervals I_N for every N of ``n_range``, clipped to ``omega_window``.

    A curve translated by λ = 2πN satisfies Φ(c) + ω₁ + 2πN/ε = 0, so
    I_N = I_0 - 2πN/ε. At ε = 0 only N = 0 is possible.
    """
    if interval is None:
        interval = mode_lock_interval(family, eps, alpha, options, pool, check_midpoint=False)
    window_lower, window_upper = omega_window
    intervals = []
    for n in n_range:
        if eps == 0:
            shift = 0.0 if n == 0 else None
        else:
            shift = 2 * np.pi * n / eps
        if shift is None:
            intervals.append(LockedInterval(n, None, None))
            continue
        lower = max(interval.omega_lower - shift, window_lower)
        upper = min(interval.omega_upper - shift, window_upper)
        if lower > upper:
            intervals.append(LockedInterval(n, None, None))
        else:
            intervals.append(LockedInterval(n, float(lower), float(upper)))

    occupied = sorted((item.lower, item.upper) for item in intervals if not item.empty)
    for (_, first_upper), (second_lower, _) in zip(occupied[:-1], occupied[1:]):
        if second_lower <= first_upper:
            logger.warning("Mode-locking intervals I_N overlap")
    return intervals
