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

"""Cohomological and linear difference equations over a circle rotation.

Two equations are solved spectrally:

- the constant-coefficient equation G(θ + 2πα) - G(θ) = p(θ);
- the linear equation φ(θ + 2πα) - a(θ) φ(θ) = p(θ) + ν with a > 0,
  reduced to the constant-coefficient case by writing
  a(θ) = λ_a b(θ + 2πα) / b(θ).

A dense collocation solver of the second equation serves as an oracle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Literal, Sequence

import numpy as np
from scipy import linalg

from .arithmetic import Frequency, ResonanceError
from .errors import PreconditionFailure
from .maps import CylinderPoint
from .periodic import GRID_FACTOR, PeriodicFunction, grid

if TYPE_CHECKING:
    from .maps import ForcedMap

__all__ = [
    "AveragingConjugacy",
    "CohomologySolution",
    "LinDEPreconditionError",
    "LinDESolution",
    "NearResonanceError",
    "averaged_map_defect",
    "averaging_conjugacy",
    "nu_obstruction",
    "solve_constant",
    "solve_linde",
    "solve_linde_dense",
]

logger = logging.getLogger("qpf.cylinder.cohomology")

ResonancePolicy = Literal["raise", "drop"]
# Largest accepted mean of the right-hand side, relative to Σ|p̂_n|.
MEAN_TOLERANCE = 1e-12


class NearResonanceError(ResonanceError):
    """A small divisor fell below the divisor floor."""

    def __init__(self, message: str, mode: int):
        super().__init__(message)
        self.mode = mode


class LinDEPreconditionError(PreconditionFailure):
    """The coefficient of a linear difference equation is not positive."""

    pass


@dataclass(frozen=True, eq=False)
class CohomologySolution:
    """Solution of G(θ + 2πα) - G(θ) = p(θ).

    ``solvable`` is False when p has a nonzero mean; ``G`` then solves the
    equation for p minus its mean and ``obstruction`` holds the mean.
    """

    G: PeriodicFunction
    solvable: bool
    obstruction: float
    divisor_floor_hit: bool = False


@dataclass(frozen=True, eq=False)
class LinDESolution:
    """Solution (φ, ν) of φ(θ + 2πα) - a(θ)φ(θ) = p(θ) + ν with mean φ = 0.

    Attributes
    ----------
    phi :
        The zero-mean solution.
    nu :
        The constant making the equation solvable.
    residual_sup :
        Sup of the equation residual on a grid twice as fine as the
        solver grid.
    divisor_floor_hit :
        Whether a divisor fell below the floor and its mode was dropped.
    gain :
        ‖φ‖_{L²} / ‖Dp‖_{L²}, an empirical constant of the norm estimate.
    """

    phi: PeriodicFunction
    nu: float
    residual_sup: float
    divisor_floor_hit: bool
    gain: float


def _check_divisors(
    divisors: np.ndarray, modes: np.ndarray, floor: float, policy: ResonancePolicy, alpha: Frequency
) -> np.ndarray:
    """Mask of modes whose divisor is below ``floor``."""
    small = (modes != 0) & (np.abs(divisors) < floor)
    if small.any() and policy == "raise":
        mode = int(modes[small][np.argmin(np.abs(modes[small]))])
        raise NearResonanceError(
            f"Divisor of mode {mode} is {abs(divisors[modes == mode][0]):.3e}, below the floor {floor:.3e} "
            f"for rotation number {alpha}",
            mode,
        )
    return small


def solve_constant(
    p: PeriodicFunction, alpha: Frequency, *, on_resonance: ResonancePolicy = "raise"
) -> CohomologySolution:
    """Solve G(θ + 2πα) - G(θ) = p(θ) for the zero-mean G.

    Parameters
    ----------
    p :
        Right-hand side. Solvable only if its mean vanishes.
    alpha :
        Rotation number.
    on_resonance :
        ``raise`` rejects rational rotation numbers and divisors below
        ``alpha.divisor_floor(N)``; ``drop`` zeroes those modes instead.
    """
    if alpha.is_rational and on_resonance == "raise":
        raise ResonanceError(f"Rotation number {alpha} is rational; the equation is resonant")
    mean = p.mean()
    solvable = abs(mean) <= MEAN_TOLERANCE * max(1.0, p.sup_norm_bound())
    modes = p.modes
    divisors = alpha.divisors(modes)
    dropped = _check_divisors(divisors, modes, alpha.divisor_floor(p.n_modes), on_resonance, alpha)
    keep = (modes != 0) & ~dropped
    coeffs = np.zeros_like(p.coeffs)
    coeffs[keep] = p.coeffs[keep] / divisors[keep]
    if not solvable:
        logger.debug(f"Cohomological equation unsolvable, mean of right-hand side is {mean:.3e}")
    return CohomologySolution(
        G=PeriodicFunction(coeffs), solvable=solvable, obstruction=mean, divisor_floor_hit=bool(dropped.any())
    )


def linde_residual(
    phi: PeriodicFunction,
    a: PeriodicFunction,
    p: PeriodicFunction,
    nu: float,
    alpha: Frequency | float,
    size: int,
) -> float:
    """Sup over a grid of |φ(θ + 2πα) - a φ - p - ν|."""
    values = phi.shift(alpha).sample(size) - a.sample(size) * phi.sample(size) - p.sample(size) - nu
    return float(np.max(np.abs(values)))


def solve_linde(
    a: PeriodicFunction,
    p: PeriodicFunction,
    alpha: Frequency,
    *,
    grid_factor: int = GRID_FACTOR,
    on_resonance: ResonancePolicy = "raise",
) -> LinDESolution:
    """Solve φ(θ + 2πα) - a(θ) φ(θ) = p(θ) + ν with mean φ = 0.

    ``log a`` is split into its mean log λ_a and a coboundary
    v(θ + 2πα) - v(θ), so that with b = e^v the substitution φ = bψ turns
    the equation into ψ(θ + 2πα) - λ_a ψ(θ) = (p + ν)/b(θ + 2πα), which
    is diagonal in Fourier space.

    Raises
    ------
    LinDEPreconditionError
        If a is not positive on the grid.
    NearResonanceError
        If a divisor falls below the floor and ``on_resonance='raise'``.
    """
    n_modes = max(a.n_modes, p.n_modes)
    a = a.resize(n_modes)
    p = p.resize(n_modes)
    size = grid_factor * n_modes

    a_values = a.sample(size)
    if not np.all(a_values > 0):
        raise LinDEPreconditionError(f"Coefficient a must be positive, its minimum is {a_values.min():.3e}")
    log_a = PeriodicFunction.from_samples(np.log(a_values), n_modes)
    mean_log = log_a.mean()
    lambda_a = float(np.exp(mean_log))
    reduction = solve_constant(log_a - mean_log, alpha, on_resonance=on_resonance)
    v = reduction.G

    b_values = np.exp(v.sample(size))
    u_values = np.exp(-v.shift(alpha).sample(size))
    u = PeriodicFunction.from_samples(u_values, n_modes)
    q = PeriodicFunction.from_samples(p.sample(size) * u_values, n_modes)

    modes = u.modes
    divisors = np.exp(2j * np.pi * np.mod(modes * alpha.alpha, 1.0)) - lambda_a
    dropped = _check_divisors(divisors, modes, alpha.divisor_floor(n_modes), on_resonance, alpha)
    keep = (modes != 0) & ~dropped

    psi_p = np.zeros_like(q.coeffs)
    psi_p[keep] = q.coeffs[keep] / divisors[keep]
    psi_1 = np.zeros_like(u.coeffs)
    psi_1[keep] = u.coeffs[keep] / divisors[keep]
    psi_p_values = PeriodicFunction(psi_p).sample(size)
    psi_1_values = PeriodicFunction(psi_1).sample(size)

    # Unknowns ν and ψ̂_0 from the n = 0 equation ψ̂_0 (1 - λ_a) = q̂_0 + ν û_0
    # and the normalisation mean(bψ) = 0, without dividing by 1 - λ_a.
    b_mean = b_values.mean()
    weighted_p = np.mean(b_values * psi_p_values)
    weighted_1 = np.mean(b_values * psi_1_values)
    d0 = 1 - lambda_a
    nu = -(q.mean() + d0 * weighted_p / b_mean) / (u.mean() + d0 * weighted_1 / b_mean)
    psi_0 = -(weighted_p + nu * weighted_1) / b_mean

    phi_values = b_values * (psi_p_values + nu * psi_1_values + psi_0)
    phi_coeffs = PeriodicFunction.from_samples(phi_values, n_modes).coeffs.copy()
    phi_coeffs[n_modes] = 0
    phi = PeriodicFunction(phi_coeffs)

    residual = linde_residual(phi, a, p, nu, alpha, 2 * size)
    dp_norm = p.sobolev_norm(1)
    gain = phi.sobolev_norm(0) / dp_norm if dp_norm > 0 else 0.0
    floor_hit = bool(dropped.any()) or reduction.divisor_floor_hit
    logger.solver(f"solve_linde N={n_modes} λ_a={lambda_a:.6g} ν={nu:.6g} residual={residual:.3e}")
    return LinDESolution(phi=phi, nu=float(nu), residual_sup=residual, divisor_floor_hit=floor_hit, gain=gain)


def nu_obstruction(a: PeriodicFunction, p: PeriodicFunction, alpha: Frequency) -> float:
    """Weighted mean (1/2π)∫ p(θ) / b(θ + 2πα) dθ.

    When a = b(θ + 2πα)/b(θ) is a multiplicative coboundary (mean log a
    = 0), the equation φ(θ + 2πα) - aφ = p is solvable with ν = 0 only if
    this mean vanishes. The weight b is normalised to mean one.
    """
    n_modes = max(a.n_modes, p.n_modes)
    size = GRID_FACTOR * n_modes
    log_a = PeriodicFunction.from_samples(np.log(a.resize(n_modes).sample(size)), n_modes)
    if abs(log_a.mean()) > 1e-10:
        logger.warning(f"Mean of log a is {log_a.mean():.3e}; a is not a coboundary and ν is not forced")
    v = solve_constant(log_a - log_a.mean(), alpha).G
    b_values = np.exp(v.sample(size))
    weights = np.exp(-v.shift(alpha).sample(size)) * b_values.mean()
    return float(np.mean(p.resize(n_modes).sample(size) * weights))


def _shift_matrix(size: int, n_modes: int, alpha: float) -> np.ndarray:
    """Trigonometric interpolation of the shift θ ↦ θ + 2πα on a grid."""
    theta = grid(size)
    modes = np.arange(-n_modes, n_modes + 1)
    evaluate = np.exp(1j * np.outer(theta + 2 * np.pi * alpha, modes))
    analyse = np.exp(-1j * np.outer(modes, theta)) / size
    return (evaluate @ analyse).real


def solve_linde_dense(
    a: PeriodicFunction, p: PeriodicFunction, alpha: Frequency, grid_size: int
) -> LinDESolution:
    """Collocation oracle for `solve_linde`.

    The M grid values of φ and ν are the unknowns; the shift is applied
    through trigonometric interpolation and the last row imposes mean
    zero. Grids with M < 2N+1 are accepted but alias, which shows up in
    ``residual_sup``.
    """
    n_modes = max(a.n_modes, p.n_modes)
    if grid_size < 2 * n_modes + 1:
        logger.warning(f"Dense grid of {grid_size} points under-resolves {n_modes} modes")
    interp_modes = (grid_size - 1) // 2
    shift = _shift_matrix(grid_size, interp_modes, alpha.alpha)

    system = np.zeros((grid_size + 1, grid_size + 1))
    system[:grid_size, :grid_size] = shift - np.diag(a.sample(grid_size))
    system[:grid_size, grid_size] = -1.0
    system[grid_size, :grid_size] = 1.0 / grid_size
    rhs = np.zeros(grid_size + 1)
    rhs[:grid_size] = p.sample(grid_size)
    solution = linalg.solve(system, rhs)

    phi = PeriodicFunction.from_samples(solution[:grid_size], interp_modes)
    nu = float(solution[grid_size])
    fine_size = 2 * GRID_FACTOR * max(n_modes, interp_modes)
    residual = linde_residual(phi, a, p, nu, alpha, fine_size)
    dp_norm = p.sobolev_norm(1)
    gain = phi.sobolev_norm(0) / dp_norm if dp_norm > 0 else 0.0
    return LinDESolution(phi=phi, nu=nu, residual_sup=residual, divisor_floor_hit=False, gain=gain)


@dataclass(frozen=True, eq=False)
class AveragingConjugacy:
    """H(r_i, ·) and the averaged forcing F̄(r_i) on a grid of r values."""

    r_grid: np.ndarray
    H: tuple[PeriodicFunction, ...]
    F_bar: np.ndarray


def _conjugacy_at(forced_map: ForcedMap, eps: float, alpha: Frequency, r: float, n_modes: int):
    forcing = PeriodicFunction.from_function(lambda t: forced_map(r, t, eps), n_modes)
    f_bar = forcing.mean()
    solution = solve_constant(-(forcing - f_bar), alpha)
    return solution.G, f_bar


def averaging_conjugacy(
    forced_map: ForcedMap, eps: float, alpha: Frequency, r_grid: Sequence[float], n_modes: int = 64
) -> AveragingConjugacy:
    """Solve H(r, θ + 2πα) - H(r, θ) = -F̃(r, θ) for each r of the grid.

    F̃ is the θ-oscillating part of F and F̄ its θ-average. In the
    variable ρ = r + εH(r, θ) the map becomes ρ₁ = ρ + εF̄(ρ) + O(ε²).
    """
    r_values = np.asarray(r_grid, dtype=float)
    conjugacies = [_conjugacy_at(forced_map, eps, alpha, float(r), n_modes) for r in r_values]
    return AveragingConjugacy(
        r_grid=r_values,
        H=tuple(h for h, _ in conjugacies),
        F_bar=np.array([f_bar for _, f_bar in conjugacies]),
    )


def averaged_map_defect(
    forced_map: ForcedMap, eps: float, alpha: Frequency, points: Sequence[CylinderPoint], n_modes: int = 64
) -> np.ndarray:
    """One-step defect |ρ₁ - ρ - εF̄(ρ)| in the averaged variable ρ."""
    defects = []
    for point in points:
        r_next = point.r + forced_map.offset + eps * float(forced_map(point.r, point.theta, eps))
        theta_next = point.theta + 2 * np.pi * alpha.alpha
        h, _ = _conjugacy_at(forced_map, eps, alpha, point.r, n_modes)
        h_next, _ = _conjugacy_at(forced_map, eps, alpha, r_next, n_modes)
        rho = point.r + eps * h.evaluate(point.theta)
        rho_next = r_next + eps * h_next.evaluate(theta_next)
        _, f_bar = _conjugacy_at(forced_map, eps, alpha, rho, n_modes)
        defects.append(abs(rho_next - rho - forced_map.offset - eps * f_bar))
    return np.array(defects)
