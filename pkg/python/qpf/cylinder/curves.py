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

"""Translated curves r = ψ(θ) with ψ(θ + 2πα) = ψ(θ) + εF(ψ(θ), θ; ε) + λ.

The curve with mean c is found by iterating the linear difference
equation satisfied by Dψ:

    Dψ_{n+1}(θ + 2πα) - a_n(θ) Dψ_{n+1}(θ) = p_n(θ) + ν_n,

with a_n = 1 + εF_r∘ψ_n and p_n = εF_θ∘ψ_n, then ψ_{n+1} = c + ∫Dψ_{n+1}.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .arithmetic import Frequency
from .cohomology import ResonancePolicy, solve_linde
from .errors import ConvergenceFailure, PreconditionFailure
from .periodic import DEFAULT_MODES, GRID_FACTOR, PeriodicFunction, grid

if TYPE_CHECKING:
    from .maps import ForcedMap
    from .worker import WorkerPool

__all__ = [
    "ContinuationReport",
    "CurveConvergenceError",
    "CurveDivergenceError",
    "CurveOptions",
    "EpsilonTooLargeError",
    "FoliationSweep",
    "FoliationViolationError",
    "NotRationalError",
    "ObstructionCertificate",
    "TranslatedCurve",
    "TranslationResidualError",
    "continuation_in_eps",
    "dpsi_dc",
    "foliation_sweep",
    "functional_residual",
    "rational_obstruction",
    "translated_curve",
]

logger = logging.getLogger("qpf.cylinder.curves")

# Consecutive c-values solved in one warm-started chain by a sweep.
SWEEP_BLOCK = 8


class CurveConvergenceError(ConvergenceFailure):
    """The translated-curve iteration did not produce a curve."""

    pass


class EpsilonTooLargeError(CurveConvergenceError):
    """The coefficient a = 1 + εF_r∘ψ left its admissible interval."""

    pass


class CurveDivergenceError(CurveConvergenceError):
    """The iteration diverged or ran out of iterations."""

    def __init__(self, message: str, history: Sequence[float] = ()):
        super().__init__(message)
        self.history = tuple(history)


class TranslationResidualError(CurveConvergenceError):
    """The converged iterate does not have a constant translation."""

    pass


class FoliationViolationError(ConvergenceFailure):
    """Two curves of a sweep cross."""

    pass


class NotRationalError(PreconditionFailure):
    """The obstruction detector needs a rational rotation number."""

    pass


@dataclass(kw_only=True)
class CurveOptions:
    """Tunables of the translated-curve iteration.

    Attributes
    ----------
    modes :
        Initial truncation order N.
    tol_step :
        Relative stopping tolerance on ‖Dψ_{n+1} - Dψ_n‖.
    tol_residual :
        Largest accepted spread of the translation λ over the grid.
    max_iter :
        Iteration budget.
    a_bounds :
        Admissible range of a = 1 + εF_r∘ψ; leaving it means ε is too
        large.
    d2_ceiling :
        Largest ‖D²ψ‖ accepted before a curve is flagged as breakdown.
    adaptive :
        Double N while the tail energy exceeds ``tail_tolerance``.
    max_modes :
        Upper limit of the adaptive refinement.
    """

    modes: int = DEFAULT_MODES
    tol_step: float = 1e-11
    tol_residual: float = 1e-9
    max_iter: int = 200
    a_bounds: tuple[float, float] = (0.5, 1.5)
    d2_ceiling: float = 1.0
    adaptive: bool = True
    tail_tolerance: float = 1e-24
    max_modes: int = 2048
    grid_factor: int = GRID_FACTOR
    divergence_limit: float = 1e6


@dataclass(frozen=True, eq=False)
class TranslatedCurve:
    """A translated curve and its diagnostics.

    Attributes
    ----------
    psi :
        The curve, with mean ``c``.
    lam :
        Translation λ = mean(ψ∘R_α - ψ - ω₀ - εF(ψ, ·)).
    residual_sup :
        Sup of |ψ∘R_α - ψ - ω₀ - εF(ψ, ·) - λ| on the solver grid.
    d2_norm :
        ‖D²ψ‖_{L²}.
    converged :
        False when ``d2_norm`` exceeds the ceiling (``breakdown``).
    """

    psi: PeriodicFunction
    c: float
    epsilon: float
    lam: float
    residual_sup: float
    d2_norm: float
    iterations: int
    converged: bool
    breakdown: bool
    nu_history: tuple[float, ...] = ()
    step_history: tuple[float, ...] = ()
    divisor_floor_hit: bool = False

    @property
    def n_modes(self) -> int:
        return self.psi.n_modes

    def summary(self) -> dict:
        return {
            "c": self.c,
            "epsilon": self.epsilon,
            "lambda": self.lam,
            "residual_sup": self.residual_sup,
            "d2_norm": self.d2_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "breakdown": self.breakdown,
            "modes": self.n_modes,
            "divisor_floor_hit": self.divisor_floor_hit,
            "nu_history": list(self.nu_history),
            "step_history": list(self.step_history),
        }


@dataclass(frozen=True)
class ObstructionCertificate:
    """Angles where Σ_k F(r, θ + 2πkp/q) has a strict sign for every r.

    ``theta_positive`` maximises min_r Σ_k F and ``theta_negative``
    minimises max_r Σ_k F. Both are reported in [-π, π). A sum that is
    positive for every r at one angle and negative at another gives
    opposite signs for λ, so no translated curve exists.
    """

    p: int
    q: int
    theta_positive: float
    margin_positive: float
    theta_negative: float
    margin_negative: float

    def summary(self) -> dict:
        return {
            "p": self.p,
            "q": self.q,
            "theta_positive": self.theta_positive,
            "margin_positive": self.margin_positive,
            "theta_negative": self.theta_negative,
            "margin_negative": self.margin_negative,
        }


def _translation(
    psi: PeriodicFunction, forced_map: ForcedMap, eps: float, alpha: Frequency, size: int
) -> np.ndarray:
    theta = grid(size)
    r_values = psi.sample(size)
    forcing = forced_map(r_values, theta, eps)
    return psi.shift(alpha).sample(size) - r_values - forced_map.offset - eps * forcing


def _iterate(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c: float,
    n_modes: int,
    options: CurveOptions,
    initial: PeriodicFunction | None,
    policy: ResonancePolicy,
) -> tuple[PeriodicFunction, int, list[float], list[float], bool]:
    if initial is None:
        psi = PeriodicFunction.constant(c, n_modes)
    else:
        psi = initial.resize(n_modes) - initial.mean() + c
    dpsi_prev = psi.derivative()
    size = options.grid_factor * n_modes
    theta = grid(size)
    low, high = options.a_bounds
    f_r = forced_map.partial("F_r")
    f_theta = forced_map.partial("F_theta")
    nus: list[float] = []
    steps: list[float] = []
    floor_hit = False

    for iteration in range(1, options.max_iter + 1):
        r_values = psi.sample(size)
        a_values = 1 + eps * f_r(r_values, theta, eps)
        if a_values.min() < low or a_values.max() > high:
            raise EpsilonTooLargeError(
                f"a = 1 + εF_r∘ψ spans [{a_values.min():.4f}, {a_values.max():.4f}], outside "
                f"[{low}, {high}] at ε = {eps}, c = {c}"
            )
        a = PeriodicFunction.from_samples(a_values, n_modes)
        p = PeriodicFunction.from_samples(eps * f_theta(r_values, theta, eps), n_modes)
        solution = solve_linde(a, p, alpha, grid_factor=options.grid_factor, on_resonance=policy)
        floor_hit = floor_hit or solution.divisor_floor_hit
        dpsi = solution.phi
        step = (dpsi - dpsi_prev).sobolev_norm(0)
        nus.append(solution.nu)
        steps.append(step)
        logger.solver(f"c={c:.6g} ε={eps:.6g} iteration {iteration}: step={step:.3e} ν={solution.nu:.3e}")

        if not np.isfinite(step) or step > options.divergence_limit:
            raise CurveDivergenceError(f"Iteration diverged at step {iteration} (ε = {eps}, c = {c})", steps)
        psi = dpsi.zero_mean_primitive() + c
        if step <= options.tol_step * (1 + dpsi.sobolev_norm(0)):
            return psi, iteration, nus, steps, floor_hit
        dpsi_prev = dpsi

    raise CurveDivergenceError(
        f"No convergence after {options.max_iter} iterations "
        f"(ε = {eps}, c = {c}, last step {steps[-1]:.3e})",
        steps,
    )


def translated_curve(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c: float,
    options: CurveOptions | None = None,
    initial: PeriodicFunction | None = None,
) -> TranslatedCurve:
    """Compute the translated curve with mean ``c``.

    Parameters
    ----------
    forced_map :
        The map.
    eps :
        Perturbation size.
    alpha :
        Rotation number. At rational α the obstruction detector runs first
        and the iteration is attempted with resonant modes dropped; any
        certificate turns the result into a convergence failure.
    c :
        Mean of the curve.
    options :
        Iteration tunables.
    initial :
        Warm start; only its oscillating part is used.

    Raises
    ------
    CurveConvergenceError
        If a leaves its bounds, the iteration diverges, or the translation
        is not constant.
    """
    options = options or CurveOptions()
    policy: ResonancePolicy = "raise"
    certificate = None
    if alpha.is_rational:
        certificate = rational_obstruction(forced_map, eps, alpha)
        policy = "drop"
        logger.warning(f"Rotation number {alpha} is rational; iterating with resonant modes dropped")

    n_modes = options.modes
    while True:
        psi, iterations, nus, steps, floor_hit = _iterate(
            forced_map, eps, alpha, c, n_modes, options, initial, policy
        )
        resolved = psi.tail_energy() <= options.tail_tolerance
        if not options.adaptive or resolved or 2 * n_modes > options.max_modes:
            break
        n_modes *= 2
        initial = psi
        logger.solver(f"Tail energy {psi.tail_energy():.3e} too large, refining to N = {n_modes}")

    if certificate is not None:
        raise CurveConvergenceError(
            f"No translated curve exists at rotation number {alpha}: obstruction certificate "
            f"{certificate.summary()}"
        )

    size = options.grid_factor * n_modes
    residual = _translation(psi, forced_map, eps, alpha, size)
    lam = float(np.mean(residual))
    spread = float(residual.max() - residual.min())
    if spread > options.tol_residual:
        raise TranslationResidualError(
            f"Translation is not constant: spread {spread:.3e} exceeds {options.tol_residual:.1e} "
            f"(ε = {eps}, c = {c})"
        )

    d2_norm = psi.sobolev_norm(2)
    breakdown = d2_norm > options.d2_ceiling
    if breakdown:
        logger.warning(f"‖D²ψ‖ = {d2_norm:.4g} exceeds {options.d2_ceiling} at ε = {eps}, c = {c}")
    return TranslatedCurve(
        psi=psi,
        c=c,
        epsilon=eps,
        lam=lam,
        residual_sup=float(np.max(np.abs(residual - lam))),
        d2_norm=d2_norm,
        iterations=iterations,
        converged=not breakdown,
        breakdown=breakdown,
        nu_history=tuple(nus),
        step_history=tuple(steps),
        divisor_floor_hit=floor_hit,
    )


def functional_residual(curve: TranslatedCurve, forced_map: ForcedMap, alpha: Frequency, size: int) -> float:
    """Sup over ``size`` points of |ψ∘R_α - ψ - ω₀ - εF(ψ, ·) - λ|."""
    residual = _translation(curve.psi, forced_map, curve.epsilon, alpha, size)
    return float(np.max(np.abs(residual - curve.lam)))


def dpsi_dc(curve: TranslatedCurve, forced_map: ForcedMap, alpha: Frequency) -> PeriodicFunction:
    """δ = ∂ψ_c/∂c, the solution of δ∘R_α - (1 + εF_r∘ψ)δ = ν with mean 1."""
    if not curve.converged:
        raise CurveConvergenceError(
            f"Curve at c = {curve.c} did not converge (‖D²ψ‖ = {curve.d2_norm:.4g}); ∂ψ/∂c is undefined"
        )
    n_modes = curve.n_modes
    size = GRID_FACTOR * n_modes
    eps = curve.epsilon
    f_r = forced_map.partial("F_r")(curve.psi.sample(size), grid(size), eps)
    a = PeriodicFunction.from_samples(1 + eps * f_r, n_modes)
    p = PeriodicFunction.from_samples(eps * f_r, n_modes)
    delta = solve_linde(a, p, alpha).phi + 1.0
    logger.debug(f"‖Dδ‖ = {delta.sobolev_norm(1):.4e} at c = {curve.c}")
    return delta


@dataclass(frozen=True, eq=False)
class FoliationSweep:
    """Curves of a sweep in increasing c with the empirical Lipschitz constant
    K_emp = max ‖Dψ_{c'} - Dψ_c‖ / (ε|c' - c|) over neighbours.
    """

    curves: tuple[TranslatedCurve, ...]
    lipschitz: float
    ordered: bool = True


def _solve_block(
    forced_map: ForcedMap, eps: float, alpha: Frequency, block: Sequence[float], options: CurveOptions
) -> list[TranslatedCurve]:
    curves = []
    initial = None
    for c in block:
        curve = translated_curve(forced_map, eps, alpha, c, options, initial=initial)
        curves.append(curve)
        initial = curve.psi
    return curves


def solve_curves(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c_values: Sequence[float],
    options: CurveOptions | None = None,
    pool: WorkerPool | None = None,
) -> list[TranslatedCurve]:
    """Curves for every c, warm-started in blocks of `SWEEP_BLOCK` values.

    The blocks are fixed by the input order alone, so the result does not
    depend on the pool.
    """
    options = options or CurveOptions()
    values = [float(c) for c in c_values]
    blocks = [values[start : start + SWEEP_BLOCK] for start in range(0, len(values), SWEEP_BLOCK)]

    def solve(block: Sequence[float]) -> list[TranslatedCurve]:
        return _solve_block(forced_map, eps, alpha, block, options)

    results = pool.map(solve, blocks) if pool is not None else [solve(block) for block in blocks]
    return [curve for block in results for curve in block]


def foliation_sweep(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    c_values: Sequence[float],
    options: CurveOptions | None = None,
    pool: WorkerPool | None = None,
) -> FoliationSweep:
    """Translated curves for many c, checked to be strictly ordered.

    Raises
    ------
    FoliationViolationError
        If two neighbouring curves touch or cross.
    """
    ordered_c = sorted(float(c) for c in c_values)
    if len(set(ordered_c)) != len(ordered_c):
        raise ValueError("Sweep values of c must be distinct")
    logger.sweep(f"Sweeping {len(ordered_c)} curves at ε = {eps}")
    curves = solve_curves(forced_map, eps, alpha, ordered_c, options, pool)

    n_modes = max(curve.n_modes for curve in curves)
    size = GRID_FACTOR * n_modes
    lipschitz = 0.0
    for lower, upper in zip(curves[:-1], curves[1:]):
        gap = upper.psi.resize(n_modes).sample(size) - lower.psi.resize(n_modes).sample(size)
        if gap.min() <= 0:
            raise FoliationViolationError(
                f"Curves with c = {lower.c} and c = {upper.c} cross (minimum gap {gap.min():.3e})"
            )
        if eps > 0:
            difference = (upper.psi.resize(n_modes) - lower.psi.resize(n_modes)).sobolev_norm(1)
            lipschitz = max(lipschitz, difference / (eps * (upper.c - lower.c)))
    return FoliationSweep(curves=tuple(curves), lipschitz=lipschitz)


@dataclass(frozen=True, eq=False)
class ContinuationReport:
    """Result of following one curve along increasing ε.

    Attributes
    ----------
    curves :
        Accepted curves, one per ladder value before the breakdown.
    trace :
        ``(ε, ‖D²ψ‖)`` for every computed curve.
    breakdown_eps :
        First ε at which the curve failed, or None.
    reason :
        Why the continuation stopped.
    critical_epsilon :
        ε where a linear fit of 1/‖D²ψ‖ over the last three points of the
        trace vanishes, when the fit decreases.
    """

    curves: tuple[TranslatedCurve, ...]
    trace: tuple[tuple[float, float], ...]
    breakdown_eps: float | None
    reason: str | None
    critical_epsilon: float | None = field(default=None)


def _extrapolate_breakdown(trace: Sequence[tuple[float, float]]) -> float | None:
    points = [(eps, d2) for eps, d2 in trace if d2 > 0]
    if len(points) < 3:
        return None
    eps_values, d2_values = np.array(points[-3:]).T
    slope, intercept = np.polyfit(eps_values, 1 / d2_values, 1)
    if slope >= 0:
        return None
    return float(-intercept / slope)


def continuation_in_eps(
    forced_map: ForcedMap,
    alpha: Frequency,
    c: float,
    eps_ladder: Sequence[float],
    options: CurveOptions | None = None,
) -> ContinuationReport:
    """Follow the curve with mean ``c`` up an increasing ladder of ε.

    Each step is warm-started from the previous curve. The continuation
    stops at the first ε where the iteration fails or ‖D²ψ‖ exceeds the
    ceiling.
    """
    ladder = [float(eps) for eps in eps_ladder]
    if any(upper <= lower for lower, upper in zip(ladder[:-1], ladder[1:])):
        raise ValueError("The ε ladder must be strictly increasing")
    curves: list[TranslatedCurve] = []
    trace: list[tuple[float, float]] = []
    breakdown_eps = None
    reason = None
    initial = None
    for eps in ladder:
        try:
            curve = translated_curve(forced_map, eps, alpha, c, options, initial=initial)
        except CurveConvergenceError as err:
            breakdown_eps, reason = eps, str(err)
            logger.sweep(f"Continuation stopped at ε = {eps}: {err}")
            break
        trace.append((eps, curve.d2_norm))
        logger.sweep(f"ε = {eps:.6g}: ‖D²ψ‖ = {curve.d2_norm:.6g} after {curve.iterations} iterations")
        if curve.breakdown:
            breakdown_eps, reason = eps, f"‖D²ψ‖ = {curve.d2_norm:.6g} exceeds the ceiling"
            break
        curves.append(curve)
        initial = curve.psi
    return ContinuationReport(
        curves=tuple(curves),
        trace=tuple(trace),
        breakdown_eps=breakdown_eps,
        reason=reason,
        critical_epsilon=_extrapolate_breakdown(trace),
    )


def _closest_to_zero(theta: np.ndarray, candidates: np.ndarray) -> float:
    signed = (theta[candidates] + np.pi) % (2 * np.pi) - np.pi
    return float(signed[np.argmin(np.abs(signed))])


def rational_obstruction(
    forced_map: ForcedMap,
    eps: float,
    alpha: Frequency,
    r_samples: np.ndarray | None = None,
    theta_samples: int | None = None,
) -> ObstructionCertificate | None:
    """Search for two angles where Σ_{k<q} F(r, θ + 2πkp/q; ε) is positive
    for every sampled r at one and negative at the other, which rules out
    translated curves at α = p/q. A single signed angle is inconclusive.

    Ties between angles are broken towards θ = 0.

    Raises
    ------
    NotRationalError
        If α is not rational.
    """
    if not alpha.is_rational:
        raise NotRationalError(f"Rotation number {alpha} is not rational")
    assert alpha.p is not None and alpha.q is not None
    p, q = alpha.p, alpha.q
    if r_samples is None:
        if forced_map.periodic_in_r:
            r_samples = np.linspace(0, 2 * np.pi, 256, endpoint=False)
        else:
            r_samples = np.linspace(-10, 10, 401)
    theta = grid(theta_samples or 64 * q)
    r_grid, theta_grid = np.meshgrid(np.asarray(r_samples, dtype=float), theta, indexing="ij")
    sums = sum(forced_map(r_grid, theta_grid + 2 * np.pi * k * p / q, eps) for k in range(q))
    lower = sums.min(axis=0)
    upper = sums.max(axis=0)
    tol = 1e-10 * q * (1 + np.max(np.abs(sums)))

    best_positive = float(lower.max())
    best_negative = float(upper.min())
    if best_positive <= tol or best_negative >= -tol:
        one_sided = best_positive > tol or best_negative < -tol
        logger.info(f"{'One-sided' if one_sided else 'No'} sign condition at rotation number {alpha}")
        return None
    theta_positive = _closest_to_zero(theta, lower >= best_positive - 1e-12 * (1 + abs(best_positive)))
    theta_negative = _closest_to_zero(theta, upper <= best_negative + 1e-12 * (1 + abs(best_negative)))
    return ObstructionCertificate(p, q, theta_positive, best_positive, theta_negative, best_negative)
