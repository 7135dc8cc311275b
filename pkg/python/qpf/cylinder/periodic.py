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

"""Real 2π-periodic functions stored as truncated Fourier series."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping

import numpy as np
from numpy.typing import ArrayLike

from .errors import PreconditionFailure

if TYPE_CHECKING:
    from .arithmetic import Frequency
    from .maps import ForcedMap

__all__ = [
    "DEFAULT_MODES",
    "GRID_FACTOR",
    "InvalidGridError",
    "NonIntegrableError",
    "PeriodicFunction",
    "compose_map_partial",
    "grid",
    "product",
]

logger = logging.getLogger("qpf.cylinder.periodic")

# Default truncation order of every spectral computation.
DEFAULT_MODES = 256
# Nonlinear operations are evaluated on a grid of GRID_FACTOR * N points.
GRID_FACTOR = 4
# Rows of the evaluation matrix built at once in `PeriodicFunction.evaluate`.
_EVAL_CHUNK = 2048


class InvalidGridError(PreconditionFailure):
    """A sample grid is too coarse for the requested truncation."""

    pass


class NonIntegrableError(PreconditionFailure):
    """A function with nonzero mean has no periodic primitive."""

    pass


def grid(size: int) -> np.ndarray:
    """The uniform grid θ_j = 2πj/size, j = 0..size-1."""
    return 2 * np.pi * np.arange(size) / size


def _shift_amount(alpha: Frequency | float) -> float:
    return float(getattr(alpha, "alpha", alpha))


@dataclass(frozen=True, eq=False)
class PeriodicFunction:
    """A real 2π-periodic function Σ_{|n|≤N} û_n e^{inθ}.

    Attributes
    ----------
    coeffs :
        Complex coefficients of length ``2N+1``; entry ``k`` holds the
        mode ``n = k - N``. Hermitian symmetry ``û_{-n} = conj(û_n)`` is
        enforced on construction, so every instance is real valued.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex)
        if coeffs.ndim != 1 or coeffs.size % 2 == 0:
            raise ValueError(f"Expected an odd number of coefficients, received shape {coeffs.shape}")
        coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    # Constructors

    @classmethod
    def zeros(cls, n_modes: int = DEFAULT_MODES) -> PeriodicFunction:
        return cls(np.zeros(2 * n_modes + 1, dtype=complex))

    @classmethod
    def constant(cls, value: float, n_modes: int = DEFAULT_MODES) -> PeriodicFunction:
        coeffs = np.zeros(2 * n_modes + 1, dtype=complex)
        coeffs[n_modes] = value
        return cls(coeffs)

    @classmethod
    def from_modes(cls, modes: Mapping[int, complex], n_modes: int = DEFAULT_MODES) -> PeriodicFunction:
        """Build a function from ``{n: û_n}``.

        Only non-negative modes need to be given; the negative ones are
        completed by conjugation. When both ``n`` and ``-n`` are listed
        they must be conjugate.
        """
        coeffs = np.zeros(2 * n_modes + 1, dtype=complex)
        for n, value in modes.items():
            if abs(n) > n_modes:
                raise ValueError(f"Mode {n} exceeds the truncation order {n_modes}")
            coeffs[n + n_modes] = value
            if -n not in modes:
                coeffs[-n + n_modes] = np.conj(value)
        return cls(coeffs)

    @classmethod
    def from_trig(
        cls,
        n_modes: int = DEFAULT_MODES,
        constant: float = 0.0,
        cos: Mapping[int, float] | None = None,
        sin: Mapping[int, float] | None = None,
    ) -> PeriodicFunction:
        """Build ``constant + Σ a_n cos nθ + Σ b_n sin nθ``."""
        coeffs = np.zeros(2 * n_modes + 1, dtype=complex)
        coeffs[n_modes] = constant
        for n, a in (cos or {}).items():
            coeffs[n_modes + n] += a / 2
            coeffs[n_modes - n] += a / 2
        for n, b in (sin or {}).items():
            coeffs[n_modes + n] += -0.5j * b
            coeffs[n_modes - n] += 0.5j * b
        return cls(coeffs)

    @classmethod
    def from_samples(cls, values: ArrayLike, n_modes: int | None = None) -> PeriodicFunction:
        """Interpolate values on the uniform grid of ``len(values)`` points.

        Parameters
        ----------
        values :
            Real samples ``f(2πj/M)``, ``j = 0..M-1``.
        n_modes :
            Truncation order N. Defaults to the largest order the grid
            resolves, ``(M-1)//2``.
        """
        samples = np.asarray(values, dtype=float)
        size = samples.size
        if samples.ndim != 1 or size < 2:
            raise InvalidGridError(f"Need at least two samples on a one dimensional grid: {samples.shape}")
        if n_modes is None:
            n_modes = (size - 1) // 2
        if size < 2 * n_modes + 1:
            raise InvalidGridError(f"A grid of {size} points cannot resolve {n_modes} modes")
        spectrum = np.fft.rfft(samples) / size
        positive = spectrum[: n_modes + 1].copy()
        positive[0] = positive[0].real
        coeffs = np.concatenate([np.conj(positive[:0:-1]), positive])
        return cls(coeffs)

    @classmethod
    def from_function(cls, func: Any, n_modes: int = DEFAULT_MODES, grid_factor: int = GRID_FACTOR):
        """Sample a vectorized callable of θ on a ``grid_factor*N`` grid."""
        theta = grid(grid_factor * n_modes)
        return cls.from_samples(np.broadcast_to(func(theta), theta.shape), n_modes)

    # Basic properties

    @property
    def n_modes(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_modes, self.n_modes + 1)

    def coefficient(self, n: int) -> complex:
        if abs(n) > self.n_modes:
            return 0j
        return complex(self.coeffs[n + self.n_modes])

    def mean(self) -> float:
        return float(self.coeffs[self.n_modes].real)

    def resize(self, n_modes: int) -> PeriodicFunction:
        """Zero-pad or truncate to order ``n_modes``."""
        if n_modes == self.n_modes:
            return self
        coeffs = np.zeros(2 * n_modes + 1, dtype=complex)
        keep = min(n_modes, self.n_modes)
        source = self.coeffs[self.n_modes - keep : self.n_modes + keep + 1]
        coeffs[n_modes - keep : n_modes + keep + 1] = source
        return PeriodicFunction(coeffs)

    # Evaluation

    def evaluate(self, theta: ArrayLike) -> np.ndarray | float:
        """Evaluate at arbitrary angles.

        The real form ``û_0 + 2 Re Σ_{n>0} û_n e^{inθ}`` is summed, so no
        imaginary residue can appear.
        """
        theta_arr = np.asarray(theta, dtype=float)
        flat = theta_arr.ravel()
        mean = self.coeffs[self.n_modes].real
        positive = self.coeffs[self.n_modes + 1 :]
        n = np.arange(1, self.n_modes + 1)
        result = np.empty(flat.size)
        for start in range(0, flat.size, _EVAL_CHUNK):
            chunk = flat[start : start + _EVAL_CHUNK]
            phases = np.exp(1j * np.outer(chunk, n))
            result[start : start + _EVAL_CHUNK] = mean + 2 * (phases @ positive).real
        if theta_arr.ndim == 0:
            return float(result[0])
        return result.reshape(theta_arr.shape)

    def __call__(self, theta: ArrayLike) -> np.ndarray | float:
        return self.evaluate(theta)

    def sample(self, size: int) -> np.ndarray:
        """Values on the uniform grid of ``size`` points.

        When ``size < 2N+1`` the modes fold onto the grid (aliasing).
        """
        folded = np.zeros(size, dtype=complex)
        np.add.at(folded, self.modes % size, self.coeffs)
        return np.fft.ifft(folded).real * size

    # Linear operations

    def derivative(self) -> PeriodicFunction:
        return PeriodicFunction(self.coeffs * 1j * self.modes)

    def zero_mean_primitive(self, tol: float = 1e-12) -> PeriodicFunction:
        """The unique primitive with zero mean.

        Raises
        ------
        NonIntegrableError
            If the mean of the function exceeds ``tol``.
        """
        if abs(self.coeffs[self.n_modes]) > tol:
            raise NonIntegrableError(f"Function has mean {self.mean():.3e}; no periodic primitive exists")
        n = self.modes
        coeffs = np.zeros_like(self.coeffs)
        nonzero = n != 0
        coeffs[nonzero] = self.coeffs[nonzero] / (1j * n[nonzero])
        return PeriodicFunction(coeffs)

    def shift(self, alpha: Frequency | float) -> PeriodicFunction:
        """The function θ ↦ f(θ + 2πα)."""
        turns = _shift_amount(alpha) % 1.0
        return PeriodicFunction(self.coeffs * np.exp(2j * np.pi * self.modes * turns))

    # Norms and diagnostics

    def sobolev_norm(self, order: int = 0) -> float:
        """‖D^k f‖_{L²}, with ‖D^k f‖² = 2π Σ |n|^{2k} |û_n|²."""
        if order not in (0, 1, 2):
            raise ValueError(f"Sobolev order must be 0, 1 or 2, received {order}")
        weights = np.abs(self.modes).astype(float) ** (2 * order)
        return float(np.sqrt(2 * np.pi * np.sum(weights * np.abs(self.coeffs) ** 2)))

    def sup_norm_bound(self) -> float:
        """Σ |û_n|, an upper bound of the sup norm."""
        return float(np.sum(np.abs(self.coeffs)))

    def tail_energy(self) -> float:
        """Fraction of the energy carried by modes |n| > N/2."""
        energy = np.abs(self.coeffs) ** 2
        total = energy.sum()
        if total == 0:
            return 0.0
        return float(energy[np.abs(self.modes) > self.n_modes / 2].sum() / total)

    # Arithmetic

    def _coerce(self, other: Any) -> tuple[PeriodicFunction, PeriodicFunction] | None:
        if isinstance(other, PeriodicFunction):
            n_modes = max(self.n_modes, other.n_modes)
            return self.resize(n_modes), other.resize(n_modes)
        if np.isscalar(other) and np.isreal(other):
            return self, PeriodicFunction.constant(float(other), self.n_modes)
        return None

    def __add__(self, other: Any) -> PeriodicFunction:
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return PeriodicFunction(pair[0].coeffs + pair[1].coeffs)

    __radd__ = __add__

    def __sub__(self, other: Any) -> PeriodicFunction:
        pair = self._coerce(other)
        if pair is None:
            return NotImplemented
        return PeriodicFunction(pair[0].coeffs - pair[1].coeffs)

    def __rsub__(self, other: Any) -> PeriodicFunction:
        return (-self) + other

    def __neg__(self) -> PeriodicFunction:
        return PeriodicFunction(-self.coeffs)

    def __mul__(self, other: Any) -> PeriodicFunction:
        if isinstance(other, PeriodicFunction):
            return product(self, other)
        if np.isscalar(other) and np.isreal(other):
            return PeriodicFunction(self.coeffs * float(other))
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"PeriodicFunction(N={self.n_modes}, mean={self.mean():.6g})"


def product(f: PeriodicFunction, g: PeriodicFunction, n_modes: int | None = None) -> PeriodicFunction:
    """Pointwise product truncated to ``n_modes``.

    The product is formed on a ``4N`` point grid, so it is exact whenever
    the bandwidths of ``f`` and ``g`` add up to at most ``3N``.
    """
    if n_modes is None:
        n_modes = max(f.n_modes, g.n_modes)
    size = GRID_FACTOR * n_modes
    return PeriodicFunction.from_samples(f.sample(size) * g.sample(size), n_modes)


def compose_map_partial(
    forced_map: ForcedMap,
    which: str,
    psi: PeriodicFunction,
    epsilon: float,
    grid_factor: int = GRID_FACTOR,
) -> PeriodicFunction:
    """The periodic function θ ↦ G(ψ(θ), θ; ε) for a partial G of the map.

    Parameters
    ----------
    forced_map :
        The skew map providing the partial.
    which :
        One of ``F``, ``F_r``, ``F_theta``, ``F_rr``, ``F_thetar``.
    psi :
        The curve r = ψ(θ).
    epsilon :
        Perturbation size passed through to the map.
    """
    size = grid_factor * psi.n_modes
    theta = grid(size)
    values = forced_map.partial(which)(psi.sample(size), theta, epsilon)
    return PeriodicFunction.from_samples(np.broadcast_to(values, theta.shape), psi.n_modes)
