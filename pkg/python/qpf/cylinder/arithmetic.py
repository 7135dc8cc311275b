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

"""Rotation numbers, continued fractions and small-divisor bounds."""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import PreconditionFailure

__all__ = [
    "ContinuedFraction",
    "Frequency",
    "FrequencyKind",
    "FrequencyParsingError",
    "ResonanceError",
    "continued_fraction",
    "divisor_bound",
    "parse_frequency",
]

logger = logging.getLogger("qpf.cylinder.arithmetic")

# A partial quotient larger than this marks a number as effectively rational.
QUOTIENT_LIMIT = 10**12
# Largest denominator accepted when a float is recognised as rational.
RATIONAL_DENOMINATOR_LIMIT = 10**6
# Convergents with larger denominators are not trusted for empirical bounds.
EMPIRICAL_DENOMINATOR_LIMIT = 10**8
DIVISOR_FLOOR = 1e-12
_RATIONAL_PATTERN = re.compile(r"^\s*(\d+)\s*/\s*(\d+)\s*$")


class FrequencyParsingError(PreconditionFailure):
    """A rotation number could not be interpreted."""

    pass


class ResonanceError(PreconditionFailure):
    """A small divisor vanishes because the rotation number is rational."""

    pass


class FrequencyKind(Enum):
    QUADRATIC = "exact-quadratic"
    FLOAT = "float"
    RATIONAL = "rational"


@dataclass(frozen=True)
class ContinuedFraction:
    """Continued fraction expansion [a0; a1, a2, ...].

    Attributes
    ----------
    a0 :
        Integer part.
    quotients :
        Partial quotients a1, a2, ...
    convergents :
        ``(p_k, q_k)`` for each partial quotient.
    terminated :
        True if the expansion ended before the requested depth, either
        exactly or because the next quotient exceeded `QUOTIENT_LIMIT`.
    """

    a0: int
    quotients: tuple[int, ...]
    convergents: tuple[tuple[int, int], ...]
    terminated: bool


def continued_fraction(x: float, depth: int) -> ContinuedFraction:
    """Expand ``x`` to at most ``depth`` partial quotients.

    The float is expanded exactly as the binary rational it represents,
    so e.g. ``1/3`` gives ``[0; 3]``.
    """
    if depth < 1:
        raise ValueError(f"Continued fraction depth must be positive, received {depth}")
    if not math.isfinite(x):
        raise FrequencyParsingError(f"Cannot expand non-finite value {x}")
    value = Fraction(x)
    a0 = math.floor(value)
    remainder = value - a0
    p_prev, q_prev = 1, 0
    p, q = a0, 1
    quotients: list[int] = []
    convergents: list[tuple[int, int]] = []
    terminated = False
    while len(quotients) < depth:
        if remainder == 0:
            terminated = True
            break
        value = 1 / remainder
        quotient = math.floor(value)
        if quotient > QUOTIENT_LIMIT:
            terminated = True
            break
        remainder = value - quotient
        p, p_prev = quotient * p + p_prev, p
        q, q_prev = quotient * q + q_prev, q
        quotients.append(quotient)
        convergents.append((p, q))
    return ContinuedFraction(a0, tuple(quotients), tuple(convergents), terminated)


@dataclass(frozen=True, kw_only=True)
class Frequency:
    """A rotation number α ∈ (0, 1) and its arithmetic.

    Attributes
    ----------
    alpha :
        The rotation number.
    kind :
        Exact quadratic irrational, a float, or a rational p/q.
    quotients :
        Partial quotients of the continued fraction.
    delta :
        Lower bound of q²|α - p/q| over all rationals. Exact for quadratic
        irrationals, an empirical minimum over convergents for floats, and
        zero for rationals.
    rigorous :
        Whether ``delta`` is a proven bound.
    name :
        Label used in outputs.
    """

    alpha: float
    kind: FrequencyKind
    quotients: tuple[int, ...]
    delta: float
    rigorous: bool
    name: str
    p: int | None = None
    q: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise FrequencyParsingError(f"Rotation number must lie in (0, 1), received {self.alpha}")

    @classmethod
    def golden(cls) -> Frequency:
        """(√5 - 1)/2, all partial quotients 1, inf q²|α - p/q| = 1/φ²."""
        root5 = math.sqrt(5.0)
        return cls(
            alpha=(root5 - 1) / 2,
            kind=FrequencyKind.QUADRATIC,
            quotients=(1,) * 32,
            delta=(3 - root5) / 2,
            rigorous=True,
            name="golden",
        )

    @classmethod
    def sqrt2m1(cls) -> Frequency:
        """√2 - 1, all partial quotients 2, inf q²|α - p/q| = 6 - 4√2."""
        root2 = math.sqrt(2.0)
        return cls(
            alpha=root2 - 1,
            kind=FrequencyKind.QUADRATIC,
            quotients=(2,) * 32,
            delta=6 - 4 * root2,
            rigorous=True,
            name="sqrt2m1",
        )

    @classmethod
    def rational(cls, p: int, q: int) -> Frequency:
        if q <= 0 or not 0 < p < q:
            raise FrequencyParsingError(f"Rational rotation number must satisfy 0 < p < q, received {p}/{q}")
        divisor = math.gcd(p, q)
        p, q = p // divisor, q // divisor
        expansion = continued_fraction(p / q, 64)
        return cls(
            alpha=p / q,
            kind=FrequencyKind.RATIONAL,
            quotients=expansion.quotients,
            delta=0.0,
            rigorous=True,
            name=f"{p}/{q}",
            p=p,
            q=q,
        )

    @classmethod
    def from_float(cls, x: float, depth: int = 40) -> Frequency:
        """Wrap a float, recognising floats that are rationals with small
        denominators.
        """
        expansion = continued_fraction(x, depth)
        if expansion.terminated and expansion.convergents:
            p, q = expansion.convergents[-1]
            if q <= RATIONAL_DENOMINATOR_LIMIT:
                logger.info(f"Rotation number {x!r} treated as the rational {p}/{q}")
                return cls.rational(p, q)
        ratios = [
            q * q * abs(x - p / q) for p, q in expansion.convergents if q <= EMPIRICAL_DENOMINATOR_LIMIT
        ]
        ratios = [ratio for ratio in ratios if ratio > 0]
        delta = min(ratios) if ratios else 0.0
        return cls(
            alpha=float(x),
            kind=FrequencyKind.FLOAT,
            quotients=expansion.quotients,
            delta=delta,
            rigorous=False,
            name=repr(float(x)),
        )

    @property
    def is_rational(self) -> bool:
        return self.kind is FrequencyKind.RATIONAL

    @property
    def mu(self) -> float:
        """Constant μ with |e^{2πimα} - 1| ≥ 1/(μ|m|)."""
        if self.delta <= 0:
            return math.inf
        return 1 / (4 * self.delta)

    def convergents(self) -> tuple[tuple[int, int], ...]:
        return continued_fraction(self.alpha, len(self.quotients) or 1).convergents

    def is_resonant(self, n: int | np.ndarray) -> bool | np.ndarray:
        """Whether e^{2πinα} = 1 exactly."""
        modes = np.asarray(n)
        if self.is_rational:
            resonant = modes % self.q == 0
        else:
            resonant = modes == 0
        return bool(resonant) if resonant.ndim == 0 else resonant

    def divisors(self, modes: np.ndarray) -> np.ndarray:
        """e^{2πinα} - 1 for every mode, with nα reduced modulo 1 first."""
        turns = np.mod(np.asarray(modes, dtype=float) * self.alpha, 1.0)
        values = np.exp(2j * np.pi * turns) - 1
        if self.is_rational:
            values = np.where(self.is_resonant(np.asarray(modes)), 0j, values)
        return values

    def divisor_floor(self, n_modes: int) -> float:
        """Smallest divisor magnitude accepted at truncation order N."""
        if self.delta <= 0:
            return DIVISOR_FLOOR
        return max(DIVISOR_FLOOR, 0.5 * 4 * self.delta / n_modes)

    def __str__(self) -> str:
        return self.name


def divisor_bound(alpha: Frequency, n: int) -> float:
    """Lower bound of |e^{2πinα} - 1| for n ≠ 0.

    Exact quadratic irrationals use 4δ/|n|, which follows from
    |sin πx| ≥ 2‖x‖ and ‖nα‖ ≥ δ/|n|. Floats and rationals return the
    divisor itself.

    Raises
    ------
    ResonanceError
        If α = p/q and q divides n.
    """
    if n == 0:
        raise ValueError("The divisor vanishes identically at n = 0")
    if alpha.is_resonant(n):
        raise ResonanceError(f"Mode {n} is resonant with rotation number {alpha}")
    if alpha.kind is FrequencyKind.QUADRATIC:
        return 4 * alpha.delta / abs(n)
    return float(np.abs(alpha.divisors(np.array([n]))[0]))


def parse_frequency(value: str | float | Frequency) -> Frequency:
    """Interpret ``golden``, ``sqrt2m1``, ``p/q`` or a decimal."""
    if isinstance(value, Frequency):
        return value
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return Frequency.from_float(float(value))
    if not isinstance(value, str):
        raise FrequencyParsingError(f"Unrecognized rotation number {value!r}")
    text = value.strip().lower()
    if text == "golden":
        return Frequency.golden()
    if text == "sqrt2m1":
        return Frequency.sqrt2m1()
    match = _RATIONAL_PATTERN.match(text)
    if match is not None:
        return Frequency.rational(int(match.group(1)), int(match.group(2)))
    try:
        number = float(text)
    except ValueError:
        raise FrequencyParsingError(f"Unrecognized rotation number '{value}'") from None
    return Frequency.from_float(number)
