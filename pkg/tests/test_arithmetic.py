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

import math

import numpy as np
import pytest
import utils
from qpf.cylinder.arithmetic import (
    Frequency,
    FrequencyKind,
    FrequencyParsingError,
    ResonanceError,
    continued_fraction,
    divisor_bound,
    parse_frequency,
)


class TestContinuedFraction(utils.QpfTestCase):
    def test_one_third(self):
        expansion = continued_fraction(1 / 3, 10)
        self.assertEqual(expansion.a0, 0)
        self.assertEqual(expansion.quotients, (3,))
        self.assertEqual(expansion.convergents, ((1, 3),))
        self.assertTrue(expansion.terminated)

    def test_golden_convergents(self):
        expansion = continued_fraction(self.golden.alpha, 10)
        self.assertEqual(expansion.quotients, (1,) * 10)
        self.assertEqual(expansion.convergents[:5], ((1, 1), (1, 2), (2, 3), (3, 5), (5, 8)))
        self.assertFalse(expansion.terminated)

    def test_sqrt2m1_quotients(self):
        expansion = continued_fraction(math.sqrt(2) - 1, 12)
        self.assertEqual(expansion.quotients, (2,) * 12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            continued_fraction(0.5, 0)
        with pytest.raises(FrequencyParsingError):
            continued_fraction(math.nan, 5)


class TestFrequency(utils.QpfTestCase):
    def test_golden(self):
        golden = Frequency.golden()
        self.assertEqual(golden.kind, FrequencyKind.QUADRATIC)
        self.assertTrue(golden.rigorous)
        self.assertAlmostEqual(golden.delta, (3 - math.sqrt(5)) / 2, places=15)
        self.assertAlmostEqual(golden.mu, 1 / (4 * golden.delta))
        # δ bounds q²|α - p/q| along all convergents
        for p, q in golden.convergents():
            if q > 10**4:
                break
            self.assertGreaterEqual(q * q * abs(golden.alpha - p / q), golden.delta - 1e-9)

    def test_sqrt2m1(self):
        frequency = Frequency.sqrt2m1()
        self.assertAlmostEqual(frequency.alpha, math.sqrt(2) - 1)
        # The infimum is attained at p/q = 1/2
        self.assertAlmostEqual(frequency.delta, 4 * abs(frequency.alpha - 0.5), places=14)

    def test_rational(self):
        frequency = Frequency.rational(2, 8)
        self.assertEqual((frequency.p, frequency.q), (1, 4))
        self.assertTrue(frequency.is_rational)
        self.assertEqual(frequency.delta, 0)
        self.assertEqual(frequency.mu, math.inf)
        self.assertEqual(str(frequency), "1/4")
        np.testing.assert_array_equal(frequency.is_resonant(np.array([0, 1, 4, 8, -4])), [1, 0, 1, 1, 1])
        self.assertFalse(frequency.is_resonant(3))
        divisors = frequency.divisors(np.arange(-8, 9))
        self.assertEqual(divisors[0], 0)
        self.assertEqual(divisors[4], 0)
        self.assertGreater(abs(divisors[9]), 1)

        with pytest.raises(FrequencyParsingError):
            Frequency.rational(3, 2)

    def test_from_float(self):
        quarter = Frequency.from_float(0.25)
        self.assertTrue(quarter.is_rational)
        self.assertEqual(quarter.q, 4)
        # 0.1 is a binary fraction close to 1/10
        self.assertEqual(Frequency.from_float(0.1).q, 10)

        irrational = Frequency.from_float(math.pi - 3)
        self.assertEqual(irrational.kind, FrequencyKind.FLOAT)
        self.assertFalse(irrational.rigorous)
        self.assertEqual(irrational.quotients[:4], (7, 15, 1, 292))
        self.assertGreater(irrational.delta, 0)

        with pytest.raises(FrequencyParsingError):
            Frequency.from_float(1.5)

    def test_divisors(self):
        modes = np.arange(-16, 17)
        divisors = self.golden.divisors(modes)
        np.testing.assert_allclose(divisors, np.exp(2j * np.pi * modes * self.golden.alpha) - 1, atol=1e-13)
        self.assertTrue(self.golden.is_resonant(0))
        self.assertFalse(self.golden.is_resonant(5))

    def test_divisor_floor(self):
        self.assertAlmostEqual(self.golden.divisor_floor(32), 2 * self.golden.delta / 32)
        self.assertEqual(Frequency.rational(1, 3).divisor_floor(32), 1e-12)


class TestDivisorBound(utils.QpfTestCase):
    def test_quadratic_bound(self):
        for frequency in (Frequency.golden(), Frequency.sqrt2m1()):
            modes = np.arange(1, 2001)
            actual = np.abs(frequency.divisors(modes))
            bounds = np.array([divisor_bound(frequency, int(n)) for n in modes])
            self.assertTrue(np.all(actual >= bounds))

    def test_resonant(self):
        quarter = Frequency.rational(1, 4)
        with pytest.raises(ResonanceError):
            divisor_bound(quarter, 8)
        self.assertAlmostEqual(divisor_bound(quarter, 1), abs(1j - 1))
        with pytest.raises(ValueError):
            divisor_bound(self.golden, 0)


class TestParseFrequency(utils.QpfTestCase):
    def test_names(self):
        self.assertEqual(parse_frequency("golden").name, "golden")
        self.assertEqual(parse_frequency(" SQRT2M1 ").name, "sqrt2m1")
        self.assertIs(parse_frequency(self.golden), self.golden)

    def test_rational(self):
        frequency = parse_frequency("3/7")
        self.assertEqual((frequency.p, frequency.q), (3, 7))
        self.assertEqual(parse_frequency("2 / 4").q, 2)

    def test_numbers(self):
        self.assertEqual(parse_frequency("0.5").q, 2)
        self.assertEqual(parse_frequency(0.75).q, 4)
        self.assertEqual(parse_frequency(0.3819660112501051).kind, FrequencyKind.FLOAT)

    def test_errors(self):
        for value in ("abc", "1.5", "0", "4/3", "0/5", True, None):
            with pytest.raises(FrequencyParsingError):
                parse_frequency(value)
