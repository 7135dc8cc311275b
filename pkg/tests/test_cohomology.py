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
from qpf.cylinder.arithmetic import Frequency, FrequencyKind, ResonanceError
from qpf.cylinder.cohomology import (
    LinDEPreconditionError,
    NearResonanceError,
    averaged_map_defect,
    averaging_conjugacy,
    nu_obstruction,
    solve_constant,
    solve_linde,
    solve_linde_dense,
)
from qpf.cylinder.maps import CylinderPoint, builtin_arnold_scaled, builtin_transformed_arnold, step
from qpf.cylinder.periodic import PeriodicFunction
from scipy import special


def positive_coefficient(rng: np.random.Generator, n_modes: int, scale: float) -> PeriodicFunction:
    """λ e^{v(θ)} with a random zero-mean v, so that λ_a = λ."""
    v = utils.random_trig(rng, 4, n_modes, 0.3)
    v = v - v.mean()
    scale_factor = scale

    def coefficient(theta):
        return scale_factor * np.exp(v.evaluate(theta))

    return PeriodicFunction.from_function(coefficient, n_modes)


class TestSolveConstant(utils.QpfTestCase):
    def test_sine_forcing(self):
        b0 = 0.7
        alpha = self.golden.alpha
        amplitude = b0 / (2 * math.sin(math.pi * alpha))
        p = PeriodicFunction.from_trig(16, sin={1: b0})
        solution = solve_constant(p, self.golden)
        truth = PeriodicFunction.from_trig(
            16,
            cos={1: -amplitude * math.cos(math.pi * alpha)},
            sin={1: -amplitude * math.sin(math.pi * alpha)},
        )
        self.assertTrue(solution.solvable)
        self.assertFalse(solution.divisor_floor_hit)
        self.assertCoefficientsClose(solution.G, truth, atol=1e-12)

    def test_random_forcing(self):
        for alpha in (self.golden, Frequency.sqrt2m1()):
            p = utils.random_trig(self.rng, 8, 32)
            p = p - p.mean()
            solution = solve_constant(p, alpha)
            self.assertAlmostEqual(solution.G.mean(), 0.0)
            self.assertPeriodicClose(solution.G.shift(alpha) - solution.G, p, atol=1e-12)

    def test_nonzero_mean(self):
        p = PeriodicFunction.from_trig(8, constant=0.3, cos={2: 1.0})
        solution = solve_constant(p, self.golden)
        self.assertFalse(solution.solvable)
        self.assertAlmostEqual(solution.obstruction, 0.3)
        self.assertPeriodicClose(
            solution.G.shift(self.golden) - solution.G, PeriodicFunction.from_trig(8, cos={2: 1.0})
        )

    def test_rational(self):
        quarter = Frequency.rational(1, 4)
        p = PeriodicFunction.from_trig(8, sin={1: 1.0, 4: 1.0})
        with pytest.raises(ResonanceError):
            solve_constant(p, quarter)
        solution = solve_constant(p, quarter, on_resonance="drop")
        self.assertTrue(solution.divisor_floor_hit)
        self.assertEqual(solution.G.coefficient(4), 0)
        self.assertPeriodicClose(
            solution.G.shift(quarter) - solution.G, PeriodicFunction.from_trig(8, sin={1: 1.0})
        )

    def test_near_resonance(self):
        alpha = Frequency(
            alpha=0.5 + 1e-9, kind=FrequencyKind.FLOAT, quotients=(), delta=1e-3, rigorous=False, name="x"
        )
        p = PeriodicFunction.from_trig(8, cos={2: 1.0})
        with pytest.raises(NearResonanceError) as excinfo:
            solve_constant(p, alpha)
        self.assertEqual(abs(excinfo.value.mode), 2)
        solution = solve_constant(p, alpha, on_resonance="drop")
        self.assertTrue(solution.divisor_floor_hit)


class TestLinearDifference(utils.QpfTestCase):
    def test_residual(self):
        a = positive_coefficient(self.rng, 32, 0.8)
        p = utils.random_trig(self.rng, 8, 32)
        solution = solve_linde(a, p, self.golden)
        self.assertLess(solution.residual_sup, 1e-10)
        self.assertAlmostEqual(solution.phi.mean(), 0.0, places=14)
        self.assertFalse(solution.divisor_floor_hit)
        self.assertGreater(solution.gain, 0)

    def test_constant_coefficient(self):
        # a = λ constant gives φ̂_n = p̂_n / (e^{2πinα} - λ) and ν = -p̂_0
        lam = 0.5
        p = PeriodicFunction.from_trig(8, constant=0.2, cos={1: 1.0}, sin={3: 0.5})
        solution = solve_linde(PeriodicFunction.constant(lam, 8), p, self.golden)
        modes = p.modes
        expected = np.where(
            modes == 0, 0, p.coeffs / (np.exp(2j * np.pi * modes * self.golden.alpha) - lam)
        )
        self.assertAlmostEqual(solution.nu, -0.2, places=12)
        np.testing.assert_allclose(solution.phi.coeffs, expected, rtol=0, atol=1e-12)

    def test_dense_oracle(self):
        # λ_a on both sides of 1
        n_modes = 32
        for _ in range(25):
            a = positive_coefficient(self.rng, n_modes, self.rng.uniform(0.6, 1.4))
            p = utils.random_trig(self.rng, 6, n_modes)
            spectral = solve_linde(a, p, self.golden)
            dense = solve_linde_dense(a, p, self.golden, 2 * n_modes + 1)
            self.assertLessEqual(abs(spectral.nu - dense.nu), 1e-10)
            self.assertPeriodicClose(spectral.phi, dense.phi, atol=1e-9)

    def test_grid_independence(self):
        a = positive_coefficient(self.rng, 32, 1.2)
        p = utils.random_trig(self.rng, 8, 32)
        coarse = solve_linde(a, p, self.golden, grid_factor=4)
        fine = solve_linde(a, p, self.golden, grid_factor=8)
        self.assertAlmostEqual(coarse.nu, fine.nu, places=12)
        self.assertPeriodicClose(coarse.phi, fine.phi, atol=1e-10)

    def test_linearity(self):
        a = positive_coefficient(self.rng, 32, 0.7)
        p1 = utils.random_trig(self.rng, 8, 32)
        p2 = utils.random_trig(self.rng, 8, 32)
        first = solve_linde(a, p1, self.golden)
        second = solve_linde(a, p2, self.golden)
        combined = solve_linde(a, p1 + p2 * 2.0, self.golden)
        self.assertAlmostEqual(combined.nu, first.nu + 2 * second.nu, places=12)
        self.assertPeriodicClose(combined.phi, first.phi + second.phi * 2.0, atol=1e-12)

    def test_bounded_gain(self):
        gains = []
        for _ in range(20):
            a = positive_coefficient(self.rng, 32, self.rng.uniform(0.6, 1.4))
            p = utils.random_trig(self.rng, 8, 32)
            p = p - p.mean()
            solution = solve_linde(a, p, self.golden)
            self.assertAlmostEqual(solution.gain, solution.phi.sobolev_norm(0) / p.sobolev_norm(1))
            gains.append(solution.gain)
        self.assertLess(max(gains), 100)

    def test_coboundary(self):
        # a = b(θ + 2πα)/b(θ) with b = e^{0.2 cos θ}
        alpha = self.golden.alpha

        def b(theta):
            return np.exp(0.2 * np.cos(theta))

        a = PeriodicFunction.from_function(lambda t: b(t + 2 * np.pi * alpha) / b(t), 32)
        p = PeriodicFunction.constant(1.0, 32)
        self.assertAlmostEqual(nu_obstruction(a, p, self.golden), special.i0(0.2) ** 2, places=10)
        solution = solve_linde(a, p, self.golden)
        self.assertAlmostEqual(solution.nu, -1.0, places=10)
        self.assertLess(solution.phi.sup_norm_bound(), 1e-10)

    def test_non_positive(self):
        a = PeriodicFunction.from_trig(8, cos={1: 1.0})
        with pytest.raises(LinDEPreconditionError):
            solve_linde(a, PeriodicFunction.constant(1.0, 8), self.golden)


class TestAveraging(utils.QpfTestCase):
    def test_conjugacy(self):
        omega1, b = 0.1, 0.5
        forced_map = builtin_arnold_scaled(0.0, omega1, b)
        r_grid = np.linspace(-1, 1, 5)
        conjugacy = averaging_conjugacy(forced_map, 0.05, self.golden, r_grid, n_modes=16)
        np.testing.assert_allclose(conjugacy.F_bar, omega1 + np.sin(r_grid), atol=1e-12)
        alpha = self.golden.alpha
        amplitude = b / (2 * math.sin(math.pi * alpha))
        for h in conjugacy.H:
            self.assertGridClose(h, lambda t: amplitude * np.cos(t - math.pi * alpha), atol=1e-12)

    def test_defect_is_second_order(self):
        forced_map = builtin_transformed_arnold(0.1, 0.5, 0.1, self.golden)
        points = [CylinderPoint(0.3, 0.0)]
        for _ in range(100):
            points.append(step(forced_map, 0.02, self.golden, points[-1]))
        coarse = averaged_map_defect(forced_map, 0.02, self.golden, points, n_modes=32)
        fine = averaged_map_defect(forced_map, 0.01, self.golden, points, n_modes=32)
        ratio = coarse.max() / fine.max()
        self.assertGreater(ratio, 3.5)
        self.assertLess(ratio, 4.5)
