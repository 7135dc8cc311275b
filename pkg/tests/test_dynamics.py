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
from dataclasses import replace

import numpy as np
import pytest
import utils
from qpf.cylinder.arithmetic import Frequency
from qpf.cylinder.curves import translated_curve
from qpf.cylinder.dynamics import (
    CocycleError,
    OrbitEscapeError,
    birkhoff_rate,
    chi_plus,
    default_n_values,
    fibred_rotation_number,
    local_attraction,
    lyapunov,
    orbit_sample,
)
from qpf.cylinder.maps import (
    CylinderPoint,
    MapPreconditionError,
    builtin_arnold_scaled,
    builtin_expression,
    builtin_linear_test,
    step,
)
from qpf.cylinder.periodic import PeriodicFunction


class TestLyapunov(utils.QpfTestCase):
    def setUp(self):
        super().setUp()
        g = PeriodicFunction.from_trig(32, cos={1: 1.0}, sin={3: 0.2})
        self.linear = builtin_linear_test(g)
        # c = 0 is the invariant curve of F = -r + g
        self.curve = translated_curve(self.linear, 0.1, self.golden, 0.0, self.options)

    def test_linear(self):
        product = lyapunov(self.curve, self.linear, self.golden, n_max=1000)
        self.assertAlmostEqual(product.chi_plus, math.log(0.9), places=12)
        np.testing.assert_allclose(product.averages, math.log(0.9), rtol=0, atol=1e-12)
        self.assertLess(product.rate_constant, 1e-9)
        self.assertEqual(product.n_values[0], 1)
        self.assertEqual(product.n_values[-1], 1000)

    def test_requires_invariance(self):
        curve = translated_curve(self.linear, 0.1, self.golden, 0.5, self.options)
        with pytest.raises(CocycleError):
            lyapunov(curve, self.linear, self.golden, n_max=100)

    def test_non_positive_cocycle(self):
        with pytest.raises(CocycleError):
            chi_plus(replace(self.curve, epsilon=20.0), self.linear)

    def test_attraction(self):
        profile = local_attraction(self.curve, self.linear, self.golden, offset=0.01, n=50)
        np.testing.assert_allclose(profile.distances, 0.01 * 0.9 ** np.arange(51), rtol=1e-8)
        self.assertAlmostEqual(profile.k_emp, 1.0, places=6)


class TestBirkhoff(utils.QpfTestCase):
    def test_bounded(self):
        f = PeriodicFunction.from_trig(16, constant=0.5, cos={1: 1.0}, sin={2: 0.3, 5: 0.1})
        rate = birkhoff_rate(f, self.golden, n_values=default_n_values(20_000))
        self.assertLessEqual(rate.bound_max, rate.proof_bound)
        np.testing.assert_allclose(rate.averages[-1], 0.5, atol=1e-3)

    def test_rational(self):
        # α = 1/2 averages cos θ over {θ₀, θ₀ + π} exactly for even n
        f = PeriodicFunction.from_trig(8, cos={1: 1.0})
        rate = birkhoff_rate(f, Frequency.rational(1, 2), theta0=0.3, n_values=[2, 4, 10, 11])
        np.testing.assert_allclose(rate.averages[:3], 0.0, atol=1e-14)
        self.assertAlmostEqual(rate.averages[3], math.cos(0.3) / 11)
        self.assertEqual(rate.proof_bound, math.inf)

    def test_default_n_values(self):
        values = default_n_values(10_000)
        self.assertEqual(values[0], 1)
        self.assertEqual(values[-1], 10_000)
        self.assertTrue(np.all(np.diff(values) > 0))


class TestOrbit(utils.QpfTestCase):
    def test_sample(self):
        forced_map = builtin_arnold_scaled(0.0, 0.2, 0.5)
        start = CylinderPoint(0.1, 0.2)
        points = orbit_sample(forced_map, 0.1, self.golden, start, n_transient=3, n_keep=5)
        self.assertEqual(len(points), 5)
        expected = start
        for _ in range(4):
            expected = step(forced_map, 0.1, self.golden, expected)
        self.assertEqual(points[0], expected)

    def test_inverse(self):
        forced_map = builtin_arnold_scaled(0.0, 0.2, 0.5)
        start = CylinderPoint(0.1, 0.2)
        forward = orbit_sample(forced_map, 0.1, self.golden, start, n_transient=0, n_keep=10)
        backward = orbit_sample(
            forced_map, 0.1, self.golden, forward[-1], n_transient=0, n_keep=10, inverse=True
        )
        self.assertAlmostEqual(backward[-1].r, start.r, places=10)

    def test_escape(self):
        forced_map = builtin_expression("r^2")
        with pytest.raises(OrbitEscapeError):
            orbit_sample(forced_map, 1.0, self.golden, CylinderPoint(2.0, 0.0), 0, 50)

    def test_rotation_number(self):
        # each step moves r by ω₀ + ε sin r, within ω₀ ± ε
        forced_map = builtin_arnold_scaled(0.25, 0.0, 0.0)
        rotation = fibred_rotation_number(forced_map, 0.1, self.golden, CylinderPoint(0.0, 0.0), n=100)
        self.assertGreater(rotation.rho, 0.25 - 0.1)
        self.assertLess(rotation.rho, 0.25 + 0.1)
        self.assertAlmostEqual(rotation.tail_estimate, abs(rotation.rho_double - rotation.rho))

    def test_rotation_requires_periodic(self):
        forced_map = builtin_linear_test(PeriodicFunction.from_trig(8, cos={1: 1.0}))
        with pytest.raises(MapPreconditionError):
            fibred_rotation_number(forced_map, 0.1, self.golden, CylinderPoint(0.0, 0.0), n=10)
