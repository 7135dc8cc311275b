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
from qpf.cylinder.cohomology import solve_constant
from qpf.cylinder.curves import (
    CurveConvergenceError,
    CurveOptions,
    EpsilonTooLargeError,
    NotRationalError,
    TranslationResidualError,
    continuation_in_eps,
    dpsi_dc,
    foliation_sweep,
    functional_residual,
    rational_obstruction,
    solve_curves,
    translated_curve,
)
from qpf.cylinder.maps import (
    builtin_expression,
    builtin_linear_test,
    builtin_rational_counterexample,
    builtin_transformed_arnold,
)
from qpf.cylinder.periodic import PeriodicFunction
from qpf.cylinder.worker import WorkerPool


def linear_curve(g: PeriodicFunction, eps: float, alpha: Frequency, c: float) -> PeriodicFunction:
    """ψ̂_n = εĝ_n / (e^{2πinα} - 1 + ε) for the map F = -r + g(θ)."""
    modes = g.modes
    coeffs = eps * g.coeffs / (np.exp(2j * np.pi * modes * alpha.alpha) - 1 + eps)
    coeffs[g.n_modes] = c
    return PeriodicFunction(coeffs)


class TestTranslatedCurve(utils.QpfTestCase):
    def setUp(self):
        super().setUp()
        self.transformed = builtin_transformed_arnold(0.1, 0.5, 0.1, self.golden)

    def test_r_free_forcing(self):
        forced_map = builtin_expression("0.3 + cos(theta)")
        eps, c = 0.1, 0.4
        curve = translated_curve(forced_map, eps, self.golden, c, self.options)
        self.assertAlmostEqual(curve.lam, -0.3 * eps, places=12)
        cosine = PeriodicFunction.from_trig(64, cos={1: 1.0})
        truth = solve_constant(cosine, self.golden).G * eps + c
        self.assertPeriodicClose(curve.psi, truth, atol=1e-12)
        self.assertTrue(curve.converged)
        self.assertLessEqual(curve.iterations, 3)

    def test_linear_closed_form(self):
        g = PeriodicFunction.from_trig(64, cos={1: 1.0, 3: 0.2}, sin={2: 0.5})
        forced_map = builtin_linear_test(g)
        eps, c = 0.1, 0.7
        curve = translated_curve(forced_map, eps, self.golden, c, self.options)
        self.assertCoefficientsClose(curve.psi, linear_curve(g, eps, self.golden, c), atol=1e-10)
        self.assertAlmostEqual(curve.lam, eps * c, places=10)
        self.assertAlmostEqual(curve.psi.mean(), c, places=12)

    def test_residual(self):
        curve = translated_curve(self.transformed, 0.05, self.golden, 0.3, self.options)
        self.assertTrue(curve.converged)
        self.assertFalse(curve.breakdown)
        self.assertLess(curve.residual_sup, 1e-9)
        self.assertLess(functional_residual(curve, self.transformed, self.golden, 1024), 1e-9)
        self.assertEqual(len(curve.step_history), curve.iterations)
        summary = curve.summary()
        self.assertEqual(summary["modes"], 64)
        self.assertEqual(summary["c"], 0.3)

    def test_periodic_in_c(self):
        lower = translated_curve(self.transformed, 0.05, self.golden, 0.3, self.options)
        upper = translated_curve(self.transformed, 0.05, self.golden, 0.3 + 2 * math.pi, self.options)
        self.assertPeriodicClose(upper.psi - 2 * math.pi, lower.psi, atol=1e-9)
        self.assertAlmostEqual(upper.lam, lower.lam, places=9)

    def test_dpsi_dc(self):
        eps, c, h = 0.05, 0.3, 1e-4
        curve = translated_curve(self.transformed, eps, self.golden, c, self.options)
        plus = translated_curve(self.transformed, eps, self.golden, c + h, self.options)
        minus = translated_curve(self.transformed, eps, self.golden, c - h, self.options)
        delta = dpsi_dc(curve, self.transformed, self.golden)
        self.assertAlmostEqual(delta.mean(), 1.0, places=12)
        self.assertPeriodicClose(delta, (plus.psi - minus.psi) * (1 / (2 * h)), atol=1e-6)

    def test_dpsi_dc_requires_convergence(self):
        curve = translated_curve(self.transformed, 0.05, self.golden, 0.3, self.options)
        with pytest.raises(CurveConvergenceError):
            dpsi_dc(replace(curve, converged=False, breakdown=True), self.transformed, self.golden)

    def test_unique(self):
        eps, c = 0.05, 0.3
        curve = translated_curve(self.transformed, eps, self.golden, c, self.options)
        initial = PeriodicFunction.from_trig(64, constant=c, cos={1: 0.1})
        other = translated_curve(self.transformed, eps, self.golden, c, self.options, initial=initial)
        self.assertPeriodicClose(other.psi, curve.psi, atol=1e-10)
        self.assertAlmostEqual(other.lam, curve.lam, places=10)

    def test_linear_in_eps(self):
        c = 0.3
        coarse = translated_curve(self.transformed, 0.05, self.golden, c, self.options)
        fine = translated_curve(self.transformed, 0.025, self.golden, c, self.options)
        ratio = (coarse.psi - c).sobolev_norm(0) / (fine.psi - c).sobolev_norm(0)
        self.assertGreaterEqual(ratio, 1.7)
        self.assertLessEqual(ratio, 2.3)

    def test_dpsi_dc_lipschitz_constant(self):
        # ‖Dδ‖ ≤ Kε with K stable under halving ε
        constants = []
        for eps in (0.05, 0.025):
            curve = translated_curve(self.transformed, eps, self.golden, 0.3, self.options)
            delta = dpsi_dc(curve, self.transformed, self.golden)
            constants.append(delta.derivative().sobolev_norm(0) / eps)
        self.assertTrue(np.all(np.isfinite(constants)))
        self.assertLess(abs(constants[0] / constants[1] - 1), 0.2)

    def test_epsilon_too_large(self):
        g = PeriodicFunction.from_trig(16, cos={1: 1.0})
        with pytest.raises(EpsilonTooLargeError):
            translated_curve(builtin_linear_test(g), 0.6, self.golden, 0.0, self.options)

    def test_adaptive_refinement(self):
        options = CurveOptions(modes=8, adaptive=True, max_modes=64)
        curve = translated_curve(self.transformed, 0.05, self.golden, 0.3, options)
        self.assertGreater(curve.n_modes, 8)
        self.assertLessEqual(curve.n_modes, 64)


class TestSweep(utils.QpfTestCase):
    def setUp(self):
        super().setUp()
        self.transformed = builtin_transformed_arnold(0.1, 0.5, 0.1, self.golden)
        self.c_values = np.linspace(0, 2 * np.pi, 12, endpoint=False)

    def test_foliation(self):
        sweep = foliation_sweep(self.transformed, 0.05, self.golden, self.c_values[::-1], self.options)
        self.assertTrue(sweep.ordered)
        self.assertEqual([curve.c for curve in sweep.curves], sorted(self.c_values.tolist()))
        self.assertGreater(sweep.lipschitz, 0)
        self.assertTrue(np.isfinite(sweep.lipschitz))

    def test_duplicate_values(self):
        with pytest.raises(ValueError):
            foliation_sweep(self.transformed, 0.05, self.golden, [0.0, 0.0], self.options)

    def test_independent_of_jobs(self):
        serial = solve_curves(self.transformed, 0.05, self.golden, self.c_values, self.options)
        with WorkerPool(3) as pool:
            parallel = solve_curves(self.transformed, 0.05, self.golden, self.c_values, self.options, pool)
        for first, second in zip(serial, parallel):
            np.testing.assert_array_equal(first.psi.coeffs, second.psi.coeffs)
            self.assertEqual(first.lam, second.lam)


class TestContinuation(utils.QpfTestCase):
    def setUp(self):
        super().setUp()
        self.forced_map = builtin_linear_test(PeriodicFunction.from_trig(16, cos={1: 1.0}))

    def test_ladder(self):
        report = continuation_in_eps(self.forced_map, self.golden, 0.0, [0.1, 0.2, 0.3], self.options)
        self.assertIsNone(report.breakdown_eps)
        self.assertEqual(len(report.curves), 3)
        self.assertEqual([eps for eps, _ in report.trace], [0.1, 0.2, 0.3])

    def test_bounds_stop_continuation(self):
        ladder = [0.2, 0.4, 0.6, 0.65]
        report = continuation_in_eps(self.forced_map, self.golden, 0.0, ladder, self.options)
        self.assertEqual(report.breakdown_eps, 0.6)
        self.assertEqual(len(report.curves), 2)
        self.assertIn("outside", report.reason)

        relaxed = CurveOptions(modes=64, adaptive=False, a_bounds=(0.1, 1.5))
        report = continuation_in_eps(self.forced_map, self.golden, 0.0, ladder, relaxed)
        self.assertIsNone(report.breakdown_eps)
        self.assertEqual(len(report.curves), 4)

    def test_ceiling(self):
        options = CurveOptions(modes=64, adaptive=False, d2_ceiling=1e-3)
        report = continuation_in_eps(self.forced_map, self.golden, 0.0, [0.1, 0.2], options)
        self.assertEqual(report.breakdown_eps, 0.1)
        self.assertEqual(len(report.curves), 0)
        self.assertEqual(len(report.trace), 1)

    def test_not_increasing(self):
        with pytest.raises(ValueError):
            continuation_in_eps(self.forced_map, self.golden, 0.0, [0.2, 0.1], self.options)


class TestRationalObstruction(utils.QpfTestCase):
    def test_certificate(self):
        quarter = Frequency.rational(1, 4)
        certificate = rational_obstruction(builtin_rational_counterexample(4), 0.1, quarter)
        self.assertIsNotNone(certificate)
        self.assertAlmostEqual(certificate.theta_positive, math.pi / 8, places=12)
        self.assertAlmostEqual(certificate.theta_negative, -math.pi / 8, places=12)
        self.assertAlmostEqual(certificate.margin_positive, 4.0, places=10)
        self.assertAlmostEqual(certificate.margin_negative, -4.0, places=10)

    def test_no_curve_at_rational(self):
        with pytest.raises(CurveConvergenceError):
            translated_curve(
                builtin_rational_counterexample(4), 0.1, Frequency.rational(1, 4), 0.0, self.options
            )

    def test_unobstructed(self):
        quarter = Frequency.rational(1, 4)
        forced_map = builtin_expression("cos(theta)")
        self.assertIsNone(rational_obstruction(forced_map, 0.1, quarter))
        curve = translated_curve(forced_map, 0.1, quarter, 0.0, self.options)
        self.assertAlmostEqual(curve.lam, 0.0, places=12)
        self.assertTrue(curve.divisor_floor_hit)
        cosine = PeriodicFunction.from_trig(64, cos={1: 0.1})
        self.assertPeriodicClose(curve.psi.shift(quarter) - curve.psi, cosine, atol=1e-12)

    def test_one_sided_sum(self):
        quarter = Frequency.rational(1, 4)
        # Σ_k F = 4 for every θ: positive everywhere, never negative
        constant = builtin_expression("1")
        self.assertIsNone(rational_obstruction(constant, 0.1, quarter))
        curve = translated_curve(constant, 0.1, quarter, 0.4, self.options)
        self.assertAlmostEqual(curve.lam, -0.1, places=12)
        self.assertPeriodicClose(curve.psi, PeriodicFunction.constant(0.4, 64), atol=1e-12)

        # Σ_k F = 4 + 2 cos 4θ is positive everywhere; the resonant mode
        # makes the translation non-constant
        resonant = builtin_expression("1 + 0.5*cos(4*theta)")
        self.assertIsNone(rational_obstruction(resonant, 0.1, quarter))
        with pytest.raises(TranslationResidualError):
            translated_curve(resonant, 0.1, quarter, 0.0, self.options)

    def test_irrational(self):
        with pytest.raises(NotRationalError):
            rational_obstruction(builtin_rational_counterexample(4), 0.1, self.golden)
