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

import os
import shutil
import tempfile
from unittest import TestCase

import numpy as np
from astropy.table import Table as ApTable
from qpf.cylinder.arithmetic import Frequency
from qpf.cylinder.context import RunContext
from qpf.cylinder.curves import CurveOptions
from qpf.cylinder.periodic import PeriodicFunction, grid


def random_trig(rng: np.random.Generator, degree: int, n_modes: int, scale: float = 1.0) -> PeriodicFunction:
    """A random real trigonometric polynomial of the given degree."""
    cos = {n: scale * rng.uniform(-1, 1) / n**2 for n in range(1, degree + 1)}
    sin = {n: scale * rng.uniform(-1, 1) / n**2 for n in range(1, degree + 1)}
    return PeriodicFunction.from_trig(n_modes, constant=scale * rng.uniform(-1, 1), cos=cos, sin=sin)


def read_table(path: str) -> ApTable:
    return ApTable.read(path, format="ascii.csv")


class CurveMismatchError(AssertionError):
    pass


class QpfTestCase(TestCase):
    """Base class for tests in this package

    Provides a seeded random generator, the golden rotation number,
    small solver options and a temporary output directory.
    """

    def setUp(self):
        self.rng = np.random.default_rng(20240611)
        self.golden = Frequency.golden()
        self.options = CurveOptions(modes=64, adaptive=False)
        self.out = tempfile.mkdtemp(prefix="qpf-test-")
        self.context = RunContext(self.out)

    def tearDown(self) -> None:
        self.context.close()
        shutil.rmtree(self.out, ignore_errors=True)

    def output_path(self, *parts: str) -> str:
        return os.path.join(self.out, *parts)

    def assertPeriodicClose(  # NOQA: N802
        self,
        result: PeriodicFunction,
        truth: PeriodicFunction,
        atol: float = 1e-12,
        size: int | None = None,
    ):
        """Check that two periodic functions agree on a grid.

        Parameters
        ----------
        result :
            The function generated by the test.
        truth :
            The expected function.
        atol :
            Largest accepted pointwise difference.
        size :
            Number of grid points. Defaults to one that resolves both.
        """
        if size is None:
            size = 4 * max(result.n_modes, truth.n_modes) + 1
        difference = np.max(np.abs(result.sample(size) - truth.sample(size)))
        if not difference <= atol:
            raise CurveMismatchError(f"Functions differ by {difference:.3e} > {atol:.1e} on {size} points")

    def assertCoefficientsClose(  # NOQA: N802
        self, result: PeriodicFunction, truth: PeriodicFunction, atol: float = 1e-12
    ):
        n_modes = max(result.n_modes, truth.n_modes)
        np.testing.assert_allclose(
            result.resize(n_modes).coeffs, truth.resize(n_modes).coeffs, rtol=0, atol=atol
        )

    def assertGridClose(  # NOQA: N802
        self, result: PeriodicFunction, func, atol: float = 1e-12, size: int = 257
    ):
        """Compare a periodic function with a callable of θ."""
        theta = grid(size)
        np.testing.assert_allclose(result.evaluate(theta), func(theta), rtol=0, atol=atol)
