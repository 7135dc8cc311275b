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

__all__ = ["PreconditionFailure", "ConvergenceFailure"]


class PreconditionFailure(ValueError):
    """The inputs of a computation violate one of its preconditions.

    Raised (through a subclass) for malformed grids, resonant or
    near-resonant frequencies, maps that lack a required property and
    orbits that leave the region where a computation makes sense.
    """

    pass


class ConvergenceFailure(RuntimeError):
    """An iterative computation stopped without reaching its tolerance."""

    pass
