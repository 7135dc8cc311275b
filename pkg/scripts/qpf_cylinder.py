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

"""Run a single command from a checkout without installing the package.

Example::

    python scripts/qpf_cylinder.py find-invariant -c scripts/config.yaml -j 4
"""

import os
import pathlib
import sys

sys.path.insert(0, os.path.join(pathlib.Path(__file__).parent.parent.absolute(), "python"))

from qpf.cylinder.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
