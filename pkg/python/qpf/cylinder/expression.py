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

"""User-supplied forcing terms F(r, θ; ε) written in a small grammar.

The grammar accepts numbers, the symbols ``r``, ``theta`` (or ``θ``) and
``eps`` (or ``epsilon``), named numeric parameters, ``pi``, ``sin``,
``cos``, ``+``, ``-``, ``*``, division by constants and non-negative
integer powers (``**`` or ``^``). Partial derivatives are taken
symbolically and compiled to numpy functions.
"""

from __future__ import annotations

import logging
import re
from tokenize import TokenError
from typing import Callable, Mapping

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

from .errors import PreconditionFailure

__all__ = ["ExpressionError", "R", "THETA", "EPS", "parse_forcing", "forcing_partials", "compile_forcing"]

logger = logging.getLogger("qpf.cylinder.expression")

R, THETA, EPS = sympy.symbols("r theta eps", real=True)

_NAMES = {
    "r": R,
    "theta": THETA,
    "eps": EPS,
    "epsilon": EPS,
    "sin": sympy.sin,
    "cos": sympy.cos,
    "pi": sympy.pi,
}
_ALLOWED_FUNCTIONS = (sympy.sin, sympy.cos)
_ALLOWED_CHARACTERS = re.compile(r"^[0-9A-Za-z_.+\-*/^() \t]*$")
_IDENTIFIER = re.compile(r"(?<![0-9.])[A-Za-z_][A-Za-z_0-9]*")
_GLOBALS = {
    "Integer": sympy.Integer,
    "Float": sympy.Float,
    "Rational": sympy.Rational,
    "Symbol": sympy.Symbol,
    "Function": sympy.Function,
}


class ExpressionError(PreconditionFailure):
    """A forcing expression is outside the accepted grammar."""

    pass


def parse_forcing(text: str, params: Mapping[str, float] | None = None) -> sympy.Expr:
    """Parse and validate a forcing expression.

    Parameters
    ----------
    text :
        The expression, for example ``"sin(r) + b*sin(theta)"``.
    params :
        Numeric values for any extra names used in ``text``.
    """
    params = dict(params or {})
    text = text.replace("θ", "theta").replace("ε", "eps")
    if not _ALLOWED_CHARACTERS.match(text):
        raise ExpressionError(f"Expression '{text}' contains unsupported characters")
    for name in params:
        if name in _NAMES:
            raise ExpressionError(f"Parameter name '{name}' is reserved")
    for name in _IDENTIFIER.findall(text):
        if name not in _NAMES and name not in params:
            raise ExpressionError(f"Unknown name '{name}' in expression '{text}'")

    local_dict = dict(_NAMES)
    local_dict.update({name: sympy.Float(value) for name, value in params.items()})
    try:
        expr = parse_expr(
            text,
            local_dict=local_dict,
            global_dict=dict(_GLOBALS),
            transformations=standard_transformations + (convert_xor,),
        )
    except (SyntaxError, TokenError, TypeError, ValueError) as err:
        raise ExpressionError(f"Could not parse '{text}': {err}") from None

    expr = sympy.sympify(expr)
    if not expr.free_symbols <= {R, THETA, EPS}:
        raise ExpressionError(f"Expression '{text}' depends on {expr.free_symbols - {R, THETA, EPS}}")
    for node in sympy.preorder_traversal(expr):
        if isinstance(node, sympy.Function) and node.func not in _ALLOWED_FUNCTIONS:
            raise ExpressionError(f"Function '{node.func}' is not allowed in '{text}'")
        if node.is_Pow and not node.base.is_number:
            if not (node.exp.is_Integer and node.exp >= 0):
                raise ExpressionError(f"Only non-negative integer powers of variables are allowed: '{node}'")
    return expr


def forcing_partials(expr: sympy.Expr) -> dict[str, sympy.Expr]:
    """F and the partial derivatives used by the solvers."""
    f_r = sympy.diff(expr, R)
    return {
        "F": expr,
        "F_r": f_r,
        "F_theta": sympy.diff(expr, THETA),
        "F_rr": sympy.diff(f_r, R),
        "F_thetar": sympy.diff(f_r, THETA),
    }


def _compile(expr: sympy.Expr) -> Callable[[np.ndarray, np.ndarray, float], np.ndarray]:
    func = sympy.lambdify((R, THETA, EPS), expr, modules="numpy")

    def evaluate(r: np.ndarray, theta: np.ndarray, eps: float) -> np.ndarray:
        return np.zeros(np.broadcast_shapes(np.shape(r), np.shape(theta))) + func(r, theta, eps)

    return evaluate


def compile_forcing(
    text: str, params: Mapping[str, float] | None = None
) -> dict[str, Callable[[np.ndarray, np.ndarray, float], np.ndarray]]:
    """Parse ``text`` and compile F with its partials to numpy callables."""
    expr = parse_forcing(text, params)
    logger.debug(f"Compiled forcing {expr}")
    return {name: _compile(partial) for name, partial in forcing_partials(expr).items()}
