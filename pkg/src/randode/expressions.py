"""Tiny safe expression evaluator for user-supplied formulas.

Two kinds of formulas appear in configs: custom density functions of one
real variable (evaluated on numpy arrays inside the sampling kernel) and
deterministic per-index coefficient rules such as ``0 if n == 0 else 1/n**2``
(evaluated on scalar integers).  Both are compiled from a whitelisted
subset of Python expression syntax: arithmetic, ``**``, unary minus,
comparisons, conditional expressions, and the functions exp/log/abs/sqrt/pow
with constants pi and e.  ``^`` is accepted as a synonym for ``**``.
"""

from __future__ import annotations

import ast
import math
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import SpecificationError

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.USub, ast.UAdd)
_ALLOWED_CMPOPS = (ast.Eq, ast.NotEq, ast.Lt, ast.LtE, ast.Gt, ast.GtE)
_FUNC_NAMES = ("exp", "log", "abs", "sqrt", "pow")
_CONST_NAMES = ("pi", "e")

_SCALAR_ENV = {
    "exp": math.exp,
    "log": math.log,
    "abs": abs,
    "sqrt": math.sqrt,
    "pow": pow,
    "pi": math.pi,
    "e": math.e,
}

_ARRAY_ENV = {
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sqrt": np.sqrt,
    "pow": np.power,
    "pi": math.pi,
    "e": math.e,
    "_where": np.where,
}


def _validate(node: ast.AST, variable: str, text: str) -> None:
    if isinstance(node, ast.Expression):
        _validate(node.body, variable, text)
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise SpecificationError(f"non-numeric constant in expression {text!r}")
    elif isinstance(node, ast.Name):
        if node.id != variable and node.id not in _CONST_NAMES:
            raise SpecificationError(
                f"unknown name {node.id!r} in expression {text!r} "
                f"(variable is {variable!r})"
            )
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise SpecificationError(f"operator not allowed in expression {text!r}")
        _validate(node.left, variable, text)
        _validate(node.right, variable, text)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _ALLOWED_UNARY):
            raise SpecificationError(f"operator not allowed in expression {text!r}")
        _validate(node.operand, variable, text)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNC_NAMES:
            raise SpecificationError(f"function call not allowed in expression {text!r}")
        if node.keywords:
            raise SpecificationError(f"keyword arguments not allowed in expression {text!r}")
        for arg in node.args:
            _validate(arg, variable, text)
    elif isinstance(node, ast.IfExp):
        _validate(node.test, variable, text)
        _validate(node.body, variable, text)
        _validate(node.orelse, variable, text)
    elif isinstance(node, ast.Compare):
        if not all(isinstance(op, _ALLOWED_CMPOPS) for op in node.ops):
            raise SpecificationError(f"comparison not allowed in expression {text!r}")
        _validate(node.left, variable, text)
        for comp in node.comparators:
            _validate(comp, variable, text)
    else:
        raise SpecificationError(
            f"syntax not allowed in expression {text!r}: {type(node).__name__}"
        )


class _IfExpToWhere(ast.NodeTransformer):
    """Rewrite ``a if c else b`` as ``_where(c, a, b)`` for array evaluation."""

    def visit_IfExp(self, node: ast.IfExp) -> ast.AST:
        self.generic_visit(node)
        return ast.Call(
            func=ast.Name(id="_where", ctx=ast.Load()),
            args=[node.test, node.body, node.orelse],
            keywords=[],
        )


def _parse(text: str, variable: str) -> ast.Expression:
    source = text.replace("^", "**")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise SpecificationError(f"cannot parse expression {text!r}: {exc.msg}") from exc
    _validate(tree, variable, text)
    return tree


@lru_cache(maxsize=256)
def compile_scalar(text: str, variable: str) -> Callable[[float], float]:
    """Compile an expression to a scalar function of `variable`."""
    tree = _parse(text, variable)
    code = compile(tree, f"<expr {text!r}>", "eval")

    def fn(value: float) -> float:
        env = dict(_SCALAR_ENV)
        env[variable] = value
        return float(eval(code, {"__builtins__": {}}, env))

    return fn


@lru_cache(maxsize=256)
def compile_array(text: str, variable: str) -> Callable[[np.ndarray], np.ndarray]:
    """Compile an expression to a numpy-vectorized function of `variable`.

    Conditional expressions evaluate both branches (np.where semantics).
    """
    tree = _parse(text, variable)
    tree = ast.fix_missing_locations(_IfExpToWhere().visit(tree))
    code = compile(tree, f"<expr {text!r}>", "eval")

    def fn(value: np.ndarray) -> np.ndarray:
        env = dict(_ARRAY_ENV)
        env[variable] = np.asarray(value, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = eval(code, {"__builtins__": {}}, env)
        return np.asarray(out, dtype=float)

    return fn
