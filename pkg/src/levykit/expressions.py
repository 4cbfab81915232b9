"""A small arithmetic expression language for kernels, coefficients and forcing terms.

Grammar: numbers, + - * / ** (also ^), parentheses, |expr| for absolute value
(Euclidean norm for a vector variable), the functions sin cos tan exp log sqrt
abs tanh cosh sinh min max, the constants pi and e, and the variables the
caller declares. A vector variable ``x`` of dimension d exposes components
``x1 .. xd``; in one dimension ``x`` is the scalar itself.
"""

from __future__ import annotations

import ast
import math
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError

_FUNCS = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt, "tanh": np.tanh, "cosh": np.cosh, "sinh": np.sinh,
    "min": np.minimum, "max": np.maximum,
}
_CONSTS = {"pi": math.pi, "e": math.e}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod)
_UNOPS = (ast.UAdd, ast.USub)


class _Vec(np.ndarray):
    """Marks a vector-valued variable so |v| means the Euclidean norm."""


def _absval(v):
    if isinstance(v, _Vec):
        return np.linalg.norm(np.asarray(v), axis=-1)
    return np.abs(v)


def _translate_bars(text: str) -> str:
    out = []
    depth_stack: list[int] = []
    prev = ""
    paren = 0
    for ch in text:
        if ch == "|":
            opening = prev == "" or prev in "+-*/^(,|" or (depth_stack and depth_stack[-1] == paren and prev in "+-*/^(,")
            if not opening and depth_stack and depth_stack[-1] == paren:
                out.append(")")
                depth_stack.pop()
            else:
                out.append("abs(")
                depth_stack.append(paren)
            prev = "(" if out[-1] == "abs(" else ")"
            continue
        if ch == "(":
            paren += 1
        elif ch == ")":
            paren -= 1
        out.append(ch)
        if not ch.isspace():
            prev = ch
    if depth_stack:
        raise ConfigError(f"unbalanced |...| in expression {text!r}")
    return "".join(out)


def _validate(tree: ast.AST, names: set[str]) -> None:
    for node in ast.walk(tree):
        if isinstance(node, ast.Expression):
            continue
        if isinstance(node, (ast.BinOp, ast.UnaryOp, ast.Load)):
            if isinstance(node, ast.BinOp) and not isinstance(node.op, _BINOPS):
                raise ConfigError(f"operator {type(node.op).__name__} not allowed")
            if isinstance(node, ast.UnaryOp) and not isinstance(node.op, _UNOPS):
                raise ConfigError(f"operator {type(node.op).__name__} not allowed")
            continue
        if isinstance(node, _BINOPS + _UNOPS):
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        if isinstance(node, ast.Name):
            if node.id not in names and node.id not in _FUNCS and node.id not in _CONSTS and node.id != "abs":
                raise ConfigError(f"unknown name {node.id!r}")
            continue
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or (node.func.id not in _FUNCS and node.func.id != "abs"):
                raise ConfigError("only the built-in functions may be called")
            if node.keywords:
                raise ConfigError("keyword arguments are not allowed")
            continue
        raise ConfigError(f"syntax element {type(node).__name__} not allowed")


class Expression:
    """Compiled expression; call with keyword arrays for each declared variable."""

    def __init__(self, text: str, variables: Iterable[str], dims: dict[str, int] | None = None):
        self.text = str(text)
        self.variables = tuple(variables)
        self.dims = dict(dims or {})
        names = set(self.variables)
        for v, d in self.dims.items():
            names.update(f"{v}{i + 1}" for i in range(d))
        src = _translate_bars(self.text.replace("^", "**"))
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.text!r}: {exc}") from None
        _validate(tree, names)
        self.free_names = {n.id for n in ast.walk(tree) if isinstance(n, ast.Name)} - set(_FUNCS) - set(_CONSTS) - {"abs"}
        self._code = compile(tree, "<expression>", "eval")

    def uses(self, var: str) -> bool:
        d = self.dims.get(var, 0)
        return var in self.free_names or any(f"{var}{i + 1}" in self.free_names for i in range(d))

    def __call__(self, **values) -> np.ndarray:
        env: dict = {"abs": _absval, **_FUNCS, **_CONSTS}
        shape = ()
        for name in self.variables:
            val = values.get(name, 0.0)
            arr = np.asarray(val, dtype=float)
            d = self.dims.get(name)
            if d:
                if d == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
                    arr = arr[..., None]
                for i in range(d):
                    env[f"{name}{i + 1}"] = arr[..., i]
                env[name] = arr[..., 0] if d == 1 else arr.view(_Vec)
                shape = np.broadcast_shapes(shape, arr.shape[:-1])
            else:
                env[name] = arr
                shape = np.broadcast_shapes(shape, arr.shape)
        out = eval(self._code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else np.asarray(out, dtype=float)

    def __repr__(self) -> str:
        return f"Expression({self.text!r})"


def compile_expression(text: str, variables: Iterable[str] = ("x", "y", "t"),
                       dims: dict[str, int] | None = None) -> Expression:
    return Expression(text, variables, dims)
