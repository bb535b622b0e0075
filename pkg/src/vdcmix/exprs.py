"""Restricted arithmetic-expression evaluation for configs and presets.

Only numeric literals, + - * / **, unary minus, parentheses, lists, tuples and
whitelisted function calls are accepted. Integer and ``p/q`` arithmetic stays
exact; ``sqrt``/``pi`` etc. switch to the supplied mpmath context.
"""

from __future__ import annotations

import ast
import operator
from fractions import Fraction
from typing import Callable, Mapping, Optional

import mpmath

from .errors import ConfigError

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}


def _mp_functions(ctx) -> dict:
    def wrap(fn):
        return lambda *args: fn(*(_to_mp(a, ctx) for a in args))

    return {name: wrap(getattr(ctx, name)) for name in ("sqrt", "exp", "log", "cos", "sin")}


def _to_mp(x, ctx):
    if isinstance(x, Fraction):
        return ctx.mpf(x.numerator) / x.denominator
    return ctx.mpf(x) if isinstance(x, (int, float)) else x


def evaluate(text: str, ctx=None, calls: Optional[Mapping[str, Callable]] = None,
             names: Optional[Mapping[str, object]] = None):
    """Evaluate ``text`` with exact rationals where possible.

    ``calls`` maps extra function names to callables receiving evaluated
    arguments; ``names`` supplies bare identifiers.
    """
    ctx = ctx or mpmath.mp
    funcs = _mp_functions(ctx)
    funcs.update(calls or {})
    consts = {"pi": ctx.pi, "e": ctx.e}
    consts.update(names or {})
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float, str)):
                raise ConfigError(f"unsupported literal {node.value!r} in {text!r}")
            if isinstance(node.value, float):
                # decimal literals are read exactly as written
                return Fraction(ast.get_source_segment(text.strip(), node) or repr(node.value))
            return node.value if isinstance(node.value, str) else Fraction(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Pow) and isinstance(b, Fraction) and b.denominator != 1:
                a = _to_mp(a, ctx)
            elif isinstance(a, Fraction) != isinstance(b, Fraction):
                a, b = _to_mp(a, ctx), _to_mp(b, ctx)
            try:
                out = _BINOPS[type(node.op)](a, b)
            except ZeroDivisionError:
                raise ConfigError(f"division by zero in {text!r}") from None
            return out
        if isinstance(node, (ast.List, ast.Tuple)):
            return [ev(e) for e in node.elts]
        if isinstance(node, ast.Name):
            if node.id in consts:
                return consts[node.id]
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
            fn = funcs.get(node.func.id)
            if fn is None:
                raise ConfigError(f"unknown function {node.func.id!r} in {text!r}")
            return fn(*(ev(a) for a in node.args))
        raise ConfigError(f"unsupported syntax in {text!r}")

    return ev(tree)
