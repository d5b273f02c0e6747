"""Numeric evaluation of arithmetic trees.

This exists for the test oracles (round-trip agreement, substitution
soundness, rewrite value preservation); it is not a CAS. Environments map
normalized Ident / GreekLetter nodes to floats.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, Mapping, Optional

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, Neg, Number, Power, Product, Root, Sum,
    normalize,
)


class NotEvaluableError(ValueError):
    """The tree contains a construct with no numeric interpretation here."""


_BUILTIN_FUNCS: Dict[str, Callable[[float], float]] = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "log": math.log10,
    "ln": math.log,
    "exp": math.exp,
}


def evaluate(expr: Expr, env: Mapping[Expr, float],
             funcs: Optional[Mapping[str, Callable[[float], float]]] = None) -> float:
    """Evaluate an arithmetic tree; relations evaluate to 1.0 / 0.0."""
    return _eval(normalize(expr), dict(env), funcs or {})


def _eval(expr: Expr, env: Dict[Expr, float],
          funcs: Mapping[str, Callable[[float], float]]) -> float:
    if isinstance(expr, Number):
        return float(expr.value)
    if isinstance(expr, (Ident, GreekLetter)):
        try:
            return env[expr]
        except KeyError:
            raise NotEvaluableError(f"unbound identifier: {expr!r}") from None
    if isinstance(expr, Infinity):
        return math.inf
    if isinstance(expr, BinaryOp):
        a = _eval(expr.left, env, funcs)
        b = _eval(expr.right, env, funcs)
        if expr.op == ADD:
            return a + b
        if expr.op == SUB:
            return a - b
        if expr.op in (MUL, IMUL):
            return a * b
        if expr.op == EQ:
            return 1.0 if a == b else 0.0
        if expr.op == LT:
            return 1.0 if a < b else 0.0
        if expr.op == GT:
            return 1.0 if a > b else 0.0
        if expr.op == LE:
            return 1.0 if a <= b else 0.0
        if expr.op == GE:
            return 1.0 if a >= b else 0.0
    if isinstance(expr, Neg):
        return -_eval(expr.operand, env, funcs)
    if isinstance(expr, Fraction):
        return _eval(expr.numerator, env, funcs) / _eval(expr.denominator,
                                                         env, funcs)
    if isinstance(expr, Power):
        return _eval(expr.base, env, funcs) ** _eval(expr.exponent, env, funcs)
    if isinstance(expr, Root):
        degree = 2.0 if expr.degree is None else _eval(expr.degree, env, funcs)
        return _eval(expr.radicand, env, funcs) ** (1.0 / degree)
    if isinstance(expr, FunctionApp):
        fn = funcs.get(expr.name) or _BUILTIN_FUNCS.get(expr.name)
        if fn is None:
            raise NotEvaluableError(f"unknown function: {expr.name}")
        return fn(_eval(expr.argument, env, funcs))
    if isinstance(expr, (Sum, Product)):
        lo = _eval(expr.lower, env, funcs)
        hi = _eval(expr.upper, env, funcs)
        if not (float(lo).is_integer() and float(hi).is_integer()):
            raise NotEvaluableError("sum/product bounds must be integers")
        total = 0.0 if isinstance(expr, Sum) else 1.0
        for k in range(int(lo), int(hi) + 1):
            inner = dict(env)
            inner[expr.index] = float(k)
            v = _eval(expr.body, inner, funcs)
            total = total + v if isinstance(expr, Sum) else total * v
        return total
    if isinstance(expr, Group):
        return _eval(expr.inner, env, funcs)
    if isinstance(expr, (Integral, Derivative)):
        raise NotEvaluableError(f"{type(expr).__name__} is not evaluable")
    raise TypeError(f"not an Expr: {expr!r}")
