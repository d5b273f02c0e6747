"""Equation AST: the typed tree every other module renders, rewrites or ranks.

All node types are immutable (frozen dataclasses), so trees can be shared
freely across threads and rewrites always build new trees.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields, replace
from typing import Iterator, Optional, Union

# Binary operator tags.
ADD = "add"
SUB = "sub"
MUL = "mul"
IMUL = "implicit-mul"
EQ = "eq"
LT = "lt"
GT = "gt"
LE = "le"
GE = "ge"

BINARY_OPS = frozenset({ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE})
RELATIONS = frozenset({EQ, LT, GT, LE, GE})

GREEK_NAMES = (
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota", "kappa", "lambda", "mu", "nu", "xi", "omicron", "pi", "rho",
    "sigma", "tau", "upsilon", "phi", "chi", "psi", "omega",
    # variant forms
    "varepsilon", "vartheta", "varpi", "varrho", "varsigma", "varphi",
    # capitalized forms
    "Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi", "Sigma", "Upsilon",
    "Phi", "Psi", "Omega",
)
GREEK_NAME_SET = frozenset(GREEK_NAMES)

BUILTIN_FUNCTIONS = frozenset({"sin", "cos", "tan", "log", "ln", "exp"})

_NUMBER_RE = re.compile(r"^\d+(\.\d+)?$")
_ZERO_RE = re.compile(r"^0+(\.0+)?$")


class InvalidExpressionError(ValueError):
    """Raised when a tree violates the AST invariants."""


@dataclass(frozen=True)
class Number:
    """Numeric literal kept as the exact decimal string the user produced."""

    value: str


@dataclass(frozen=True)
class Ident:
    name: str
    subscript: Optional["Expr"] = None


@dataclass(frozen=True)
class GreekLetter:
    name: str
    subscript: Optional["Expr"] = None


@dataclass(frozen=True)
class Infinity:
    pass


@dataclass(frozen=True)
class BinaryOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Fraction:
    numerator: "Expr"
    denominator: "Expr"


@dataclass(frozen=True)
class Power:
    base: "Expr"
    exponent: "Expr"


@dataclass(frozen=True)
class Root:
    degree: Optional["Expr"]
    radicand: "Expr"


@dataclass(frozen=True)
class FunctionApp:
    """Application of a named function; builtin names render as macros,
    anything else renders as an operatorname."""

    name: str
    argument: "Expr"


@dataclass(frozen=True)
class Integral:
    lower: Optional["Expr"]
    upper: Optional["Expr"]
    integrand: "Expr"
    variable: Ident


@dataclass(frozen=True)
class Sum:
    index: Ident
    lower: "Expr"
    upper: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Product:
    index: Ident
    lower: "Expr"
    upper: "Expr"
    body: "Expr"


@dataclass(frozen=True)
class Derivative:
    order: int
    partial: bool
    variable: Ident
    body: "Expr"


@dataclass(frozen=True)
class Group:
    """Explicit parentheses as written by the user; semantically inert."""

    inner: "Expr"


Expr = Union[
    Number, Ident, GreekLetter, Infinity, BinaryOp, Neg, Fraction, Power,
    Root, FunctionApp, Integral, Sum, Product, Derivative, Group,
]


def children(expr: Expr) -> Iterator[Expr]:
    """Yield direct subexpressions in a fixed left-to-right order."""
    for f in fields(expr):
        v = getattr(expr, f.name)
        if isinstance(v, (Number, Ident, GreekLetter, Infinity, BinaryOp, Neg,
                          Fraction, Power, Root, FunctionApp, Integral, Sum,
                          Product, Derivative, Group)):
            yield v


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order, left-to-right traversal over every node."""
    yield expr
    for c in children(expr):
        yield from walk(c)


def normalize(expr: Expr) -> Expr:
    """Canonical form used by structural comparison and the round-trip law.

    Erases Group nodes (the tree shape already fixes evaluation order),
    left-nests mul / implicit-mul chains, and rewrites the macro-less
    GreekLetter("omicron") to Ident("o").
    """
    if isinstance(expr, Number) or isinstance(expr, Infinity):
        return expr
    if isinstance(expr, Ident):
        if expr.subscript is None:
            return expr
        return Ident(expr.name, normalize(expr.subscript))
    if isinstance(expr, GreekLetter):
        sub = normalize(expr.subscript) if expr.subscript is not None else None
        if expr.name == "omicron":
            return Ident("o", sub)
        return GreekLetter(expr.name, sub)
    if isinstance(expr, Group):
        return normalize(expr.inner)
    if isinstance(expr, BinaryOp):
        left = normalize(expr.left)
        right = normalize(expr.right)
        if expr.op in (MUL, IMUL):
            terms = _flatten(left, expr.op) + _flatten(right, expr.op)
            acc = terms[0]
            for t in terms[1:]:
                acc = BinaryOp(expr.op, acc, t)
            return acc
        return BinaryOp(expr.op, left, right)
    if isinstance(expr, Neg):
        return Neg(normalize(expr.operand))
    if isinstance(expr, Fraction):
        return Fraction(normalize(expr.numerator), normalize(expr.denominator))
    if isinstance(expr, Power):
        return Power(normalize(expr.base), normalize(expr.exponent))
    if isinstance(expr, Root):
        deg = normalize(expr.degree) if expr.degree is not None else None
        return Root(deg, normalize(expr.radicand))
    if isinstance(expr, FunctionApp):
        return FunctionApp(expr.name, normalize(expr.argument))
    if isinstance(expr, Integral):
        return Integral(
            normalize(expr.lower) if expr.lower is not None else None,
            normalize(expr.upper) if expr.upper is not None else None,
            normalize(expr.integrand),
            _normalize_ident(expr.variable),
        )
    if isinstance(expr, (Sum, Product)):
        return type(expr)(_normalize_ident(expr.index), normalize(expr.lower),
                          normalize(expr.upper), normalize(expr.body))
    if isinstance(expr, Derivative):
        return Derivative(expr.order, expr.partial,
                          _normalize_ident(expr.variable), normalize(expr.body))
    raise TypeError(f"not an Expr: {expr!r}")


def _normalize_ident(ident: Ident) -> Ident:
    if ident.subscript is None:
        return ident
    return Ident(ident.name, normalize(ident.subscript))


def _flatten(expr: Expr, op: str) -> list:
    if isinstance(expr, BinaryOp) and expr.op == op:
        return _flatten(expr.left, op) + _flatten(expr.right, op)
    return [expr]


def structurally_equal(a: Expr, b: Expr) -> bool:
    """Equality on normalized forms; reflexive, symmetric, transitive."""
    return normalize(a) == normalize(b)


def validate_expr(expr: Expr) -> None:
    """Raise InvalidExpressionError if the tree breaks an invariant.

    Checks the decimal grammar of Number values, the closed Greek enum,
    binary operator tags, derivative order, and (on the normalized tree)
    that no fraction has a literal-zero denominator.
    """
    _validate(expr)
    for node in walk(normalize(expr)):
        if isinstance(node, Fraction) and isinstance(node.denominator, Number):
            if _ZERO_RE.match(node.denominator.value):
                raise InvalidExpressionError(
                    "fraction denominator is the literal zero")


def _validate(expr: Expr) -> None:
    if isinstance(expr, Number):
        if not _NUMBER_RE.match(expr.value):
            raise InvalidExpressionError(f"bad number literal: {expr.value!r}")
        return
    if isinstance(expr, Ident):
        if not expr.name or not expr.name.isalpha():
            raise InvalidExpressionError(f"bad identifier name: {expr.name!r}")
    if isinstance(expr, GreekLetter) and expr.name not in GREEK_NAME_SET:
        raise InvalidExpressionError(f"unknown Greek letter: {expr.name!r}")
    if isinstance(expr, BinaryOp) and expr.op not in BINARY_OPS:
        raise InvalidExpressionError(f"unknown operator: {expr.op!r}")
    if isinstance(expr, Derivative) and expr.order < 1:
        raise InvalidExpressionError("derivative order must be >= 1")
    if isinstance(expr, FunctionApp):
        if not expr.name or not expr.name.isalpha():
            raise InvalidExpressionError(f"bad function name: {expr.name!r}")
    if isinstance(expr, (Integral, Sum, Product, Derivative)):
        var = expr.variable if isinstance(expr, (Integral, Derivative)) else expr.index
        if not isinstance(var, Ident):
            raise InvalidExpressionError("binder variable must be an Ident")
    for c in children(expr):
        _validate(c)


def free_idents(expr: Expr) -> set:
    """Free Ident nodes (normalized), respecting integral / sum / product /
    derivative binders. Used for the default-differential rule."""
    out: set = set()
    _free_idents(normalize(expr), out, frozenset())
    return out


def _free_idents(expr: Expr, out: set, bound: frozenset) -> None:
    if isinstance(expr, Ident):
        if expr not in bound:
            out.add(expr)
        if expr.subscript is not None:
            _free_idents(expr.subscript, out, bound)
        return
    if isinstance(expr, Integral):
        for b in (expr.lower, expr.upper):
            if b is not None:
                _free_idents(b, out, bound)
        _free_idents(expr.integrand, out, bound | {expr.variable})
        return
    if isinstance(expr, (Sum, Product)):
        _free_idents(expr.lower, out, bound)
        _free_idents(expr.upper, out, bound)
        _free_idents(expr.body, out, bound | {expr.index})
        return
    if isinstance(expr, Derivative):
        _free_idents(expr.body, out, bound | {expr.variable})
        return
    for c in children(expr):
        _free_idents(c, out, bound)


# JSON encoding shared by the workspace file format and the HTTP API.

def expr_to_json(expr: Expr) -> dict:
    if isinstance(expr, Number):
        return {"kind": "number", "value": expr.value}
    if isinstance(expr, Ident):
        return {"kind": "ident", "name": expr.name,
                "subscript": _opt_json(expr.subscript)}
    if isinstance(expr, GreekLetter):
        return {"kind": "greek", "name": expr.name,
                "subscript": _opt_json(expr.subscript)}
    if isinstance(expr, Infinity):
        return {"kind": "infinity"}
    if isinstance(expr, BinaryOp):
        return {"kind": "binop", "op": expr.op,
                "left": expr_to_json(expr.left),
                "right": expr_to_json(expr.right)}
    if isinstance(expr, Neg):
        return {"kind": "neg", "operand": expr_to_json(expr.operand)}
    if isinstance(expr, Fraction):
        return {"kind": "fraction", "numerator": expr_to_json(expr.numerator),
                "denominator": expr_to_json(expr.denominator)}
    if isinstance(expr, Power):
        return {"kind": "power", "base": expr_to_json(expr.base),
                "exponent": expr_to_json(expr.exponent)}
    if isinstance(expr, Root):
        return {"kind": "root", "degree": _opt_json(expr.degree),
                "radicand": expr_to_json(expr.radicand)}
    if isinstance(expr, FunctionApp):
        return {"kind": "function", "name": expr.name,
                "argument": expr_to_json(expr.argument)}
    if isinstance(expr, Integral):
        return {"kind": "integral", "lower": _opt_json(expr.lower),
                "upper": _opt_json(expr.upper),
                "integrand": expr_to_json(expr.integrand),
                "variable": expr_to_json(expr.variable)}
    if isinstance(expr, Sum):
        return {"kind": "sum", "index": expr_to_json(expr.index),
                "lower": expr_to_json(expr.lower),
                "upper": expr_to_json(expr.upper),
                "body": expr_to_json(expr.body)}
    if isinstance(expr, Product):
        return {"kind": "product", "index": expr_to_json(expr.index),
                "lower": expr_to_json(expr.lower),
                "upper": expr_to_json(expr.upper),
                "body": expr_to_json(expr.body)}
    if isinstance(expr, Derivative):
        return {"kind": "derivative", "order": expr.order,
                "partial": expr.partial,
                "variable": expr_to_json(expr.variable),
                "body": expr_to_json(expr.body)}
    if isinstance(expr, Group):
        return {"kind": "group", "inner": expr_to_json(expr.inner)}
    raise TypeError(f"not an Expr: {expr!r}")


def _opt_json(expr: Optional[Expr]):
    return expr_to_json(expr) if expr is not None else None


class ExprDecodeError(ValueError):
    """Raised on a structurally invalid JSON encoding; carries the path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def expr_from_json(data, path: str = "expr") -> Expr:
    if not isinstance(data, dict):
        raise ExprDecodeError(path, "expected an object")
    kind = data.get("kind")
    try:
        if kind == "number":
            return Number(_req_str(data, "value", path))
        if kind == "ident":
            return Ident(_req_str(data, "name", path),
                         _opt_from(data, "subscript", path))
        if kind == "greek":
            return GreekLetter(_req_str(data, "name", path),
                               _opt_from(data, "subscript", path))
        if kind == "infinity":
            return Infinity()
        if kind == "binop":
            return BinaryOp(_req_str(data, "op", path),
                            expr_from_json(data["left"], path + ".left"),
                            expr_from_json(data["right"], path + ".right"))
        if kind == "neg":
            return Neg(expr_from_json(data["operand"], path + ".operand"))
        if kind == "fraction":
            return Fraction(
                expr_from_json(data["numerator"], path + ".numerator"),
                expr_from_json(data["denominator"], path + ".denominator"))
        if kind == "power":
            return Power(expr_from_json(data["base"], path + ".base"),
                         expr_from_json(data["exponent"], path + ".exponent"))
        if kind == "root":
            return Root(_opt_from(data, "degree", path),
                        expr_from_json(data["radicand"], path + ".radicand"))
        if kind == "function":
            return FunctionApp(_req_str(data, "name", path),
                               expr_from_json(data["argument"],
                                              path + ".argument"))
        if kind == "integral":
            var = expr_from_json(data["variable"], path + ".variable")
            if not isinstance(var, Ident):
                raise ExprDecodeError(path + ".variable", "must be an ident")
            return Integral(_opt_from(data, "lower", path),
                            _opt_from(data, "upper", path),
                            expr_from_json(data["integrand"],
                                           path + ".integrand"), var)
        if kind in ("sum", "product"):
            idx = expr_from_json(data["index"], path + ".index")
            if not isinstance(idx, Ident):
                raise ExprDecodeError(path + ".index", "must be an ident")
            cls = Sum if kind == "sum" else Product
            return cls(idx, expr_from_json(data["lower"], path + ".lower"),
                       expr_from_json(data["upper"], path + ".upper"),
                       expr_from_json(data["body"], path + ".body"))
        if kind == "derivative":
            var = expr_from_json(data["variable"], path + ".variable")
            if not isinstance(var, Ident):
                raise ExprDecodeError(path + ".variable", "must be an ident")
            order = data.get("order")
            if not isinstance(order, int):
                raise ExprDecodeError(path + ".order", "must be an integer")
            return Derivative(order, bool(data.get("partial", False)), var,
                              expr_from_json(data["body"], path + ".body"))
        if kind == "group":
            return Group(expr_from_json(data["inner"], path + ".inner"))
    except KeyError as exc:
        raise ExprDecodeError(path, f"missing field {exc.args[0]!r}") from None
    raise ExprDecodeError(path, f"unknown expression kind: {kind!r}")


def _req_str(data: dict, key: str, path: str) -> str:
    v = data.get(key)
    if not isinstance(v, str):
        raise ExprDecodeError(f"{path}.{key}", "must be a string")
    return v


def _opt_from(data: dict, key: str, path: str) -> Optional[Expr]:
    v = data.get(key)
    if v is None:
        return None
    return expr_from_json(v, f"{path}.{key}")
