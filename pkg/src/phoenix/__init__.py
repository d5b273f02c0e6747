"""Phoenix: voice-driven math workspace engine."""

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, InvalidExpressionError, Neg, Number, Power,
    Product, Root, Sum, normalize, structurally_equal, validate_expr,
)
from .latex import (
    LatexSyntaxError, RenderOptions, parse_latex, render_latex,
)
from .mathml import UnsupportedInProfile, render_mathml

__all__ = [
    "ADD", "SUB", "MUL", "IMUL", "EQ", "LT", "GT", "LE", "GE",
    "BinaryOp", "Derivative", "Expr", "Fraction", "FunctionApp",
    "GreekLetter", "Group", "Ident", "Infinity", "Integral",
    "InvalidExpressionError", "Neg", "Number", "Power", "Product", "Root",
    "Sum", "normalize", "structurally_equal", "validate_expr",
    "LatexSyntaxError", "RenderOptions", "parse_latex", "render_latex",
    "UnsupportedInProfile", "render_mathml",
]

__version__ = "0.1.0"
