"""Presentation MathML emission, including the Word-compatible profile.

Word only understands a restricted element set, so the emitter sticks to
that allowlist for both profiles; the profile switch exists so a future
"full" profile can diverge. Structure is chosen so a reader can invert it:
implicit multiplication uses U+2062 (invisible times), function application
uses U+2061, negation is a two-child mrow, sum-like operators carry their
bounds in munderover.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, Neg, Number, Power, Product, Root, Sum,
)
from .latex import (
    PREC_ADD, PREC_ATOM, PREC_MUL, PREC_NEG, PREC_POW, precedence,
)

MATHML_NS = "http://www.w3.org/1998/Math/MathML"

# Elements Word accepts as live equation content.
WORD_MATHML_ALLOWLIST = frozenset({
    "math", "mrow", "mi", "mn", "mo", "msub", "msup", "msubsup", "mfrac",
    "msqrt", "mroot", "mtext", "mtable", "mtr", "mtd", "mfenced", "mover",
    "munder", "munderover",
})

# Attributes permitted per element (beyond the namespace declaration).
WORD_MATHML_ATTRIBUTES = {
    "math": frozenset({"display"}),
}

INVISIBLE_TIMES = "⁢"
FUNCTION_APPLICATION = "⁡"
MINUS_SIGN = "−"

_OP_MATHML = {ADD: "+", SUB: MINUS_SIGN, MUL: "⋅", IMUL: INVISIBLE_TIMES,
              EQ: "=", LT: "<", GT: ">", LE: "≤", GE: "≥"}

GREEK_UNICODE = {
    "alpha": "α", "beta": "β", "gamma": "γ",
    "delta": "δ", "epsilon": "ε", "zeta": "ζ",
    "eta": "η", "theta": "θ", "iota": "ι",
    "kappa": "κ", "lambda": "λ", "mu": "μ", "nu": "ν",
    "xi": "ξ", "omicron": "ο", "pi": "π", "rho": "ρ",
    "sigma": "σ", "tau": "τ", "upsilon": "υ",
    "phi": "φ", "chi": "χ", "psi": "ψ", "omega": "ω",
    "varepsilon": "ϵ", "vartheta": "ϑ", "varpi": "ϖ",
    "varrho": "ϱ", "varsigma": "ς", "varphi": "ϕ",
    "Gamma": "Γ", "Delta": "Δ", "Theta": "Θ",
    "Lambda": "Λ", "Xi": "Ξ", "Pi": "Π", "Sigma": "Σ",
    "Upsilon": "Υ", "Phi": "Φ", "Psi": "Ψ",
    "Omega": "Ω",
}
UNICODE_GREEK = {v: k for k, v in GREEK_UNICODE.items()}

INFINITY_CHAR = "∞"
INTEGRAL_CHAR = "∫"
SUM_CHAR = "∑"
PRODUCT_CHAR = "∏"
PARTIAL_CHAR = "∂"


class UnsupportedInProfile(ValueError):
    """Raised when a construct has no encoding under the requested profile."""


def render_mathml(expr: Expr, profile: str = "word_restricted") -> str:
    """Serialize a tree as a <math> element in the MathML namespace."""
    if profile not in ("full", "word_restricted"):
        raise ValueError(f"unknown MathML profile: {profile!r}")
    root = ET.Element("math", {"xmlns": MATHML_NS})
    root.append(_node(expr, 0))
    return ET.tostring(root, encoding="unicode")


def _el(tag: str, *kids: ET.Element, text: str = None) -> ET.Element:
    e = ET.Element(tag)
    if text is not None:
        e.text = text
    for k in kids:
        e.append(k)
    return e


def _node(expr: Expr, required: int) -> ET.Element:
    built = _build(expr)
    if precedence(expr) < required:
        return _el("mfenced", built)
    return built


def _build(expr: Expr) -> ET.Element:
    if isinstance(expr, Number):
        return _el("mn", text=expr.value)
    if isinstance(expr, Ident):
        base = _el("mi", text=expr.name)
        if expr.subscript is None:
            return base
        return _el("msub", base, _node(expr.subscript, 0))
    if isinstance(expr, GreekLetter):
        base = _el("mi", text=GREEK_UNICODE[expr.name])
        if expr.subscript is None:
            return base
        return _el("msub", base, _node(expr.subscript, 0))
    if isinstance(expr, Infinity):
        return _el("mi", text=INFINITY_CHAR)
    if isinstance(expr, BinaryOp):
        own = precedence(expr)
        if expr.op in (MUL, IMUL):
            left = _node(expr.left, own)
            right = _node(expr.right, PREC_POW)
        else:
            left = _node(expr.left, own)
            right = _node(expr.right, own + 1)
            if isinstance(expr.right, Neg):
                right = _el("mfenced", _build(expr.right))
        return _el("mrow", left, _el("mo", text=_OP_MATHML[expr.op]), right)
    if isinstance(expr, Neg):
        return _el("mrow", _el("mo", text=MINUS_SIGN),
                   _node(expr.operand, PREC_NEG))
    if isinstance(expr, Fraction):
        return _el("mfrac", _node(expr.numerator, 0),
                   _node(expr.denominator, 0))
    if isinstance(expr, Power):
        base = _node(expr.base, PREC_ATOM)
        if isinstance(expr.base, (Integral, Sum, Product, Derivative)):
            base = _el("mfenced", _build(expr.base))
        return _el("msup", base, _node(expr.exponent, 0))
    if isinstance(expr, Root):
        if expr.degree is None:
            return _el("msqrt", _node(expr.radicand, 0))
        return _el("mroot", _node(expr.radicand, 0), _node(expr.degree, 0))
    if isinstance(expr, FunctionApp):
        return _el("mrow", _el("mi", text=expr.name),
                   _el("mo", text=FUNCTION_APPLICATION),
                   _el("mfenced", _node(expr.argument, 0)))
    if isinstance(expr, Integral):
        head: ET.Element
        sign = _el("mo", text=INTEGRAL_CHAR)
        if expr.lower is not None and expr.upper is not None:
            head = _el("msubsup", sign, _node(expr.lower, 0),
                       _node(expr.upper, 0))
        elif expr.lower is not None:
            head = _el("msub", sign, _node(expr.lower, 0))
        elif expr.upper is not None:
            head = _el("msup", sign, _node(expr.upper, 0))
        else:
            head = sign
        differential = _el("mrow", _el("mi", text="d"),
                           _build(expr.variable))
        return _el("mrow", head, _node(expr.integrand, PREC_ADD),
                   differential)
    if isinstance(expr, (Sum, Product)):
        char = SUM_CHAR if isinstance(expr, Sum) else PRODUCT_CHAR
        under = _el("mrow", _build(expr.index), _el("mo", text="="),
                    _node(expr.lower, 0))
        head = _el("munderover", _el("mo", text=char), under,
                   _node(expr.upper, 0))
        return _el("mrow", head, _node(expr.body, PREC_MUL))
    if isinstance(expr, Derivative):
        sym = PARTIAL_CHAR if expr.partial else "d"
        num_sym: ET.Element = _el("mi", text=sym)
        if expr.order > 1:
            num_sym = _el("msup", num_sym, _el("mn", text=str(expr.order)))
        den_var: ET.Element = _build(expr.variable)
        if expr.order > 1:
            den_var = _el("msup", den_var, _el("mn", text=str(expr.order)))
        frac = _el("mfrac", _el("mrow", num_sym),
                   _el("mrow", _el("mi", text=sym), den_var))
        return _el("mrow", frac, _node(expr.body, PREC_MUL))
    if isinstance(expr, Group):
        return _el("mfenced", _node(expr.inner, 0))
    raise TypeError(f"not an Expr: {expr!r}")
