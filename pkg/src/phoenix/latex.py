"""LaTeX emission and parsing for the equation AST.

The renderer is total and deterministic on valid trees; the parser accepts
exactly the emitted subset plus a few documented synonyms (\\dfrac, \\le,
\\ge, \\left / \\right fences, \\cdots which is ignored). The grammar is
written out in docs/latex-subset.md.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE, RELATIONS,
    BUILTIN_FUNCTIONS, GREEK_NAME_SET,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, Neg, Number, Power, Product, Root, Sum,
)

# Precedence levels used for parenthesization. Higher binds tighter.
PREC_REL = 1
PREC_ADD = 2
PREC_SUMLIKE = 3   # sum / product / derivative: bodies absorb factors
PREC_MUL = 4
PREC_NEG = 5
PREC_POW = 6
PREC_ATOM = 7

_OP_PREC = {ADD: PREC_ADD, SUB: PREC_ADD, MUL: PREC_MUL, IMUL: PREC_MUL,
            EQ: PREC_REL, LT: PREC_REL, GT: PREC_REL, LE: PREC_REL,
            GE: PREC_REL}

_OP_LATEX = {ADD: "+", SUB: "-", MUL: "\\cdot", EQ: "=", LT: "<", GT: ">",
             LE: "\\leq", GE: "\\geq"}

_FN_LATEX = {"sin": "\\sin", "cos": "\\cos", "tan": "\\tan", "log": "\\log",
             "ln": "\\ln", "exp": "\\exp"}


@dataclass(frozen=True)
class RenderOptions:
    """Output preferences; defaults match the shipped rendering style.

    lowercase_default is reserved for a future letter-casing preference and
    currently has no rendering effect.
    """

    spacing_before_differential: bool = True
    implicit_mul_style: str = "juxtaposition"  # or "cdot"
    lowercase_default: bool = True


DEFAULT_RENDER_OPTIONS = RenderOptions()


def precedence(expr: Expr) -> int:
    if isinstance(expr, BinaryOp):
        return _OP_PREC[expr.op]
    if isinstance(expr, Neg):
        return PREC_NEG
    if isinstance(expr, Power):
        return PREC_POW
    if isinstance(expr, (Sum, Product, Derivative)):
        return PREC_SUMLIKE
    return PREC_ATOM


def render_latex(expr: Expr, opts: RenderOptions = DEFAULT_RENDER_OPTIONS) -> str:
    """Deterministic LaTeX for a valid tree; parentheses are inserted purely
    from precedence so evaluation order survives re-parsing."""
    return _render(expr, 0, opts)


def _render(expr: Expr, required: int, opts: RenderOptions) -> str:
    s = _render_node(expr, opts)
    if precedence(expr) < required:
        return f"({s})"
    return s


def _render_node(expr: Expr, opts: RenderOptions) -> str:
    if isinstance(expr, Number):
        return expr.value
    if isinstance(expr, Ident):
        return expr.name + _subscript(expr.subscript, opts)
    if isinstance(expr, GreekLetter):
        if expr.name == "omicron":
            return "o" + _subscript(expr.subscript, opts)
        return "\\" + expr.name + _subscript(expr.subscript, opts)
    if isinstance(expr, Infinity):
        return "\\infty"
    if isinstance(expr, BinaryOp):
        own = _OP_PREC[expr.op]
        left = _render(expr.left, own, opts)
        if expr.op == IMUL:
            right = _render(expr.right, PREC_POW, opts)
            if opts.implicit_mul_style == "cdot":
                return f"{left} \\cdot {right}"
            return f"{left} {right}"
        if expr.op == MUL:
            right = _render(expr.right, PREC_POW, opts)
            return f"{left} \\cdot {right}"
        right_required = own + 1
        right = _render(expr.right, right_required, opts)
        if isinstance(expr.right, Neg):
            right = f"({_render_node(expr.right, opts)})"
        return f"{left} {_OP_LATEX[expr.op]} {right}"
    if isinstance(expr, Neg):
        return "-" + _render(expr.operand, PREC_NEG, opts)
    if isinstance(expr, Fraction):
        num = _render(expr.numerator, 0, opts)
        den = _render(expr.denominator, 0, opts)
        return f"\\frac{{{num}}}{{{den}}}"
    if isinstance(expr, Power):
        base = _render(expr.base, PREC_ATOM, opts)
        if isinstance(expr.base, (Integral, Sum, Product, Derivative)):
            base = f"({_render_node(expr.base, opts)})"
        return base + "^" + _script(expr.exponent, opts)
    if isinstance(expr, Root):
        rad = _render(expr.radicand, 0, opts)
        if expr.degree is None:
            return f"\\sqrt{{{rad}}}"
        return f"\\sqrt[{_render(expr.degree, 0, opts)}]{{{rad}}}"
    if isinstance(expr, FunctionApp):
        arg = _render(expr.argument, 0, opts)
        macro = _FN_LATEX.get(expr.name)
        if macro is not None:
            return f"{macro}({arg})"
        return f"\\operatorname{{{expr.name}}}({arg})"
    if isinstance(expr, Integral):
        head = "\\int"
        if expr.lower is not None:
            head += "_" + _script(expr.lower, opts)
        if expr.upper is not None:
            head += "^" + _script(expr.upper, opts)
        body = _render(expr.integrand, PREC_ADD, opts)
        diff = "\\, d" if opts.spacing_before_differential else "d"
        var = _render_node(expr.variable, opts)
        return f"{head} {body} {diff}{var}"
    if isinstance(expr, (Sum, Product)):
        macro = "\\sum" if isinstance(expr, Sum) else "\\prod"
        idx = _render_node(expr.index, opts)
        lo = _render(expr.lower, PREC_ADD, opts)
        hi = _script(expr.upper, opts)
        body = _render(expr.body, PREC_MUL, opts)
        return f"{macro}_{{{idx}={lo}}}^{hi} {body}"
    if isinstance(expr, Derivative):
        sym = "\\partial " if expr.partial else "d"
        order = "" if expr.order == 1 else "^" + _int_script(expr.order)
        var = _render_node(expr.variable, opts)
        num = sym.strip() + order
        den = f"{sym}{var}{order}"
        body = _render(expr.body, PREC_MUL, opts)
        return f"\\frac{{{num}}}{{{den}}} {body}"
    if isinstance(expr, Group):
        return f"({_render(expr.inner, 0, opts)})"
    raise TypeError(f"not an Expr: {expr!r}")


def _script(expr: Expr, opts: RenderOptions) -> str:
    s = _render(expr, 0, opts)
    return s if len(s) == 1 else "{" + s + "}"


def _int_script(n: int) -> str:
    s = str(n)
    return s if len(s) == 1 else "{" + s + "}"


def _subscript(sub: Optional[Expr], opts: RenderOptions) -> str:
    if sub is None:
        return ""
    return "_" + _script(sub, opts)


class LatexSyntaxError(ValueError):
    """Parse failure; offset is the character position in the input."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


# Tokenizer

_T_CMD = "cmd"
_T_NUM = "num"
_T_LETTER = "letter"
_T_SYM = "sym"
_T_THINSPACE = "thinspace"
_T_EOF = "eof"

_SYMBOL_CHARS = set("^_{}()+-=<>[]")
_IGNORED_CMDS = frozenset({"cdots", ";", ":", "!", "quad", "qquad"})
_CMD_ALIASES = {"dfrac": "frac", "le": "leq", "ge": "geq"}
_KNOWN_CMDS = (
    frozenset({"int", "sum", "prod", "frac", "sqrt", "operatorname", "infty",
               "partial", "cdot", "leq", "geq"})
    | BUILTIN_FUNCTIONS
    | GREEK_NAME_SET
)


@dataclass
class _Token:
    kind: str
    text: str
    offset: int


def _tokenize_latex(source: str) -> List[_Token]:
    tokens: List[_Token] = []
    i = 0
    n = len(source)
    while i < n:
        c = source[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c == "\\":
            j = i + 1
            while j < n and source[j].isalpha():
                j += 1
            if j == i + 1:
                if j < n and source[j] == ",":
                    tokens.append(_Token(_T_THINSPACE, "\\,", i))
                    i = j + 1
                    continue
                if j < n and source[j] in ";:!":
                    i = j + 1
                    continue
                raise LatexSyntaxError("stray backslash", i)
            name = source[i + 1:j]
            name = _CMD_ALIASES.get(name, name)
            if name in _IGNORED_CMDS:
                i = j
                continue
            if name in ("left", "right"):
                k = j
                while k < n and source[k] in " \t":
                    k += 1
                if k < n and source[k] in "()":
                    tokens.append(_Token(_T_SYM, source[k], i))
                    i = k + 1
                    continue
                raise LatexSyntaxError(f"\\{name} must be followed by ( or )", i)
            if name not in _KNOWN_CMDS:
                raise LatexSyntaxError(f"unknown command \\{name}", i)
            tokens.append(_Token(_T_CMD, name, i))
            i = j
            continue
        if c.isdigit():
            j = i + 1
            while j < n and source[j].isdigit():
                j += 1
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            tokens.append(_Token(_T_NUM, source[i:j], i))
            i = j
            continue
        if c.isalpha():
            tokens.append(_Token(_T_LETTER, c, i))
            i += 1
            continue
        if c in _SYMBOL_CHARS:
            tokens.append(_Token(_T_SYM, c, i))
            i += 1
            continue
        raise LatexSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(_Token(_T_EOF, "", n))
    return tokens


_REL_SYMS = {"=": EQ, "<": LT, ">": GT}
_REL_CMDS = {"leq": LE, "geq": GE}


@dataclass
class _Parser:
    tokens: List[_Token]
    pos: int = 0
    in_integrand: bool = field(default=False)

    def cur(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def at_sym(self, text: str) -> bool:
        t = self.cur()
        return t.kind == _T_SYM and t.text == text

    def expect_sym(self, text: str) -> _Token:
        t = self.cur()
        if t.kind != _T_SYM or t.text != text:
            if t.kind == _T_EOF:
                raise LatexSyntaxError(f"expected {text!r}, found end of input",
                                       t.offset)
            raise LatexSyntaxError(f"expected {text!r}, found {t.text!r}",
                                   t.offset)
        return self.advance()

    def error(self, message: str) -> LatexSyntaxError:
        t = self.cur()
        return LatexSyntaxError(message, t.offset)

    # grammar levels

    def parse_relation(self) -> Expr:
        left = self.parse_additive()
        while True:
            t = self.cur()
            op = None
            if t.kind == _T_SYM and t.text in _REL_SYMS:
                op = _REL_SYMS[t.text]
            elif t.kind == _T_CMD and t.text in _REL_CMDS:
                op = _REL_CMDS[t.text]
            if op is None:
                return left
            self.advance()
            right = self.parse_additive()
            left = BinaryOp(op, left, right)

    def parse_additive(self) -> Expr:
        left = self.parse_term()
        while True:
            t = self.cur()
            if t.kind == _T_SYM and t.text in "+-":
                self.advance()
                right = self.parse_term()
                left = BinaryOp(ADD if t.text == "+" else SUB, left, right)
            else:
                return left

    def parse_term(self) -> Expr:
        left = self.parse_factor()
        while True:
            t = self.cur()
            if t.kind == _T_CMD and t.text == "cdot":
                self.advance()
                right = self.parse_factor()
                left = BinaryOp(MUL, left, right)
                continue
            if self._at_differential():
                return left
            if self._starts_primary(t):
                right = self.parse_power()
                left = BinaryOp(IMUL, left, right)
                continue
            return left

    def parse_factor(self) -> Expr:
        if self.at_sym("-"):
            self.advance()
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_primary()
        if self.at_sym("^"):
            self.advance()
            exponent = self.parse_script()
            result: Expr = Power(base, exponent)
            if self.at_sym("^"):
                raise self.error("double superscript")
            return result
        return base

    def parse_script(self) -> Expr:
        t = self.cur()
        if self.at_sym("{"):
            return self.parse_brace_group()
        if t.kind == _T_NUM:
            if len(t.text) > 1:
                raise self.error("unbraced multi-character script")
            self.advance()
            return Number(t.text)
        if t.kind == _T_LETTER:
            self.advance()
            return Ident(t.text)
        if t.kind == _T_CMD and t.text in GREEK_NAME_SET:
            self.advance()
            return GreekLetter(t.text)
        if t.kind == _T_CMD and t.text == "infty":
            self.advance()
            return Infinity()
        raise self.error("expected a script")

    def parse_brace_group(self) -> Expr:
        open_off = self.cur().offset
        self.expect_sym("{")
        saved = self.in_integrand
        self.in_integrand = False
        try:
            inner = self.parse_relation()
        except LatexSyntaxError:
            if self.cur().kind == _T_EOF:
                raise LatexSyntaxError("unterminated group", open_off) from None
            raise
        finally:
            self.in_integrand = saved
        if self.cur().kind == _T_EOF:
            raise LatexSyntaxError("unterminated group", open_off)
        self.expect_sym("}")
        return inner

    def _starts_primary(self, t: _Token) -> bool:
        if t.kind in (_T_NUM, _T_LETTER):
            return True
        if t.kind == _T_SYM and t.text == "(":
            return True
        if t.kind == _T_CMD:
            return (t.text in ("int", "sum", "prod", "frac", "sqrt",
                               "operatorname", "infty")
                    or t.text in BUILTIN_FUNCTIONS
                    or t.text in GREEK_NAME_SET)
        return False

    def _at_differential(self) -> bool:
        # Inside an integrand a top-level "d" followed by a letter is always
        # the differential (see docs/latex-subset.md).
        if not self.in_integrand:
            return False
        t = self.cur()
        if t.kind == _T_THINSPACE:
            return True
        nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
        return (t.kind == _T_LETTER and t.text == "d"
                and nxt is not None and nxt.kind == _T_LETTER)

    def parse_primary(self) -> Expr:
        t = self.cur()
        if t.kind == _T_NUM:
            self.advance()
            return Number(t.text)
        if t.kind == _T_LETTER:
            self.advance()
            return Ident(t.text, self._maybe_subscript())
        if t.kind == _T_SYM and t.text == "(":
            self.advance()
            saved = self.in_integrand
            self.in_integrand = False
            inner = self.parse_relation()
            self.in_integrand = saved
            self.expect_sym(")")
            return Group(inner)
        if t.kind == _T_CMD:
            if t.text in GREEK_NAME_SET:
                self.advance()
                return GreekLetter(t.text, self._maybe_subscript())
            if t.text == "infty":
                self.advance()
                return Infinity()
            if t.text == "frac":
                return self.parse_frac_or_derivative()
            if t.text == "sqrt":
                return self.parse_root()
            if t.text in BUILTIN_FUNCTIONS:
                self.advance()
                self.expect_sym("(")
                arg = self.parse_relation()
                self.expect_sym(")")
                return FunctionApp(t.text, arg)
            if t.text == "operatorname":
                return self.parse_operatorname()
            if t.text == "int":
                return self.parse_integral()
            if t.text in ("sum", "prod"):
                return self.parse_sum_product()
        if t.kind == _T_EOF:
            raise self.error("expected an expression, found end of input")
        raise self.error(f"unexpected token {t.text!r}")

    def _maybe_subscript(self) -> Optional[Expr]:
        if self.at_sym("_"):
            self.advance()
            return self.parse_script()
        return None

    def parse_frac_or_derivative(self) -> Expr:
        start = self.pos
        self.advance()  # frac
        deriv = self._try_derivative()
        if deriv is not None:
            return deriv
        self.pos = start + 1
        num = self.parse_brace_group()
        den = self.parse_brace_group()
        return Fraction(num, den)

    def _try_derivative(self) -> Optional[Expr]:
        save = self.pos
        saved_flag = self.in_integrand
        try:
            self.in_integrand = False
            self.expect_sym("{")
            partial, order = self._derivative_symbol()
            self.expect_sym("}")
            self.expect_sym("{")
            partial2, _ = self._derivative_symbol(expect_order=False)
            if partial2 != partial:
                raise self.error("mixed derivative symbols")
            var_tok = self.cur()
            if var_tok.kind != _T_LETTER:
                raise self.error("expected derivative variable")
            self.advance()
            var = Ident(var_tok.text, self._maybe_subscript())
            if self.at_sym("^"):
                self.advance()
                o2 = self.parse_script()
                if not (isinstance(o2, Number) and o2.value == str(order)):
                    raise self.error("derivative order mismatch")
            elif order != 1:
                raise self.error("derivative order mismatch")
            self.expect_sym("}")
            self.in_integrand = saved_flag
            body = self.parse_term()
            return Derivative(order, partial, var, body)
        except LatexSyntaxError:
            self.pos = save
            self.in_integrand = saved_flag
            return None

    def _derivative_symbol(self, expect_order: bool = True):
        t = self.cur()
        if t.kind == _T_LETTER and t.text == "d":
            partial = False
        elif t.kind == _T_CMD and t.text == "partial":
            partial = True
        else:
            raise self.error("not a derivative symbol")
        self.advance()
        order = 1
        if expect_order and self.at_sym("^"):
            self.advance()
            script = self.parse_script()
            if not (isinstance(script, Number) and script.value.isdigit()
                    and int(script.value) >= 1):
                raise self.error("derivative order must be a positive integer")
            order = int(script.value)
        return partial, order

    def parse_root(self) -> Expr:
        self.advance()  # sqrt
        degree = None
        if self.at_sym("["):
            self.advance()
            saved = self.in_integrand
            self.in_integrand = False
            degree = self.parse_relation()
            self.in_integrand = saved
            self.expect_sym("]")
        radicand = self.parse_brace_group()
        return Root(degree, radicand)

    def parse_operatorname(self) -> Expr:
        self.advance()
        self.expect_sym("{")
        name = ""
        while self.cur().kind == _T_LETTER:
            name += self.advance().text
        if not name:
            raise self.error("empty operatorname")
        self.expect_sym("}")
        self.expect_sym("(")
        arg = self.parse_relation()
        self.expect_sym(")")
        return FunctionApp(name, arg)

    def parse_integral(self) -> Expr:
        self.advance()  # int
        lower = upper = None
        while True:
            if self.at_sym("_") and lower is None:
                self.advance()
                lower = self.parse_script()
            elif self.at_sym("^") and upper is None:
                self.advance()
                upper = self.parse_script()
            else:
                break
        saved = self.in_integrand
        self.in_integrand = True
        integrand = self.parse_additive()
        self.in_integrand = saved
        if self.cur().kind == _T_THINSPACE:
            self.advance()
        t = self.cur()
        if t.kind != _T_LETTER or t.text != "d":
            raise self.error("expected differential (d<var>)")
        self.advance()
        var_tok = self.cur()
        if var_tok.kind != _T_LETTER:
            raise self.error("expected differential variable")
        self.advance()
        var = Ident(var_tok.text, self._maybe_subscript())
        return Integral(lower, upper, integrand, var)

    def parse_sum_product(self) -> Expr:
        kind = self.advance().text
        self.expect_sym("_")
        self.expect_sym("{")
        idx_tok = self.cur()
        if idx_tok.kind != _T_LETTER:
            raise self.error("expected index variable")
        self.advance()
        index = Ident(idx_tok.text, self._maybe_subscript())
        self.expect_sym("=")
        saved = self.in_integrand
        self.in_integrand = False
        lower = self.parse_additive()
        self.in_integrand = saved
        self.expect_sym("}")
        self.expect_sym("^")
        upper = self.parse_script()
        body = self.parse_term()
        cls = Sum if kind == "sum" else Product
        return cls(index, lower, upper, body)


def parse_latex(source: str) -> Expr:
    """Parse the documented LaTeX subset back into a tree.

    Raises LatexSyntaxError with the character offset of the problem.
    Round trip: parse_latex(render_latex(e)) is structurally equal to
    normalize(e) under default render options.
    """
    parser = _Parser(_tokenize_latex(source))
    expr = parser.parse_relation()
    t = parser.cur()
    if t.kind != _T_EOF:
        raise LatexSyntaxError(f"unexpected trailing input {t.text!r}", t.offset)
    return expr
