"""Spoken edit commands and their AST rewrites.

The deterministic grammar recognizes a closed verb list (change / replace /
swap, substitute / plug in, move, set / make); anything else raises
NotACommand so the caller can fall back to transcription. Rewrites are
value-semantic: the input tree is never mutated. Grammar details in
docs/commands.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, Neg, Number, Power, Product, Root, Sum,
    normalize, structurally_equal,
)
from .lexicon import Lexicon, default_lexicon
from .spoken import (
    K_FILLER, SpokenSyntaxError, SpokenToken, _SpokenParser, tokenize,
)


class NotACommand(ValueError):
    """The utterance does not match any command pattern."""


class TargetNotFound(ValueError):
    """The command names something the expression does not contain."""


class AmbiguousTarget(ValueError):
    """Occurrence 'only' but the expression has several matches."""


@dataclass(frozen=True)
class Occurrence:
    kind: str  # only | first | nth | all
    index: Optional[int] = None

    def __post_init__(self):
        if self.kind == "nth" and (self.index is None or self.index < 1):
            raise ValueError("nth occurrence needs an index >= 1")


ONLY = Occurrence("only")
FIRST = Occurrence("first")
ALL = Occurrence("all")


def nth(k: int) -> Occurrence:
    return Occurrence("nth", k)


@dataclass(frozen=True)
class ChangeOperator:
    from_op: str
    to_op: str
    occurrence: Occurrence = ONLY


@dataclass(frozen=True)
class Substitute:
    target: Ident
    replacement: Expr


@dataclass(frozen=True)
class MoveDenominatorToNumerator:
    occurrence: Occurrence = ONLY


@dataclass(frozen=True)
class ReplaceSubexpr:
    target: Expr
    replacement: Expr


@dataclass(frozen=True)
class SetBound:
    which: str  # lower | upper
    value: Expr


EditCommand = Union[ChangeOperator, Substitute, MoveDenominatorToNumerator,
                    ReplaceSubexpr, SetBound]


_OP_WORDS = {
    "plus": ADD, "minus": SUB, "times": MUL, "equals": EQ, "equal": EQ,
    "less than": LT, "greater than": GT,
    "less than or equal to": LE, "greater than or equal to": GE,
}

_CHANGE_VERBS = {"change", "replace", "swap"}
_SUBST_VERBS = {"substitute", "plug in"}
_ARTICLES = {"the", "a", "an"}

_ORDINAL_OCCURRENCE = {
    "first": FIRST, "second": nth(2), "third": nth(3), "fourth": nth(4),
    "fifth": nth(5), "sixth": nth(6), "seventh": nth(7), "eighth": nth(8),
    "ninth": nth(9), "tenth": nth(10),
}


def _op_from_word(text: str) -> Optional[str]:
    if text in _OP_WORDS:
        return _OP_WORDS[text]
    if text.endswith("es") and text[:-2] in _OP_WORDS:
        return _OP_WORDS[text[:-2]]
    if text.endswith("s") and text[:-1] in _OP_WORDS:
        return _OP_WORDS[text[:-1]]
    return None


class _Cmd:
    """Cursor over command tokens with small matching helpers."""

    def __init__(self, tokens: Sequence[SpokenToken], lexicon: Lexicon):
        self.tokens = [t for t in tokens
                       if not (t.kind == K_FILLER and not t.text.isalpha())]
        self.lexicon = lexicon
        self.pos = 0

    def cur(self) -> Optional[SpokenToken]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def advance(self) -> SpokenToken:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def skip_articles(self):
        while self.cur() is not None and self.cur().text in _ARTICLES:
            self.advance()

    def at(self, *texts: str) -> bool:
        t = self.cur()
        return t is not None and t.text in texts

    def take_occurrence(self) -> Occurrence:
        t = self.cur()
        if t is None:
            return ONLY
        if t.text in ("every", "all"):
            self.advance()
            self.skip_articles()
            return ALL
        if t.text in _ORDINAL_OCCURRENCE:
            self.advance()
            return _ORDINAL_OCCURRENCE[t.text]
        return ONLY

    def find_text(self, *texts: str) -> Optional[int]:
        for i in range(self.pos, len(self.tokens)):
            if self.tokens[i].text in texts:
                return i
        return None

    def parse_expr_slice(self, start: int, end: int) -> Expr:
        window = self.tokens[start:end]
        if not window:
            raise NotACommand("missing expression in command")
        parser = _SpokenParser(window, self.lexicon)
        try:
            expr = parser.parse_relation(set())
        except SpokenSyntaxError as exc:
            raise NotACommand(f"cannot read command operand: {exc}") from exc
        if parser.cur() is not None:
            raise NotACommand(
                f"trailing words in command operand: {parser.cur().text!r}")
        return expr


def parse_command(utterance: str, lexicon: Optional[Lexicon] = None) -> EditCommand:
    """Parse a spoken edit command; raises NotACommand otherwise."""
    lexicon = lexicon if lexicon is not None else default_lexicon()
    tokens = tokenize(utterance, lexicon)
    cmd = _Cmd(tokens, lexicon)
    cmd.skip_articles()
    verb = cmd.cur()
    if verb is None:
        raise NotACommand("empty utterance")

    if verb.text == "move":
        return _parse_move(cmd)
    if verb.text in ("set", "make"):
        return _parse_set_bound(cmd)
    if verb.text in _CHANGE_VERBS or verb.text in _SUBST_VERBS:
        return _parse_change_or_substitute(cmd)
    raise NotACommand(f"no command verb in {utterance!r}")


def _parse_move(cmd: _Cmd) -> EditCommand:
    cmd.advance()
    cmd.skip_articles()
    occurrence = ONLY
    texts = [t.text for t in cmd.tokens[cmd.pos:]]
    if "denominator" not in texts or "numerator" not in texts:
        raise NotACommand("move supports only denominator-to-numerator")
    if texts.index("denominator") > texts.index("numerator"):
        raise NotACommand("move supports only denominator-to-numerator")
    for word, occ in _ORDINAL_OCCURRENCE.items():
        if word in texts and "fraction" in texts:
            occurrence = occ
            break
    return MoveDenominatorToNumerator(occurrence)


def _parse_set_bound(cmd: _Cmd) -> EditCommand:
    cmd.advance()
    cmd.skip_articles()
    which = None
    if cmd.at("lower"):
        which = "lower"
    elif cmd.at("upper"):
        which = "upper"
    if which is None:
        raise NotACommand("set/make needs 'lower bound' or 'upper bound'")
    cmd.advance()
    if not cmd.at("bound", "limit"):
        raise NotACommand("set/make needs 'lower bound' or 'upper bound'")
    cmd.advance()
    if cmd.at("to", "be", "equal to", "equals", "is"):
        cmd.advance()
    cmd.skip_articles()
    value = cmd.parse_expr_slice(cmd.pos, len(cmd.tokens))
    return SetBound(which, value)


def _parse_change_or_substitute(cmd: _Cmd) -> EditCommand:
    verb = cmd.advance()
    cmd.skip_articles()
    occurrence = cmd.take_occurrence()
    cmd.skip_articles()

    t = cmd.cur()
    if t is None:
        raise NotACommand("command is missing a target")

    from_op = _op_from_word(t.text) if verb.text in _CHANGE_VERBS else None
    if from_op is not None:
        cmd.advance()
        if not cmd.at("to", "with", "for", "into"):
            raise NotACommand("expected 'to' after the operator")
        cmd.advance()
        cmd.skip_articles()
        t2 = cmd.cur()
        to_op = _op_from_word(t2.text) if t2 is not None else None
        if to_op is None:
            raise NotACommand("expected a replacement operator")
        cmd.advance()
        if cmd.cur() is not None:
            raise NotACommand("trailing words after operator command")
        return ChangeOperator(from_op, to_op, occurrence)

    sep_words = ("with", "for", "by") if verb.text in _SUBST_VERBS \
        else ("with", "for")
    sep = cmd.find_text(*sep_words)
    if sep is None:
        raise NotACommand(f"expected {'/'.join(sep_words)} in command")
    target = cmd.parse_expr_slice(cmd.pos, sep)
    rep_start = sep + 1
    while rep_start < len(cmd.tokens) and cmd.tokens[rep_start].text in _ARTICLES:
        rep_start += 1
    replacement = cmd.parse_expr_slice(rep_start, len(cmd.tokens))
    if isinstance(target, Ident):
        return Substitute(target, replacement)
    if occurrence != ONLY:
        # ReplaceSubexpr carries no occurrence; reject rather than ignore it.
        raise NotACommand("occurrence selectors only work on operators")
    return ReplaceSubexpr(target, replacement)


# Rewrites


def apply_command(expr: Expr, cmd: EditCommand) -> Expr:
    """Apply one rewrite and return the normalized result.

    Raises TargetNotFound when nothing matches and AmbiguousTarget when an
    occurrence of 'only' has several candidates.
    """
    tree = normalize(expr)
    if isinstance(cmd, ChangeOperator):
        pred = lambda e: isinstance(e, BinaryOp) and e.op == cmd.from_op
        transform = lambda e, rec: BinaryOp(cmd.to_op, rec(e.left), rec(e.right))
        result = _rewrite_occurrences(tree, pred, transform, cmd.occurrence,
                                      "operator")
    elif isinstance(cmd, Substitute):
        result = _substitute(tree, normalize(cmd.target),
                             normalize(cmd.replacement))
    elif isinstance(cmd, MoveDenominatorToNumerator):
        pred = lambda e: isinstance(e, Fraction)
        transform = lambda e, rec: BinaryOp(
            IMUL, rec(e.numerator),
            Power(rec(e.denominator), Neg(Number("1"))))
        result = _rewrite_occurrences(tree, pred, transform, cmd.occurrence,
                                      "fraction")
    elif isinstance(cmd, ReplaceSubexpr):
        target = normalize(cmd.target)
        replacement = normalize(cmd.replacement)
        pred = lambda e: e == target
        transform = lambda e, rec: replacement
        result = _rewrite_occurrences(tree, pred, transform, ONLY,
                                      "subexpression")
    elif isinstance(cmd, SetBound):
        result = _set_bound(tree, cmd.which, normalize(cmd.value))
    else:
        raise TypeError(f"not an EditCommand: {cmd!r}")
    return normalize(result)


def _rewrite_occurrences(tree: Expr, pred, transform, occurrence: Occurrence,
                         what: str) -> Expr:
    total = _count(tree, pred)
    if total == 0:
        raise TargetNotFound(f"no matching {what}")
    if occurrence.kind == "only":
        if total > 1:
            raise AmbiguousTarget(
                f"{total} matching {what}s; say which one")
        selected = {1}
    elif occurrence.kind == "first":
        selected = {1}
    elif occurrence.kind == "nth":
        if occurrence.index > total:
            raise TargetNotFound(
                f"asked for {what} #{occurrence.index}, found {total}")
        selected = {occurrence.index}
    else:  # all
        selected = set(range(1, total + 1))

    counter = [0]

    def visit(e: Expr) -> Expr:
        if pred(e):
            counter[0] += 1
            if counter[0] in selected:
                return transform(e, visit)
        return _map_children(e, visit)

    return visit(tree)


def _count(tree: Expr, pred) -> int:
    n = 1 if pred(tree) else 0
    for c in _child_list(tree):
        n += _count(c, pred)
    return n


def _child_list(e: Expr) -> List[Expr]:
    from .exprs import children
    return list(children(e))


def _map_children(e: Expr, fn) -> Expr:
    if isinstance(e, Number) or isinstance(e, Infinity):
        return e
    if isinstance(e, Ident):
        if e.subscript is None:
            return e
        return Ident(e.name, fn(e.subscript))
    if isinstance(e, GreekLetter):
        if e.subscript is None:
            return e
        return GreekLetter(e.name, fn(e.subscript))
    if isinstance(e, BinaryOp):
        return BinaryOp(e.op, fn(e.left), fn(e.right))
    if isinstance(e, Neg):
        return Neg(fn(e.operand))
    if isinstance(e, Fraction):
        return Fraction(fn(e.numerator), fn(e.denominator))
    if isinstance(e, Power):
        return Power(fn(e.base), fn(e.exponent))
    if isinstance(e, Root):
        deg = fn(e.degree) if e.degree is not None else None
        return Root(deg, fn(e.radicand))
    if isinstance(e, FunctionApp):
        return FunctionApp(e.name, fn(e.argument))
    if isinstance(e, Integral):
        return Integral(fn(e.lower) if e.lower is not None else None,
                        fn(e.upper) if e.upper is not None else None,
                        fn(e.integrand), e.variable)
    if isinstance(e, (Sum, Product)):
        return type(e)(e.index, fn(e.lower), fn(e.upper), fn(e.body))
    if isinstance(e, Derivative):
        return Derivative(e.order, e.partial, e.variable, fn(e.body))
    if isinstance(e, Group):
        return Group(fn(e.inner))
    raise TypeError(f"not an Expr: {e!r}")


def _substitute(tree: Expr, target: Ident, replacement: Expr) -> Expr:
    count = [0]

    def visit(e: Expr, bound: frozenset) -> Expr:
        if isinstance(e, Ident) and e == target and e not in bound:
            count[0] += 1
            return replacement
        if isinstance(e, Integral):
            return Integral(
                visit(e.lower, bound) if e.lower is not None else None,
                visit(e.upper, bound) if e.upper is not None else None,
                visit(e.integrand, bound | {e.variable}), e.variable)
        if isinstance(e, (Sum, Product)):
            return type(e)(e.index, visit(e.lower, bound),
                           visit(e.upper, bound),
                           visit(e.body, bound | {e.index}))
        if isinstance(e, Derivative):
            return Derivative(e.order, e.partial, e.variable,
                              visit(e.body, bound | {e.variable}))
        return _map_children(e, lambda c: visit(c, bound))

    result = visit(tree, frozenset())
    if count[0] == 0:
        raise TargetNotFound(f"identifier {target.name!r} not present")
    return result


def _set_bound(tree: Expr, which: str, value: Expr) -> Expr:
    pred = lambda e: isinstance(e, (Integral, Sum, Product))

    def transform(e: Expr, rec):
        if isinstance(e, Integral):
            lower = value if which == "lower" else e.lower
            upper = value if which == "upper" else e.upper
            return Integral(lower, upper, rec(e.integrand), e.variable)
        lower = value if which == "lower" else rec(e.lower)
        upper = value if which == "upper" else rec(e.upper)
        return type(e)(e.index, lower, upper, rec(e.body))

    return _rewrite_occurrences(tree, pred, transform, ONLY, "bounded operator")
