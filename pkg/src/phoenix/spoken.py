"""Deterministic spoken-math grammar.

Pipeline: tokenize transcribed speech, isolate the mathematical span from
conversational filler, then recursive-descent parse the span into a tree.
Precedence (loosest to tightest): relation < plus/minus < times / over /
juxtaposition < power postfixes < primaries. The full grammar, synonym
table and design rules live in docs/spoken-grammar.md.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

from .exprs import (
    ADD, SUB, MUL, IMUL, EQ, LT, GT, LE, GE, GREEK_NAMES,
    BinaryOp, Derivative, Expr, Fraction, FunctionApp, GreekLetter, Group,
    Ident, Infinity, Integral, Neg, Number, Power, Product, Root, Sum,
    free_idents,
)
from .lexicon import Lexicon, TermEntry, default_lexicon

# Token kinds.
K_NUMBER_WORD = "number-word"
K_DIGIT = "digit"
K_OPERATOR = "operator-word"
K_STRUCTURE = "structure-word"
K_IDENT = "identifier"
K_GREEK = "greek"
K_FUNCTION = "function"
K_DOMAIN = "domain-phrase"
K_FILLER = "filler"

CONTENT_KINDS = frozenset({K_NUMBER_WORD, K_DIGIT, K_IDENT, K_GREEK,
                           K_FUNCTION, K_DOMAIN})


class NoMathFound(ValueError):
    """No window of the utterance scores as mathematical."""


class SpokenSyntaxError(ValueError):
    """Grammar failure; span points at the offending token."""

    def __init__(self, message: str, span: Tuple[int, int],
                 token_index: Optional[int] = None):
        super().__init__(f"{message} (at {span[0]}..{span[1]})")
        self.span = span
        self.token_index = token_index


@dataclass(frozen=True)
class SpokenToken:
    kind: str
    text: str
    span: Tuple[int, int]


@dataclass(frozen=True)
class Transcription:
    expr: Expr
    source_span: Tuple[int, int]
    residual_text: str


# Built-in word classes. Multi-word entries become single tokens via
# longest-first matching, same as lexicon phrases.

NUMBER_UNITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11,
    "twelve": 12, "thirteen": 13, "fourteen": 14, "fifteen": 15,
    "sixteen": 16, "seventeen": 17, "eighteen": 18, "nineteen": 19,
    "twenty": 20,
}
NUMBER_MULTIPLIERS = {"hundred": 100, "thousand": 1000}

ORDINALS = {
    "first": 1, "second": 2, "third": 3, "fourth": 4, "fifth": 5,
    "sixth": 6, "seventh": 7, "eighth": 8, "ninth": 9, "tenth": 10,
    "eleventh": 11, "twelfth": 12, "thirteenth": 13, "fourteenth": 14,
    "fifteenth": 15, "sixteenth": 16, "seventeenth": 17, "eighteenth": 18,
    "nineteenth": 19, "twentieth": 20,
}

RELATION_WORDS = {
    "equals": EQ, "is equal to": EQ, "equal to": EQ, "is": EQ, "=": EQ,
    "is less than": LT, "less than": LT, "is smaller than": LT, "<": LT,
    "is greater than": GT, "greater than": GT, "is bigger than": GT,
    "is more than": GT, ">": GT,
    "is less than or equal to": LE, "less than or equal to": LE,
    "is at most": LE,
    "is greater than or equal to": GE, "greater than or equal to": GE,
    "is at least": GE,
}

MUL_WORDS = {"times", "multiplied by", "multiplied with", "*"}
DIV_WORDS = {"over", "divided by", "by", "/"}
ADD_WORDS = {"plus", "+"}
SUB_WORDS = {"minus", "-"}
NEG_WORDS = {"negative", "the negative of"}

OPERATOR_PHRASES = (
    set(RELATION_WORDS) | MUL_WORDS | ADD_WORDS | SUB_WORDS | NEG_WORDS
    | {"squared", "cubed", "raised to the", "raised to", "^"}
) - DIV_WORDS

COMMAND_VERBS = {"change", "replace", "swap", "substitute", "plug in",
                 "move", "set", "make"}

_DIFFERENTIALS = {"d" + c for c in "abcefghijklmnpqrstuvwxyz"}

STRUCTURE_WORDS = (
    {"the", "from", "to", "of", "sub", "integral", "sum", "summation",
     "product", "derivative", "partial", "quantity", "end quantity",
     "square root", "cube root", "root", "with respect to", "open paren",
     "left paren", "close paren", "right paren", "power", "(", ")", "with",
     "for", "in", "bound", "limit", "lower", "upper", "numerator",
     "denominator", "fraction", "every", "all"}
    | DIV_WORDS - {"/"}
    | _DIFFERENTIALS
)

_WORD_RE = re.compile(r"[A-Za-z']+|\d+(?:\.\d+)?|[()+\-*/=<>^]|[.,;:!?]")

_MAX_PHRASE_WORDS = 6


def _phrase_table(lexicon: Lexicon) -> Dict[Tuple[str, ...], Tuple[str, object]]:
    """words-tuple -> (token kind, payload). Later entries never override
    earlier ones, giving lexicon phrases priority over built-ins."""
    table: Dict[Tuple[str, ...], Tuple[str, object]] = {}

    def put(phrase: str, kind: str, payload: object = None):
        key = tuple(phrase.split())
        if key not in table:
            table[key] = (kind, payload)

    for phrase in lexicon.wellknown_equations:
        put(phrase, K_DOMAIN, ("equation", lexicon.wellknown_equations[phrase]))
    for entry in lexicon.term_map:
        put(entry.phrase, K_DOMAIN, ("term", entry))
    for phrase, fname in lexicon.function_words.items():
        put(phrase, K_FUNCTION, fname)
    for phrase, gname in lexicon.greek_map.items():
        put(phrase, K_GREEK, gname)
    for name in GREEK_NAMES:
        # lowercase names come first in GREEK_NAMES, so "gamma" wins over
        # "Gamma"; capitals stay reachable as "capital gamma".
        put(name.lower(), K_GREEK, name)
        if name[0].isupper():
            put(f"capital {name.lower()}", K_GREEK, name)
    for phrase in OPERATOR_PHRASES:
        put(phrase, K_OPERATOR, None)
    for verb in COMMAND_VERBS:
        put(verb, K_OPERATOR, None)
    for phrase in STRUCTURE_WORDS:
        put(phrase, K_STRUCTURE, None)
    for word in NUMBER_UNITS:
        put(word, K_NUMBER_WORD, None)
    for word in NUMBER_MULTIPLIERS:
        put(word, K_NUMBER_WORD, None)
    for word in ORDINALS:
        put(word, K_NUMBER_WORD, None)
    put("infinity", K_STRUCTURE, None)
    return table


def tokenize(utterance: str, lexicon: Optional[Lexicon] = None) -> List[SpokenToken]:
    """Longest-match tokenization; unknown single letters become identifiers
    and any other unknown word becomes filler."""
    lexicon = lexicon if lexicon is not None else default_lexicon()
    table = _phrase_table(lexicon)

    pieces = [(m.group(0), m.start(), m.end())
              for m in _WORD_RE.finditer(utterance)]
    tokens: List[SpokenToken] = []
    i = 0
    while i < len(pieces):
        text, start, end = pieces[i]
        low = text.lower().strip("'")
        if text in ".,;:!?'":
            tokens.append(SpokenToken(K_FILLER, text, (start, end)))
            i += 1
            continue
        if text[0].isdigit():
            tokens.append(SpokenToken(K_DIGIT, text, (start, end)))
            i += 1
            continue
        matched = False
        for span_len in range(min(_MAX_PHRASE_WORDS, len(pieces) - i), 0, -1):
            words = tuple(p[0].lower().strip("'") for p in pieces[i:i + span_len])
            if any(not w for w in words):
                continue
            hit = table.get(words)
            if hit is not None:
                kind, _payload = hit
                tokens.append(SpokenToken(
                    kind, " ".join(words),
                    (pieces[i][1], pieces[i + span_len - 1][2])))
                i += span_len
                matched = True
                break
        if matched:
            continue
        if len(low) == 1 and low.isalpha():
            tokens.append(SpokenToken(K_IDENT, text.strip("'"), (start, end)))
        elif len(text) == 1 and not text.isalnum():
            tokens.append(SpokenToken(K_OPERATOR, text, (start, end)))
        else:
            tokens.append(SpokenToken(K_FILLER, low, (start, end)))
        i += 1
    return tokens


_WINDOW = 3
_MATH_THRESHOLD = 0.6


def extract_math_span(tokens: Sequence[SpokenToken]) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    """Locate the mathematical token run.

    A window qualifies when at least 60% of its tokens are non-filler;
    every non-filler token also qualifies on its own (a width-1 window),
    while the wider windows bridge interior fillers such as commas.
    Qualifying windows merge into runs, the run with the most content
    tokens wins, and filler is trimmed from its edges. Raises NoMathFound
    when no run contains a content token.
    """
    if not tokens:
        raise NoMathFound("empty utterance")
    n = len(tokens)
    marked = [t.kind != K_FILLER for t in tokens]
    w = min(_WINDOW, n)
    for i in range(n - w + 1):
        window = tokens[i:i + w]
        score = sum(1 for t in window if t.kind != K_FILLER) / w
        if score >= _MATH_THRESHOLD:
            for j in range(i, i + w):
                marked[j] = True
    runs = []
    i = 0
    while i < n:
        if marked[i]:
            j = i
            while j + 1 < n and marked[j + 1]:
                j += 1
            runs.append((i, j))
            i = j + 1
        else:
            i += 1
    best = None
    for lo, hi in runs:
        content = sum(1 for t in tokens[lo:hi + 1] if t.kind in CONTENT_KINDS)
        length = hi - lo
        key = (content, length, -lo)
        if best is None or key > best[0]:
            best = (key, (lo, hi))
    if best is None or best[0][0] == 0:
        raise NoMathFound("no mathematical content in utterance")
    lo, hi = best[1]
    while lo <= hi and tokens[lo].kind == K_FILLER:
        lo += 1
    while hi >= lo and tokens[hi].kind == K_FILLER:
        hi -= 1
    if lo > hi:
        raise NoMathFound("no mathematical content in utterance")
    return (lo, hi), (tokens[lo].span[0], tokens[hi].span[1])


def _residual(utterance: str, char_span: Tuple[int, int]) -> str:
    prefix = utterance[:char_span[0]]
    suffix = utterance[char_span[1]:]
    parts = [p.strip(" \t,.;:!?") for p in (prefix, suffix)]
    return " ".join(p for p in parts if p)


_PUNCT_FILLER = {",", ".", ";", ":", "!", "?"}


class _SpokenParser:
    def __init__(self, tokens: Sequence[SpokenToken], lexicon: Lexicon,
                 ident_forms: Sequence[Union[Ident, GreekLetter]] = ()):
        self.tokens = list(tokens)
        self.lexicon = lexicon
        self.table = _phrase_table(lexicon)
        self.ident_forms = list(ident_forms)
        self.pos = 0

    # token helpers

    def cur(self) -> Optional[SpokenToken]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def peek(self, offset: int = 1) -> Optional[SpokenToken]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def advance(self) -> SpokenToken:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def at_text(self, *texts: str) -> bool:
        t = self.cur()
        return t is not None and t.text in texts

    def error(self, message: str) -> SpokenSyntaxError:
        t = self.cur()
        span = t.span if t is not None else (
            self.tokens[-1].span if self.tokens else (0, 0))
        return SpokenSyntaxError(message, span,
                                 token_index=min(self.pos, len(self.tokens)))

    def skip_the(self):
        while self.at_text("the"):
            self.advance()

    def _stopped(self, stops: Set[str]) -> bool:
        t = self.cur()
        if t is None:
            return True
        return t.text in stops

    # grammar levels

    def parse_relation(self, stops: Set[str], juxt: bool = True) -> Expr:
        left = self.parse_additive(stops, juxt)
        while not self._stopped(stops):
            t = self.cur()
            op = RELATION_WORDS.get(t.text) if t.kind == K_OPERATOR else None
            if op is None:
                break
            self.advance()
            right = self.parse_additive(stops, juxt)
            left = BinaryOp(op, left, right)
        return left

    def parse_additive(self, stops: Set[str], juxt: bool = True) -> Expr:
        left = self.parse_term(stops, juxt)
        while not self._stopped(stops):
            t = self.cur()
            if t.text in ADD_WORDS:
                self.advance()
                left = BinaryOp(ADD, left, self.parse_term(stops, juxt))
            elif t.text in SUB_WORDS:
                self.advance()
                left = BinaryOp(SUB, left, self.parse_term(stops, juxt))
            else:
                break
        return left

    def parse_term(self, stops: Set[str], juxt: bool = True) -> Expr:
        left = self.parse_factor(stops)
        while not self._stopped(stops):
            t = self.cur()
            if t.text in MUL_WORDS:
                self.advance()
                left = BinaryOp(MUL, left, self.parse_factor(stops))
            elif t.text in DIV_WORDS:
                self.advance()
                left = Fraction(left, self.parse_factor(stops))
            elif juxt and self._starts_primary(t):
                left = BinaryOp(IMUL, left, self.parse_power(stops))
            else:
                break
        return left

    def parse_factor(self, stops: Set[str]) -> Expr:
        t = self.cur()
        if t is not None and (t.text in NEG_WORDS or t.text in SUB_WORDS):
            self.advance()
            return Neg(self.parse_factor(stops))
        return self.parse_power(stops)

    def parse_power(self, stops: Set[str]) -> Expr:
        base = self.parse_primary(stops)
        while not self._stopped(stops):
            t = self.cur()
            if t.text == "squared":
                self.advance()
                base = Power(base, Number("2"))
            elif t.text == "cubed":
                self.advance()
                base = Power(base, Number("3"))
            elif t.text == "sub":
                self.advance()
                base = self._attach_subscript(base)
            elif t.text == "^":
                self.advance()
                base = Power(base, self.parse_power_operand(stops))
            elif t.text == "to" and "to" not in stops \
                    and self.peek() is not None and self.peek().text == "the":
                save = self.pos
                self.advance()
                self.advance()
                exponent = self._parse_exponent(stops)
                if exponent is None:
                    self.pos = save
                    break
                base = Power(base, exponent)
            elif t.text in ("raised to the", "raised to"):
                self.advance()
                exponent = self._parse_exponent(stops)
                if exponent is None:
                    raise self.error("expected an exponent")
                base = Power(base, exponent)
            else:
                break
        return base

    def _parse_exponent(self, stops: Set[str]) -> Optional[Expr]:
        t = self.cur()
        if t is None:
            return None
        if t.kind == K_NUMBER_WORD and t.text in ORDINALS:
            self.advance()
            if self.at_text("power"):
                self.advance()
            return Number(str(ORDINALS[t.text]))
        if t.text == "power":
            self.advance()
            if self.at_text("of"):
                self.advance()
            return self.parse_power_operand(stops)
        if t.kind in (K_NUMBER_WORD, K_DIGIT, K_IDENT, K_GREEK) \
                or t.text in NEG_WORDS or t.text in SUB_WORDS:
            return self.parse_power_operand(stops)
        return None

    def parse_power_operand(self, stops: Set[str]) -> Expr:
        t = self.cur()
        if t is not None and (t.text in NEG_WORDS or t.text in SUB_WORDS):
            self.advance()
            return Neg(self.parse_power_operand(stops))
        return self.parse_power(stops)

    def _attach_subscript(self, base: Expr) -> Expr:
        t = self.cur()
        if t is None:
            raise self.error("expected a subscript")
        if t.kind in (K_NUMBER_WORD, K_DIGIT):
            sub = self.parse_number()
        elif t.kind == K_IDENT:
            self.advance()
            sub = Ident(t.text)
        elif t.kind == K_GREEK:
            self.advance()
            sub = GreekLetter(self.table[tuple(t.text.split())][1])
        else:
            raise self.error("expected a subscript")
        if isinstance(base, Ident) and base.subscript is None:
            return Ident(base.name, sub)
        if isinstance(base, GreekLetter) and base.subscript is None:
            return GreekLetter(base.name, sub)
        raise self.error("subscript needs a plain identifier")

    def _starts_primary(self, t: SpokenToken) -> bool:
        if t.kind in (K_NUMBER_WORD, K_DIGIT, K_IDENT, K_GREEK, K_FUNCTION,
                      K_DOMAIN):
            return t.text not in NUMBER_MULTIPLIERS and t.text not in ORDINALS
        if t.kind == K_STRUCTURE:
            return t.text in ("integral", "sum", "summation", "product",
                              "derivative", "quantity", "square root",
                              "cube root", "root", "infinity", "(",
                              "open paren", "left paren", "the")
        return False

    def parse_number(self) -> Number:
        t = self.cur()
        if t is None:
            raise self.error("expected a number")
        if t.kind == K_DIGIT:
            self.advance()
            return Number(t.text)
        if t.kind != K_NUMBER_WORD or t.text in ORDINALS:
            raise self.error("expected a number")
        value = self._number_words()
        return Number(str(value))

    def _number_words(self) -> int:
        t = self.cur()
        amount = 0
        if t is not None and t.text in NUMBER_UNITS:
            amount = NUMBER_UNITS[t.text]
            self.advance()
            t = self.cur()
        if t is not None and t.text == "thousand":
            self.advance()
            amount = max(amount, 1) * 1000
            t = self.cur()
            if t is not None and t.kind == K_NUMBER_WORD \
                    and t.text not in ORDINALS:
                amount += self._number_words_below_thousand()
            return amount
        if t is not None and t.text == "hundred":
            self.advance()
            amount = max(amount, 1) * 100
            t = self.cur()
            if t is not None and t.text in NUMBER_UNITS:
                amount += NUMBER_UNITS[t.text]
                self.advance()
        return amount

    def _number_words_below_thousand(self) -> int:
        amount = 0
        t = self.cur()
        if t is not None and t.text in NUMBER_UNITS:
            amount = NUMBER_UNITS[t.text]
            self.advance()
            t = self.cur()
        if t is not None and t.text == "hundred":
            self.advance()
            amount = max(amount, 1) * 100
            t = self.cur()
            if t is not None and t.text in NUMBER_UNITS:
                amount += NUMBER_UNITS[t.text]
                self.advance()
        return amount

    def parse_primary(self, stops: Set[str]) -> Expr:
        t = self.cur()
        if t is None:
            raise self.error("expected an expression")
        if t.text == "the":
            self.advance()
            return self.parse_primary(stops)
        if t.kind == K_NUMBER_WORD:
            if t.text in ORDINALS:
                return self._parse_ordinal_primary(stops)
            if t.text in NUMBER_MULTIPLIERS:
                return Number(str(self._number_words()))
            return self.parse_number()
        if t.kind == K_DIGIT:
            self.advance()
            return Number(t.text)
        if t.kind == K_IDENT:
            self.advance()
            nxt = self.cur()
            if nxt is not None and nxt.text == "sub":
                return Ident(t.text)
            return self._bias_ident(Ident(t.text))
        if t.kind == K_GREEK:
            self.advance()
            name = self.table[tuple(t.text.split())][1]
            sub = self._following_number_subscript()
            if sub is None and not self.at_text("sub"):
                return self._bias_greek(GreekLetter(name))
            return GreekLetter(name, sub)
        if t.kind == K_FUNCTION:
            self.advance()
            fname = self.table[tuple(t.text.split())][1]
            if self.at_text("of"):
                self.advance()
            return FunctionApp(fname, self.parse_factor(stops))
        if t.kind == K_DOMAIN:
            self.advance()
            payload_kind, payload = self.table[tuple(t.text.split())]
            tag, value = payload
            if tag == "equation":
                return value
            entry: TermEntry = value
            base = entry.symbol
            if entry.number_subscript:
                sub = self._following_number_subscript()
                if sub is not None:
                    base = type(base)(base.name, sub)
            return base
        if t.text == "infinity":
            self.advance()
            return Infinity()
        if t.text in ("(", "open paren", "left paren"):
            self.advance()
            inner = self.parse_relation(set())
            if self.at_text(")", "close paren", "right paren"):
                self.advance()
            else:
                raise self.error("expected a closing parenthesis")
            return Group(inner)
        if t.text == "quantity":
            self.advance()
            inner = self.parse_additive(stops | {"end quantity"})
            if self.at_text("end quantity"):
                self.advance()
            return Group(inner)
        if t.text == "integral":
            return self.parse_integral(stops)
        if t.text in ("sum", "summation", "product"):
            return self.parse_sum_product(stops)
        if t.text in ("square root", "root"):
            self.advance()
            if self.at_text("of"):
                self.advance()
            return Root(None, self.parse_factor(stops))
        if t.text == "cube root":
            self.advance()
            if self.at_text("of"):
                self.advance()
            return Root(Number("3"), self.parse_factor(stops))
        if t.text in ("derivative", "partial"):
            return self.parse_derivative(stops, order=1)
        raise self.error(f"unexpected word {t.text!r}")

    def _parse_ordinal_primary(self, stops: Set[str]) -> Expr:
        t = self.advance()
        order = ORDINALS[t.text]
        if self.at_text("derivative"):
            return self.parse_derivative(stops, order=order)
        if self.at_text("partial"):
            return self.parse_derivative(stops, order=order)
        if self.at_text("root"):
            self.advance()
            if self.at_text("of"):
                self.advance()
            return Root(Number(str(order)), self.parse_factor(stops))
        raise SpokenSyntaxError(f"unexpected word {t.text!r}", t.span)

    def _following_number_subscript(self) -> Optional[Expr]:
        t = self.cur()
        if t is not None and t.kind in (K_NUMBER_WORD, K_DIGIT) \
                and t.text not in ORDINALS \
                and t.text not in NUMBER_MULTIPLIERS:
            return self.parse_number()
        return None

    def _bias_ident(self, ident: Ident) -> Expr:
        for form in self.ident_forms:
            if isinstance(form, Ident) and form.name == ident.name:
                return form
        return ident

    def _bias_greek(self, letter: GreekLetter) -> Expr:
        for form in self.ident_forms:
            if isinstance(form, GreekLetter) and form.name == letter.name:
                return form
        return letter

    def parse_integral(self, stops: Set[str]) -> Expr:
        self.advance()  # integral
        lower = upper = None
        if self.at_text("from"):
            self.advance()
            lower = self.parse_additive(stops | {"to"}, juxt=False)
            if not self.at_text("to"):
                raise self.error("expected 'to' after the lower bound")
            self.advance()
            upper = self.parse_additive(stops | {"of", "to"}, juxt=False)
        if self.at_text("of"):
            self.advance()
        integrand_stops = stops | _DIFFERENTIALS | {"d"}
        integrand = self.parse_relation(integrand_stops)
        variable = self._parse_differential()
        if variable is None:
            variable = _default_variable(integrand)
        return Integral(lower, upper, integrand, variable)

    def _parse_differential(self) -> Optional[Ident]:
        t = self.cur()
        if t is None:
            return None
        if t.text in _DIFFERENTIALS:
            self.advance()
            return Ident(t.text[1])
        if t.kind == K_IDENT and t.text == "d":
            nxt = self.peek()
            if nxt is not None and nxt.kind == K_IDENT:
                self.advance()
                return Ident(self.advance().text)
        return None

    def parse_sum_product(self, stops: Set[str]) -> Expr:
        t = self.advance()
        cls = Product if t.text == "product" else Sum
        if not self.at_text("from"):
            raise self.error("expected 'from <index> equals <lower>'")
        self.advance()
        idx_tok = self.cur()
        if idx_tok is None or idx_tok.kind != K_IDENT:
            raise self.error("expected an index variable")
        self.advance()
        index = Ident(idx_tok.text)
        if self.cur() is not None and RELATION_WORDS.get(self.cur().text) == EQ:
            self.advance()
        else:
            raise self.error("expected 'equals' after the index")
        lower = self.parse_additive(stops | {"to"}, juxt=False)
        if not self.at_text("to"):
            raise self.error("expected 'to' after the lower bound")
        self.advance()
        upper = self.parse_additive(stops | {"of"}, juxt=False)
        if self.at_text("of"):
            self.advance()
        body = self.parse_additive(stops)
        return cls(index, lower, upper, body)

    def parse_derivative(self, stops: Set[str], order: int) -> Expr:
        partial = False
        if self.at_text("partial"):
            partial = True
            self.advance()
        if not self.at_text("derivative"):
            raise self.error("expected 'derivative'")
        self.advance()
        if self.at_text("of"):
            self.advance()
        body = self.parse_additive(stops | {"with respect to"})
        variable: Optional[Ident] = None
        if self.at_text("with respect to"):
            self.advance()
            var_tok = self.cur()
            if var_tok is None or var_tok.kind != K_IDENT:
                raise self.error("expected a variable after 'with respect to'")
            self.advance()
            variable = Ident(var_tok.text)
        if variable is None:
            variable = _default_variable(body)
        return Derivative(order, partial, variable, body)


def _default_variable(expr: Expr) -> Ident:
    """Unique free identifier if exactly one exists, else x."""
    frees = {i for i in free_idents(expr)}
    if len(frees) == 1:
        return next(iter(frees))
    return Ident("x")


def parse_spoken(utterance: str, lexicon: Optional[Lexicon] = None,
                 context=None) -> Transcription:
    """Parse transcribed speech into a tree.

    When a RankedContext is given, a bare spoken letter already present in
    the context resolves to that identifier's exact subscripted form.
    Raises NoMathFound or SpokenSyntaxError.
    """
    if not utterance.strip():
        raise NoMathFound("empty utterance")
    lexicon = lexicon if lexicon is not None else default_lexicon()
    tokens = tokenize(utterance, lexicon)
    (lo, hi), _ = extract_math_span(tokens)

    ident_forms = ()
    if context is not None:
        ident_forms = getattr(context, "ident_forms", ()) or ()

    first_error: Optional[SpokenSyntaxError] = None
    end = hi
    while end >= lo:
        # punctuation is a soft separator (never an operator): parse with
        # it removed, keeping original indices for error cuts
        work = [(i, t) for i, t in enumerate(tokens[lo:end + 1], start=lo)
                if not (t.kind == K_FILLER and t.text in _PUNCT_FILLER)]
        if not work:
            break
        parser = _SpokenParser([t for _, t in work], lexicon, ident_forms)
        try:
            expr = parser.parse_relation(set())
            if parser.cur() is not None:
                raise parser.error(
                    f"unexpected word {parser.cur().text!r}")
        except SpokenSyntaxError as exc:
            if first_error is None:
                first_error = exc
            # cut the span just before the offending token and retry with
            # the longest prefix that forms a complete expression
            ti = exc.token_index
            if ti is not None and ti < len(work):
                new_end = work[ti][0] - 1
            elif ti is not None:
                new_end = work[-1][0] - 1
            else:
                new_end = end - 1
            if new_end >= end:
                new_end = end - 1
            end = new_end
            continue
        char_span = (tokens[lo].span[0], tokens[work[-1][0]].span[1])
        return Transcription(expr, char_span, _residual(utterance, char_span))
    raise first_error if first_error is not None else NoMathFound(
        "no mathematical content in utterance")
