import pytest
from hypothesis import given, settings, strategies as st

from phoenix.exprs import (
    BinaryOp, EQ, Fraction, FunctionApp, GreekLetter, Ident, IMUL, Infinity,
    Integral, Number, Power, normalize, structurally_equal,
)
from phoenix.latex import parse_latex, render_latex
from phoenix.spoken import (
    NoMathFound, SpokenSyntaxError, extract_math_span, parse_spoken, tokenize,
)
from _tables import ISOLATION_SUITE, SYNONYM_TRIPLES

x = Ident("x")


def kinds(tokens):
    return [(t.kind, t.text) for t in tokens]


def test_tokenize_x_over_3():
    assert kinds(tokenize("x over 3")) == [
        ("identifier", "x"), ("structure-word", "over"), ("digit", "3")]


def test_tokenize_domain_phrase():
    toks = tokenize("index of refraction one")
    assert kinds(toks) == [("domain-phrase", "index of refraction"),
                           ("number-word", "one")]


def test_tokenize_pi_over_two():
    assert kinds(tokenize("pi over two")) == [
        ("greek", "pi"), ("structure-word", "over"), ("number-word", "two")]


def test_token_spans_ordered_and_nonoverlapping():
    utterance = "the integral from zero to pi over two, cosine of x, dx"
    toks = tokenize(utterance)
    for a, b in zip(toks, toks[1:]):
        assert a.span[1] <= b.span[0]
    for t in toks:
        covered = utterance[t.span[0]:t.span[1]].lower()
        assert covered.replace("'", "") .split() == t.text.split() or \
            covered == t.text


def test_extract_span_whole_utterance():
    toks = tokenize("x plus one")
    (lo, hi), span = extract_math_span(toks)
    assert (lo, hi) == (0, len(toks) - 1)


def test_extract_span_no_math():
    # by hand: all three tokens are filler, every window scores 0 < 0.6
    toks = tokenize("good morning everyone")
    assert all(t.kind == "filler" for t in toks)
    with pytest.raises(NoMathFound):
        extract_math_span(toks)


def test_structure_words_alone_are_not_math():
    with pytest.raises(NoMathFound):
        parse_spoken("to the of the from")


def test_prompt_1():
    t = parse_spoken("The integral from zero to infinity of x squared, dx")
    assert render_latex(normalize(t.expr)) == r"\int_0^{\infty} x^2 \, dx"
    assert t.residual_text == ""


def test_prompt_2():
    t = parse_spoken("The integral from zero to pi over two, cosine of x, dx")
    assert render_latex(normalize(t.expr)) == \
        r"\int_0^{\frac{\pi}{2}} \cos(x) \, dx"


def test_prompt_3():
    t = parse_spoken("Index of refraction one sine of theta one equals "
                     "index of refraction two sine of theta two")
    assert render_latex(normalize(t.expr)) == \
        r"n_1 \sin(\theta_1) = n_2 \sin(\theta_2)"


def test_spec_integral_example_defaults_variable():
    # D2: no differential, unique free variable
    t = parse_spoken("integral from zero to two of (2x+1)(x+3)")
    expr = normalize(t.expr)
    assert isinstance(expr, Integral)
    assert expr.variable == x
    assert render_latex(expr) == r"\int_0^2 (2 x + 1) (x + 3) \, dx"


def test_default_variable_falls_back_to_x():
    # two free identifiers -> x
    t = parse_spoken("the integral of e to the negative x squared")
    assert normalize(t.expr).variable == x


def test_precedence_open_question():
    t = parse_spoken("x over 3 plus 2")
    want = parse_latex(r"\frac{x}{3} + 2")
    assert structurally_equal(t.expr, want)


def test_number_words():
    assert parse_spoken("seventeen").expr == Number("17")
    assert parse_spoken("two hundred five").expr == Number("205")
    assert parse_spoken("three thousand").expr == Number("3000")
    assert parse_spoken("twenty thousand two hundred one").expr \
        == Number("20201")


def test_digits_pass_through():
    assert parse_spoken("3.14 plus x").expr == \
        BinaryOp("add", Number("3.14"), x)


def test_subscript_rule_greek():
    # D4: number word directly after a Greek letter becomes a subscript
    assert parse_spoken("theta one").expr == \
        GreekLetter("theta", Number("1"))
    # but an operator in between keeps them apart
    assert structurally_equal(parse_spoken("theta times one").expr,
                              BinaryOp("mul", GreekLetter("theta"),
                                       Number("1")))


def test_subscript_rule_plain_identifier_not_subscripted():
    # D4 covers domain phrases and Greek letters only
    assert structurally_equal(parse_spoken("x one").expr,
                              BinaryOp(IMUL, x, Number("1")))


def test_explicit_sub():
    assert parse_spoken("x sub one").expr == Ident("x", Number("1"))


def test_punctuation_is_soft():
    # D5: commas and periods never act as operators
    a = parse_spoken("x plus one, equals two.").expr
    b = parse_spoken("x plus one equals two").expr
    assert structurally_equal(a, b)


def test_wellknown_equation():
    t = parse_spoken("the quadratic equation")
    assert render_latex(normalize(t.expr)) == "a x^2 + b x + c = 0"


def test_synonym_triples_table():
    for triple in SYNONYM_TRIPLES:
        exprs = [parse_spoken(u).expr for u in triple]
        assert structurally_equal(exprs[0], exprs[1]), triple
        assert structurally_equal(exprs[0], exprs[2]), triple


def test_isolation_suite():
    for utterance, latex, residual in ISOLATION_SUITE:
        t = parse_spoken(utterance)
        assert render_latex(normalize(t.expr)) == latex, utterance
        assert t.residual_text == residual, utterance


def test_span_soundness():
    # re-parsing only the extracted span gives the same expression
    for utterance, _, _ in ISOLATION_SUITE:
        t = parse_spoken(utterance)
        span_text = utterance[t.source_span[0]:t.source_span[1]]
        t2 = parse_spoken(span_text)
        assert structurally_equal(t.expr, t2.expr), utterance


def test_source_span_within_bounds():
    for utterance, _, _ in ISOLATION_SUITE:
        t = parse_spoken(utterance)
        lo, hi = t.source_span
        assert 0 <= lo <= hi <= len(utterance)


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=100))
def test_fuzz_safety(text):
    # never crashes: either a Transcription or a typed error
    try:
        t = parse_spoken(text)
        assert t.expr is not None
    except (NoMathFound, SpokenSyntaxError):
        pass


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(
    "x y plus minus over squared the integral from zero to of dx one two "
    "sine theta pi hello world".split()), min_size=1, max_size=12))
def test_fuzz_wordlike(words):
    try:
        parse_spoken(" ".join(words))
    except (NoMathFound, SpokenSyntaxError):
        pass


def test_context_bias_resolves_bare_letter():
    from phoenix.context import RankedContext, ContextItem, EquationRef
    n1 = Ident("n", Number("1"))
    ranked = RankedContext(
        items=(ContextItem(EquationRef("n1", "e1"), 1.0, 0),),
        focus=EquationRef("n1", "e1"),
        ident_forms=(n1, GreekLetter("theta", Number("2"))),
    )
    t = parse_spoken("n squared", context=ranked)
    assert normalize(t.expr) == Power(n1, Number("2"))
    t2 = parse_spoken("theta", context=ranked)
    assert normalize(t2.expr) == GreekLetter("theta", Number("2"))
    # explicit subscript wins over the bias
    t3 = parse_spoken("n sub three", context=ranked)
    assert normalize(t3.expr) == Ident("n", Number("3"))
