import random

import pytest

from phoenix.exprs import (
    ADD, IMUL, MUL, SUB,
    BinaryOp, Fraction, GreekLetter, Group, Ident, InvalidExpressionError,
    Number, expr_from_json, expr_to_json, free_idents, normalize,
    structurally_equal, validate_expr,
)
from _generators import gen_expr

x = Ident("x")
y = Ident("y")


def test_group_collapses():
    assert normalize(Group(x)) == x
    assert normalize(Group(Group(x))) == x


def test_implicit_mul_left_nested():
    a, b, c = Ident("a"), Ident("b"), Ident("c")
    left = BinaryOp(IMUL, BinaryOp(IMUL, a, b), c)
    right = BinaryOp(IMUL, a, BinaryOp(IMUL, b, c))
    assert normalize(left) == normalize(right)
    # explicit mul canonicalizes the same way
    left_m = BinaryOp(MUL, BinaryOp(MUL, a, b), c)
    right_m = BinaryOp(MUL, a, BinaryOp(MUL, b, c))
    assert normalize(left_m) == normalize(right_m)


def test_normalize_idempotent_on_random_trees():
    rng = random.Random(42)
    for _ in range(500):
        e = gen_expr(rng, rng.randint(0, 6))
        once = normalize(e)
        assert normalize(once) == once


def test_omicron_canonicalizes_to_ident_o():
    assert normalize(GreekLetter("omicron")) == Ident("o")


def test_structural_equality_is_equivalence():
    rng = random.Random(7)
    exprs = [gen_expr(rng, 3) for _ in range(40)]
    for e in exprs:
        assert structurally_equal(e, e)
    for a in exprs[:10]:
        for b in exprs[:10]:
            assert structurally_equal(a, b) == structurally_equal(b, a)


def test_structural_inequality():
    assert not structurally_equal(BinaryOp(ADD, x, Number("3")),
                                  BinaryOp(SUB, x, Number("3")))


def test_validate_rejects_bad_numbers():
    with pytest.raises(InvalidExpressionError):
        validate_expr(Number("+3"))
    with pytest.raises(InvalidExpressionError):
        validate_expr(Number("3.1.4"))
    validate_expr(Number("3.14"))
    validate_expr(Number("007"))


def test_validate_rejects_literal_zero_denominator():
    with pytest.raises(InvalidExpressionError):
        validate_expr(Fraction(x, Number("0")))
    with pytest.raises(InvalidExpressionError):
        validate_expr(Fraction(x, Group(Number("0.0"))))
    validate_expr(Fraction(x, y))  # symbolic zero is permitted


def test_validate_rejects_unknown_greek():
    with pytest.raises(InvalidExpressionError):
        validate_expr(GreekLetter("klingon"))


def test_free_idents_respect_binders():
    from phoenix.latex import parse_latex
    e = parse_latex(r"\int_0^1 x^2 \, dx")
    assert free_idents(e) == set()
    e2 = parse_latex(r"\int x y \, dx")
    assert free_idents(e2) == {Ident("y")}


def test_expr_json_round_trip():
    rng = random.Random(99)
    for _ in range(300):
        e = gen_expr(rng, rng.randint(0, 5))
        assert expr_from_json(expr_to_json(e)) == e


def test_expr_json_rejects_unknown_kind():
    from phoenix.exprs import ExprDecodeError
    with pytest.raises(ExprDecodeError):
        expr_from_json({"kind": "matrix"})
