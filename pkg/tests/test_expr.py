from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwp_forge.expr import (
    ArityError,
    DanglingOperator,
    DivisionByZero,
    EmptyExpression,
    ExprError,
    Leaf,
    MalformedNumber,
    Node,
    Notation,
    Number,
    Tag,
    TrailingTokens,
    UnbalancedParentheses,
    UnknownCharacter,
    UnresolvedTag,
    convert,
    evaluate,
    format_number,
    leaf,
    leaves,
    operator_count,
    parse_infix,
    parse_notation,
    serialize,
    to_notation,
    tokenize_expression,
)

from conftest import oracle_eval, oracle_infix, oracle_postfix, oracle_prefix


def render(tree, notation):
    return serialize(to_notation(tree, notation))


def test_precedence_and_left_associativity():
    assert render(parse_infix("1 + 2 * 3"), "postfix") == "1 2 3 * +"
    assert render(parse_infix("8 - 3 - 2"), "postfix") == "8 3 - 2 -"
    assert render(parse_infix("8 / 4 / 2"), "prefix") == "/ / 8 4 2"
    assert evaluate(parse_infix("8 - 3 - 2")) == 3
    assert evaluate(parse_infix("8 / 4 / 2")) == 1


def test_reference_trees():
    tree = Node("/", Node("+", leaf(2), leaf(6)), leaf(4))
    assert render(tree, "postfix") == "2 6 + 4 /"
    assert parse_notation("0.5 0.1 + 0.1 +", "postfix") == Node(
        "+", Node("+", leaf(Fraction("0.5")), leaf(Fraction("0.1"))), leaf(Fraction("0.1")))
    assert evaluate(parse_notation("8 16 7 - *", "postfix")) == 72


def test_infix_rendering_parenthesizes_inner_compounds():
    tree = parse_infix("(1 + 2) * 3 - 4 / 5")
    assert render(tree, "infix") == "( ( 1 + 2 ) * 3 ) - ( 4 / 5 )"
    assert render(parse_infix("7"), "infix") == "7"


def test_tags_and_ascii_alias():
    assert tokenize_expression("<a> ⟨b⟩ +") == [Tag("a"), Tag("b"), tokenize_expression("+")[0]]
    assert convert("<a> + <b> * <c>", "infix", "postfix") == "⟨a⟩ ⟨b⟩ ⟨c⟩ * +"
    assert serialize(tokenize_expression("⟨a⟩ 2 *"), ascii_tags=True) == "<a> 2 *"


def test_numbers():
    toks = tokenize_expression("2.50 1000")
    assert toks == [Number(Fraction(5, 2)), Number(Fraction(1000))]
    assert format_number(Fraction(5, 2)) == "2.5"
    assert format_number(Fraction(72)) == "72"


@pytest.mark.parametrize(
    "text, error",
    [
        ("1 +", DanglingOperator),
        ("-3", DanglingOperator),
        ("1 2", DanglingOperator),
        ("(1", UnbalancedParentheses),
        ("1)", UnbalancedParentheses),
        ("", EmptyExpression),
        ("()", EmptyExpression),
        ("1 $ 2", UnknownCharacter),
        ("1..2", MalformedNumber),
    ],
)
def test_infix_errors(text, error):
    with pytest.raises(error):
        parse_infix(text)


def test_unknown_character_reports_position():
    with pytest.raises(UnknownCharacter) as info:
        parse_infix("1 + x")
    assert info.value.position == 4


@pytest.mark.parametrize(
    "text, notation, error",
    [
        ("1 +", "prefix", TrailingTokens),
        ("1 +", "postfix", ArityError),
        ("+ 1 2 3", "prefix", TrailingTokens),
        ("1 2", "postfix", TrailingTokens),
        ("( 1 2 + )", "postfix", ArityError),
    ],
)
def test_prefix_postfix_errors(text, notation, error):
    with pytest.raises(error):
        parse_notation(text, notation)


def test_evaluation_errors():
    with pytest.raises(DivisionByZero):
        evaluate(parse_infix("1 / (2 - 2)"))
    with pytest.raises(ZeroDivisionError):
        evaluate(parse_infix("3 / 0"))
    with pytest.raises(UnresolvedTag):
        evaluate(parse_infix("<a> + 1"))
    assert evaluate(parse_infix("<a> + 1"), {"a": 2}) == 3


def test_all_errors_share_a_base():
    for cls in (ArityError, DanglingOperator, DivisionByZero, UnknownCharacter, UnresolvedTag):
        assert issubclass(cls, ExprError)
        assert issubclass(cls, ValueError)


def test_tree_helpers():
    tree = parse_infix("<a> * (<b> + 3)")
    assert operator_count(tree) == 2
    assert leaves(tree) == [Tag("a"), Tag("b"), Number(Fraction(3))]
    assert isinstance(tree.left, Leaf)


def test_notation_enum_accepts_strings():
    assert Notation("postfix") is Notation.POSTFIX
    assert render(parse_infix("1+2"), Notation.PREFIX) == "+ 1 2"


# -- properties --------------------------------------------------------------

operands = st.integers(min_value=0, max_value=99)


def trees():
    return st.recursive(
        operands,
        lambda sub: st.tuples(st.sampled_from("+-*/"), sub, sub),
        max_leaves=8,
    )


@settings(max_examples=300, deadline=None)
@given(trees())
def test_round_trips_match_oracle(t):
    infix = oracle_infix(t)
    tree = parse_infix(infix)
    assert render(tree, "prefix") == oracle_prefix(t)
    assert render(tree, "postfix") == oracle_postfix(t)
    assert render(tree, "infix") == infix
    for n in Notation:
        assert parse_notation(render(tree, n), n) == tree
    expected = oracle_eval(t)
    if expected is None:
        with pytest.raises(DivisionByZero):
            evaluate(tree)
    else:
        assert evaluate(tree) == expected


@settings(max_examples=200, deadline=None)
@given(trees())
def test_prefix_postfix_contain_no_parentheses(t):
    tree = parse_infix(oracle_infix(t))
    for n in ("prefix", "postfix"):
        text = render(tree, n)
        assert "(" not in text and ")" not in text
        assert len(text.split()) == 2 * operator_count(tree) + 1


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet="0123456789+-*/(). <>ab", max_size=20))
def test_parser_never_raises_foreign_errors(text):
    for n in Notation:
        try:
            parse_notation(text, n)
        except ExprError:
            pass


@pytest.mark.slow
def test_every_tree_up_to_three_operators():
    """Exhaustive: all 2,123,172 trees over {1..9}; no time bound."""
    from conftest import check_round_trip, oracle_trees

    total = failures = 0
    for t in oracle_trees(3):
        total += 1
        failures += not check_round_trip(t)
    assert total == 324 + 23_328 + 2_099_520
    assert failures == 0
