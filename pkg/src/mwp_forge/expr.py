"""Arithmetic expressions: tokens, trees, notation conversion and evaluation.

Infix strings are parsed with an operator-precedence (shunting-yard) parser
into binary :class:`Node`/:class:`Leaf` trees.  Prefix and postfix forms are
preorder and postorder traversals of the same tree, so they never carry
parentheses.  Arithmetic is exact (:class:`fractions.Fraction`).
"""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union


class ExprError(ValueError):
    """Base class for expression parsing and evaluation failures."""


class UnknownCharacter(ExprError):
    def __init__(self, position: int, char: str):
        super().__init__(f"unknown character {char!r} at position {position}")
        self.position = position
        self.char = char


class MalformedNumber(ExprError):
    pass


class UnbalancedParentheses(ExprError):
    pass


class DanglingOperator(ExprError):
    pass


class EmptyExpression(ExprError):
    pass


class ArityError(ExprError):
    pass


class TrailingTokens(ExprError):
    pass


class DivisionByZero(ExprError, ZeroDivisionError):
    pass


class UnresolvedTag(ExprError):
    def __init__(self, tag: str):
        super().__init__(f"no value for tag <{tag}>")
        self.tag = tag


class Notation(str, enum.Enum):
    INFIX = "infix"
    PREFIX = "prefix"
    POSTFIX = "postfix"


# -- tokens -----------------------------------------------------------------

OPERATORS = ("+", "-", "*", "/")
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


@dataclass(frozen=True)
class Number:
    value: Fraction

    def __str__(self) -> str:
        if self.value.denominator == 1:
            return str(self.value.numerator)
        return format_number(self.value)


@dataclass(frozen=True)
class Tag:
    name: str

    def __str__(self) -> str:
        return render_tag(self.name)


@dataclass(frozen=True)
class Op:
    symbol: str

    def __post_init__(self) -> None:
        if self.symbol not in OPERATORS:
            raise ValueError(f"not an arithmetic operator: {self.symbol!r}")

    def __str__(self) -> str:
        return self.symbol


@dataclass(frozen=True)
class LParen:
    def __str__(self) -> str:
        return "("


@dataclass(frozen=True)
class RParen:
    def __str__(self) -> str:
        return ")"


Token = Union[Number, Tag, Op, LParen, RParen]

# tokens are immutable, so operators and parentheses can be shared
_OPS = {s: Op(s) for s in OPERATORS}
_LPAREN, _RPAREN = LParen(), RParen()
Operand = Union[Number, Tag]

TAG_OPEN, TAG_CLOSE = "⟨", "⟩"


def render_tag(name: str, ascii_alias: bool = False) -> str:
    if ascii_alias:
        return f"<{name}>"
    return f"{TAG_OPEN}{name}{TAG_CLOSE}"


def format_number(value: Fraction) -> str:
    """Render a terminating decimal without exponent or trailing zeros."""
    if not isinstance(value, Fraction):
        value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        # not a terminating decimal; only reachable through division results
        return repr(float(value))
    digits = max(twos, fives)
    scaled = abs(value.numerator) * (10**digits // value.denominator)
    sign = "-" if value < 0 else ""
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{str(frac).rjust(digits, '0').rstrip('0')}"


def parse_number(text: str) -> Fraction:
    """Exact value of a decimal literal such as ``"13"``, ``"0.5"``, ``"1,200"``."""
    cleaned = text.replace(",", "")
    if cleaned.isascii() and cleaned.isdigit():
        return Fraction(int(cleaned))
    if not _DECIMAL_RE.fullmatch(cleaned):
        raise MalformedNumber(f"malformed number {text!r}")
    whole, _, frac = cleaned.partition(".")
    return Fraction(int(whole or "0") * 10 ** len(frac) + int(frac), 10 ** len(frac))


_DECIMAL_RE = re.compile(r"\d+(\.\d+)?|\.\d+")


@functools.lru_cache(maxsize=4096)
def _number_token(literal: str) -> Number:
    return Number(parse_number(literal))


_SCAN_RE = re.compile(r"\s+|(?P<num>[0-9.]+)|(?P<sym>[-+*/()])|⟨(?P<tag>[a-z]+)⟩|<(?P<atag>[a-z]+)>")
_SYMBOLS = {**_OPS, "(": _LPAREN, ")": _RPAREN}


def tokenize_expression(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, n = 0, len(text)
    match = _SCAN_RE.match
    while pos < n:
        m = match(text, pos)
        if m is None:
            raise UnknownCharacter(pos, text[pos])
        kind = m.lastgroup
        if kind == "num":
            literal = m.group(kind)
            if literal.count(".") > 1 or literal.endswith("."):
                raise MalformedNumber(f"malformed number {literal!r} at position {pos}")
            tokens.append(_number_token(literal))
        elif kind == "sym":
            tokens.append(_SYMBOLS[m.group(kind)])
        elif kind is not None:
            tokens.append(Tag(m.group(kind)))
        pos = m.end()
    return tokens


def _as_tokens(source: str | Sequence[Token]) -> list[Token]:
    return tokenize_expression(source) if isinstance(source, str) else list(source)


def serialize(tokens: Iterable[Token], ascii_tags: bool = False) -> str:
    """Space-separated rendering of a token sequence."""
    out = []
    for tok in tokens:
        if isinstance(tok, Tag):
            out.append(render_tag(tok.name, ascii_tags))
        else:
            out.append(str(tok))
    return " ".join(out)


# -- trees ------------------------------------------------------------------


@dataclass(frozen=True)
class Leaf:
    operand: Operand

    def __str__(self) -> str:
        return str(self.operand)


@dataclass(frozen=True)
class Node:
    op: str
    left: "ExprTree"
    right: "ExprTree"

    def __post_init__(self) -> None:
        if self.op not in OPERATORS:
            raise ValueError(f"not an arithmetic operator: {self.op!r}")

    def __str__(self) -> str:
        return serialize(to_notation(self, Notation.INFIX))


ExprTree = Union[Leaf, Node]


def leaf(value: int | str | Fraction) -> Leaf:
    """Convenience constructor: ints/Fractions become numbers, strings tags."""
    if isinstance(value, str):
        return Leaf(Tag(value))
    return Leaf(Number(Fraction(value)))


def leaves(tree: ExprTree) -> list[Operand]:
    """Operands in left-to-right order (identical for every traversal)."""
    if isinstance(tree, Leaf):
        return [tree.operand]
    return leaves(tree.left) + leaves(tree.right)


def operator_count(tree: ExprTree) -> int:
    if isinstance(tree, Leaf):
        return 0
    return 1 + operator_count(tree.left) + operator_count(tree.right)


def map_leaves(tree: ExprTree, fn) -> ExprTree:
    if isinstance(tree, Leaf):
        return Leaf(fn(tree.operand))
    return Node(tree.op, map_leaves(tree.left, fn), map_leaves(tree.right, fn))


def parse_infix(source: str | Sequence[Token]) -> ExprTree:
    """Shunting-yard parse; ``*``/``/`` bind tighter, all operators left-associative."""
    tokens = _as_tokens(source)
    if not tokens:
        raise EmptyExpression("empty expression")

    operands: list[ExprTree] = []
    operators: list[Token] = []

    def reduce_top() -> None:
        op = operators.pop()
        if len(operands) < 2:
            raise DanglingOperator(f"operator {op} is missing an operand")
        right = operands.pop()
        left = operands.pop()
        operands.append(Node(op.symbol, left, right))

    expect_operand = True
    for tok in tokens:
        if isinstance(tok, (Number, Tag)):
            if not expect_operand:
                raise DanglingOperator(f"missing operator before {tok}")
            operands.append(Leaf(tok))
            expect_operand = False
        elif isinstance(tok, LParen):
            if not expect_operand:
                raise DanglingOperator("missing operator before '('")
            operators.append(tok)
        elif isinstance(tok, RParen):
            if expect_operand:
                if operators and isinstance(operators[-1], LParen):
                    raise EmptyExpression("empty parentheses")
                raise DanglingOperator("operator missing its right operand before ')'")
            while operators and not isinstance(operators[-1], LParen):
                reduce_top()
            if not operators:
                raise UnbalancedParentheses("unmatched ')'")
            operators.pop()
        else:
            if expect_operand:
                # unary minus is not part of the grammar
                raise DanglingOperator(f"operator {tok} is missing its left operand")
            while (
                operators
                and isinstance(operators[-1], Op)
                and PRECEDENCE[operators[-1].symbol] >= PRECEDENCE[tok.symbol]
            ):
                reduce_top()
            operators.append(tok)
            expect_operand = True

    if expect_operand:
        raise DanglingOperator("expression ends with an operator")
    while operators:
        if isinstance(operators[-1], LParen):
            raise UnbalancedParentheses("unmatched '('")
        reduce_top()
    if len(operands) != 1:
        raise TrailingTokens("expression did not reduce to a single tree")
    return operands[0]


def to_notation(tree: ExprTree, target: Notation | str) -> list[Token]:
    target = Notation(target)
    out: list[Token] = []

    def walk(t: ExprTree, top: bool) -> None:
        if isinstance(t, Leaf):
            out.append(t.operand)
            return
        op = _OPS[t.op]
        if target is Notation.PREFIX:
            out.append(op)
            walk(t.left, False)
            walk(t.right, False)
        elif target is Notation.POSTFIX:
            walk(t.left, False)
            walk(t.right, False)
            out.append(op)
        else:
            if not top:
                out.append(_LPAREN)
            walk(t.left, False)
            out.append(op)
            walk(t.right, False)
            if not top:
                out.append(_RPAREN)

    walk(tree, True)
    return out


def _parse_prefix(tokens: list[Token]) -> ExprTree:
    pos = 0

    def parse() -> ExprTree:
        nonlocal pos
        if pos >= len(tokens):
            raise ArityError("operator is missing operands")
        tok = tokens[pos]
        pos += 1
        if isinstance(tok, (Number, Tag)):
            return Leaf(tok)
        if isinstance(tok, Op):
            left = parse()
            right = parse()
            return Node(tok.symbol, left, right)
        raise ArityError(f"parenthesis {tok} not allowed in prefix notation")

    tree = parse()
    if pos != len(tokens):
        raise TrailingTokens(f"{len(tokens) - pos} token(s) after a complete expression")
    return tree


def _parse_postfix(tokens: list[Token]) -> ExprTree:
    stack: list[ExprTree] = []
    for tok in tokens:
        if isinstance(tok, (Number, Tag)):
            stack.append(Leaf(tok))
        elif isinstance(tok, Op):
            if len(stack) < 2:
                raise ArityError(f"operator {tok} has fewer than two operands")
            right = stack.pop()
            left = stack.pop()
            stack.append(Node(tok.symbol, left, right))
        else:
            raise ArityError(f"parenthesis {tok} not allowed in postfix notation")
    if len(stack) > 1:
        raise TrailingTokens(f"{len(stack)} disconnected subexpressions")
    return stack[0]


def parse_notation(source: str | Sequence[Token], notation: Notation | str) -> ExprTree:
    """Inverse of :func:`to_notation`."""
    notation = Notation(notation)
    tokens = _as_tokens(source)
    if not tokens:
        raise EmptyExpression("empty expression")
    if notation is Notation.INFIX:
        return parse_infix(tokens)
    if notation is Notation.PREFIX:
        return _parse_prefix(tokens)
    return _parse_postfix(tokens)


def evaluate(tree: ExprTree, mapping: Mapping[str, Fraction | float | int] | None = None) -> Fraction:
    """Exact value of ``tree``; tag leaves are looked up in ``mapping``."""
    if isinstance(tree, Leaf):
        operand = tree.operand
        if isinstance(operand, Number):
            return operand.value
        if mapping is None or operand.name not in mapping:
            raise UnresolvedTag(operand.name)
        return Fraction(mapping[operand.name])
    left = evaluate(tree.left, mapping)
    right = evaluate(tree.right, mapping)
    if tree.op == "+":
        return left + right
    if tree.op == "-":
        return left - right
    if tree.op == "*":
        return left * right
    if right == 0:
        raise DivisionByZero("division by zero")
    return left / right


def convert(expression: str, source: Notation | str, target: Notation | str) -> str:
    return serialize(to_notation(parse_notation(expression, source), target))
