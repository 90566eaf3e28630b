from __future__ import annotations

import itertools
from fractions import Fraction

import pytest

TRANSLATIONS = [
    ("A spaceship traveled 0.5 light-year from earth to planet x and 0.1 light-year from planet x "
     "to planet y. Then it traveled 0.1 light-year from planet y back to Earth. How many light-years "
     "did the spaceship travel in all?", "x = 0.5 + 0.1 + 0.1", Fraction("0.7"), "0.5 0.1 + 0.1 +"),
    ("There were 16 friends playing a video game online when 7 players quit. If each player left had "
     "8 lives, how many lives did they have total?", "x = 8 * (16 - 7)", Fraction(72), "8 16 7 - *"),
    ("Lisa flew 256 miles at 32 miles per hour. How long did Lisa fly?", "x = 256 / 32", Fraction(8),
     "256 32 /"),
    ("Debby's class is going on a field trip to the zoo. If each van can hold 4 people and there are "
     "2 students and 6 adults going, how many vans will they need?", "x = (2 + 6) / 4", Fraction(2),
     "2 6 + 4 /"),
]

GEORGE = ("George has 2 peaches and 4 apples. Lauren gives George 5 of her peaches. "
          "How many peaches does George have?")
GEORGE_EQUATION = "2 + 5"
# most frequent content word ("apple") is missing from the question sentence
FALLBACK = "Mary picked 5 apples and 3 pears. She gave away 2 apples. How many fruits are left?"


def enumerate_shapes(n_ops: int):
    """Every binary tree shape with ``n_ops`` internal nodes, as nested tuples (None = leaf)."""
    if n_ops == 0:
        yield None
        return
    for left_ops in range(n_ops):
        for left in enumerate_shapes(left_ops):
            for right in enumerate_shapes(n_ops - 1 - left_ops):
                yield (left, right)


def count_leaves(shape) -> int:
    return 1 if shape is None else count_leaves(shape[0]) + count_leaves(shape[1])


def count_ops(shape) -> int:
    return 0 if shape is None else 1 + count_ops(shape[0]) + count_ops(shape[1])


def fill(shape, ops, vals):
    """Independent oracle tree: ('op', l, r) tuples and ints, filled in preorder."""
    ops, vals = iter(ops), iter(vals)

    def go(s):
        if s is None:
            return next(vals)
        op = next(ops)
        return (op, go(s[0]), go(s[1]))

    return go(shape)


def oracle_trees(max_ops: int = 3, operands=range(1, 10)):
    for n in range(1, max_ops + 1):
        for shape in enumerate_shapes(n):
            k = count_leaves(shape)
            for ops in itertools.product("+-*/", repeat=n):
                for vals in itertools.product(operands, repeat=k):
                    yield fill(shape, ops, vals)


def oracle_eval(t):
    if isinstance(t, int):
        return Fraction(t)
    op, a, b = t
    x, y = oracle_eval(a), oracle_eval(b)
    if op == "/":
        return None if y == 0 or x is None or y is None else x / y
    if x is None or y is None:
        return None
    return {"+": x + y, "-": x - y, "*": x * y}[op]


def oracle_prefix(t) -> str:
    return str(t) if isinstance(t, int) else f"{t[0]} {oracle_prefix(t[1])} {oracle_prefix(t[2])}"


def oracle_postfix(t) -> str:
    return str(t) if isinstance(t, int) else f"{oracle_postfix(t[1])} {oracle_postfix(t[2])} {t[0]}"


def oracle_infix(t, top: bool = True) -> str:
    if isinstance(t, int):
        return str(t)
    body = f"{oracle_infix(t[1], False)} {t[0]} {oracle_infix(t[2], False)}"
    return body if top else f"( {body} )"


def pairwise_operands(k: int):
    """81 operand tuples over {1..9} in which every pair of positions sees all 81 digit pairs."""
    if k < 4:
        yield from itertools.product(range(1, 10), repeat=k)
        return
    for i in range(9):
        for j in range(9):
            yield (i + 1, j + 1, (i + j) % 9 + 1, (i + 2 * j) % 9 + 1)


def covering_trees():
    """All 1-2 operator trees over {1..9}; 3-operator structures crossed with a pairwise design."""
    for n in (1, 2, 3):
        for shape in enumerate_shapes(n):
            k = count_leaves(shape)
            for ops in itertools.product("+-*/", repeat=n):
                for vals in pairwise_operands(k):
                    yield fill(shape, ops, vals)


def check_round_trip(t) -> bool:
    """infix -> prefix -> tree -> postfix -> tree -> infix against the oracle renderings."""
    from mwp_forge.expr import DivisionByZero, evaluate, parse_infix, parse_notation, serialize, to_notation

    infix = oracle_infix(t)
    tree = parse_infix(infix)
    prefix = serialize(to_notation(tree, "prefix"))
    from_prefix = parse_notation(prefix, "prefix")
    postfix = serialize(to_notation(from_prefix, "postfix"))
    from_postfix = parse_notation(postfix, "postfix")
    back = serialize(to_notation(from_postfix, "infix"))
    if (prefix, postfix, back) != (oracle_prefix(t), oracle_postfix(t), infix) or from_postfix != tree:
        return False
    expected = oracle_eval(t)
    try:
        return evaluate(from_postfix) == expected
    except DivisionByZero:
        return expected is None


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE: list[tuple[str, bool, str]] = []


class Criterion:
    def __init__(self, name: str):
        self.name = name
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} {exc_type.__name__}: {exc}".strip()
        ACCEPTANCE.append((self.name, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'}  {self.name}: {detail}")
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
