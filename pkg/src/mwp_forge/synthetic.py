"""Templated one- and two-operator word problems for desk-scale training runs."""

from __future__ import annotations

import json
import random
from fractions import Fraction
from pathlib import Path

from .dataset import Corpus, MWPExample
from .expr import evaluate, parse_infix

NAMES = ["Adam", "Lisa", "George", "Lauren", "Debby", "Jason", "Maria", "Sam", "Nina", "Omar",
         "Priya", "Tom", "Wendy", "Kevin", "Rosa", "Ivan", "Chloe", "Ben", "Hana", "Luis"]
OBJECTS = ["apples", "peaches", "marbles", "stickers", "cookies", "pencils", "books", "cards",
           "shells", "balloons", "candies", "stamps", "toys", "flowers", "coins", "crayons"]
SHOPS = ["bakery", "store", "market", "shop", "kiosk"]

# (question template, infix equation over a, b, c)
TEMPLATES = [
    ("{n} has {a} {o}. {m} gives {n} {b} more {o}. How many {o} does {n} have now?", "a + b"),
    ("{n} had {a} {o}. {n} gave {b} {o} to {m}. How many {o} does {n} have left?", "a - b"),
    ("{n} buys {a} boxes of {o}. Each box holds {b} {o}. How many {o} did {n} buy?", "a * b"),
    ("{n} shares {a} {o} equally among {b} friends. How many {o} does each friend get?", "a / b"),
    ("A {s} sold {a} {o} in the morning and {b} {o} in the afternoon. "
     "How many {o} did the {s} sell in total?", "a + b"),
    ("There are {a} {o} in a basket. {n} puts {b} more {o} in the basket and then takes out {c} {o}. "
     "How many {o} are in the basket now?", "a + b - c"),
    ("{n} bought {a} packs of {o} with {b} {o} in each pack. {m} took {c} of them. "
     "How many {o} are left?", "a * b - c"),
    ("{n} had {a} {o}. {n} lost {b} {o} and then found {c} more {o}. How many {o} does {n} have?",
     "a - b + c"),
    ("{n} collected {a} {o} and {m} collected {b} {o}. They put them equally into {c} bags. "
     "How many {o} are in each bag?", "(a + b) / c"),
    ("{n} has {a} {o}. {m} has {b} times as many {o} as {n}. How many {o} does {m} have?", "a * b"),
    ("{n} read {a} pages on Monday and {b} pages each day for {c} days after that. "
     "How many pages did {n} read?", "a + b * c"),
    ("{n} had {a} {o}. {n} gave {b} {o} to each of {c} friends. How many {o} does {n} have now?",
     "a - b * c"),
    ("{n} has {a} {o} and {m} has {b} {o}. How many more {o} does {n} have than {m}?", "a - b"),
    ("A {s} packs {a} {o} into bags of {b}. How many bags does the {s} fill?", "a / b"),
]


def _draw(rng: random.Random, equation: str) -> dict[str, int]:
    """Operand values keeping every intermediate result a positive integer."""
    while True:
        vals = {k: rng.randint(2, 60) for k in "abc"}
        if "/" in equation:
            if equation == "(a + b) / c":
                vals["c"] = rng.randint(2, 9)
                total = vals["c"] * rng.randint(2, 20)
                vals["a"] = rng.randint(1, total - 1)
                vals["b"] = total - vals["a"]
            else:
                vals["b"] = rng.randint(2, 12)
                vals["a"] = vals["b"] * rng.randint(2, 15)
        if "*" in equation:
            vals["b"] = rng.randint(2, 12)
            if equation == "a - b * c":
                vals["c"] = rng.randint(2, 6)
                vals["a"] = vals["b"] * vals["c"] + rng.randint(1, 40)
        value = evaluate(parse_infix(equation.replace("a", str(vals["a"])).replace("b", str(vals["b"]))
                                     .replace("c", str(vals["c"]))))
        if value > 0 and value.denominator == 1:
            return vals


def generate(n: int, seed: int = 0, max_operators: int = 2) -> list[MWPExample]:
    rng = random.Random(seed)
    templates = [t for t in TEMPLATES if sum(t[1].count(op) for op in "+-*/") <= max_operators]
    examples = []
    for i in range(n):
        question, equation = templates[i % len(templates)]
        vals = _draw(rng, equation)
        n1, n2 = rng.sample(NAMES, 2)
        words = {"n": n1, "m": n2, "o": rng.choice(OBJECTS), "s": rng.choice(SHOPS)}
        text = question.format(**words, **vals)
        infix = equation
        for k, v in vals.items():
            infix = infix.replace(k, str(v))
        answer = evaluate(parse_infix(infix))
        examples.append(MWPExample(f"syn-{seed}-{i:04d}", text, f"x = {infix}", Fraction(answer)))
    rng.shuffle(examples)
    return examples


def generate_corpus(n: int, seed: int = 0, max_operators: int = 2) -> Corpus:
    return Corpus("custom", generate(n, seed, max_operators))


def write_corpus(path: str | Path, examples: list[MWPExample]) -> Path:
    path = Path(path)
    records = [{"id": e.id, "sQuestion": e.question, "lEquations": [e.equation],
                "lSolutions": [float(e.answer)]} for e in examples]
    path.write_text(json.dumps(records, indent=1), encoding="utf-8")
    return path
