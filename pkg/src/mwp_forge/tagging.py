"""Number normalization and tag substitution for word-problem text.

Numbers in a question are swapped for generic tags (``⟨a⟩``, ``⟨b⟩``, ...)
assigned in order of appearance.  The tag -> value mapping travels with the
example so that decoded model output can be turned back into numbers.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .expr import (
    ExprTree,
    Leaf,
    Node,
    Number,
    Tag,
    Token,
    format_number,
    parse_number,
    render_tag,
)

TAG_ALPHABET = string.ascii_lowercase


class TaggingError(ValueError):
    pass


class TooManyNumbers(TaggingError):
    pass


class UnmappedNumber(TaggingError):
    def __init__(self, value: Fraction):
        super().__init__(f"equation number {format_number(value)} does not occur in the question")
        self.value = value


# -- number words -----------------------------------------------------------

UNITS = {
    "zero": 0, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
    "thirteen": 13, "fourteen": 14, "fifteen": 15, "sixteen": 16,
    "seventeen": 17, "eighteen": 18, "nineteen": 19,
}
TENS = {
    "twenty": 20, "thirty": 30, "forty": 40, "fifty": 50,
    "sixty": 60, "seventy": 70, "eighty": 80, "ninety": 90,
}
COLLECTIVES = {"dozen": "12", "half": "0.5"}

_DIGIT_UNITS = "|".join(k for k, v in UNITS.items() if 1 <= v <= 9)
_NUMBER_WORD_RE = re.compile(
    r"(?<![\w-])(?:"
    rf"(?P<tens>{'|'.join(TENS)})(?:[- ](?P<unit>{_DIGIT_UNITS}))?"
    rf"|(?P<single>{'|'.join(sorted(UNITS, key=len, reverse=True))}|{'|'.join(COLLECTIVES)})"
    r")(?![\w-])",
    re.IGNORECASE,
)


def _number_word_value(m: re.Match) -> str:
    if m.group("tens"):
        value = TENS[m.group("tens").lower()]
        if m.group("unit"):
            value += UNITS[m.group("unit").lower()]
        return str(value)
    word = m.group("single").lower()
    if word in COLLECTIVES:
        return COLLECTIVES[word]
    return str(UNITS[word])


def normalize_number_words(text: str) -> str:
    """Replace cardinal number words with digits (``"forty-two"`` -> ``"42"``)."""
    return _NUMBER_WORD_RE.sub(_number_word_value, text)


# -- spans ------------------------------------------------------------------


@dataclass(frozen=True)
class NumberSpan:
    start: int
    end: int
    value: Fraction
    surface: str


_NUMBER_RE = re.compile(r"(?<![\d.])(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?!\d)")


def detect_numbers(text: str) -> list[NumberSpan]:
    return [
        NumberSpan(m.start(), m.end(), parse_number(m.group()), m.group())
        for m in _NUMBER_RE.finditer(text)
    ]


# -- tagged questions -------------------------------------------------------


@dataclass
class TaggedQuestion:
    text: str
    mapping: list[tuple[str, Fraction]] = field(default_factory=list)
    untouched: list[NumberSpan] = field(default_factory=list)

    @property
    def values(self) -> dict[str, Fraction]:
        return dict(self.mapping)

    def to_json(self) -> dict:
        return {"tags": mapping_to_json(self.mapping)}


def mapping_to_json(mapping: Iterable[tuple[str, Fraction]]) -> list[list]:
    out = []
    for tag, value in mapping:
        value = Fraction(value)
        out.append([tag, int(value) if value.denominator == 1 else float(format_number(value))])
    return out


def mapping_from_json(obj: Mapping | Sequence) -> list[tuple[str, Fraction]]:
    pairs = obj["tags"] if isinstance(obj, Mapping) else obj
    return [(str(tag), Fraction(str(value))) for tag, value in pairs]


def substitute_spans(
    text: str,
    tagged: Sequence[NumberSpan],
    deleted: Sequence[NumberSpan] = (),
) -> TaggedQuestion:
    """Rewrite ``text`` with ``tagged`` spans replaced by tags and ``deleted`` removed.

    Tags are handed out densely in textual order.
    """
    if len(tagged) > len(TAG_ALPHABET):
        raise TooManyNumbers(f"{len(tagged)} numbers exceed the {len(TAG_ALPHABET)}-tag alphabet")
    tagged_starts = {s.start for s in tagged}
    deleted_starts = {s.start for s in deleted}
    spans = sorted([*tagged, *deleted], key=lambda s: s.start)
    untouched = [s for s in detect_numbers(text) if s.start not in tagged_starts | deleted_starts]

    pieces: list[str] = []
    mapping: list[tuple[str, Fraction]] = []
    cursor = 0
    for span in spans:
        pieces.append(text[cursor:span.start])
        if span.start in tagged_starts:
            name = TAG_ALPHABET[len(mapping)]
            mapping.append((name, span.value))
            pieces.append(render_tag(name))
        else:
            # drop the number together with one adjoining space
            after = text[span.end:span.end + 1]
            if pieces[-1].endswith(" ") and (after == "" or not after.isalnum()):
                pieces[-1] = pieces[-1][:-1]
            elif after == " ":
                cursor = span.end + 1
                continue
        cursor = span.end
    pieces.append(text[cursor:])
    return TaggedQuestion("".join(pieces), mapping, untouched)


def tag_all(question: str) -> TaggedQuestion:
    return substitute_spans(question, detect_numbers(question))


def tag_values(spans: Sequence[NumberSpan], wanted: Iterable[Fraction]) -> list[NumberSpan]:
    """Pick spans matching ``wanted`` as a multiset, earliest span first."""
    chosen: list[NumberSpan] = []
    taken: set[int] = set()
    for value in wanted:
        for span in spans:
            if span.start not in taken and span.value == value:
                taken.add(span.start)
                chosen.append(span)
                break
    return sorted(chosen, key=lambda s: s.start)


def retag_equation(
    equation: ExprTree,
    mapping: Sequence[tuple[str, Fraction]],
    keep_unmapped: bool = False,
) -> ExprTree:
    """Express the numeric leaves of ``equation`` over the question's tags.

    Each leaf binds to the earliest not-yet-used tag carrying its value; once
    every such tag is used, further equal leaves reuse the first one.  With
    ``keep_unmapped`` numbers absent from the mapping stay literal instead of
    raising :class:`UnmappedNumber`.
    """
    used: set[str] = set()

    def bind(tree: ExprTree) -> ExprTree:
        if isinstance(tree, Node):
            left = bind(tree.left)
            return Node(tree.op, left, bind(tree.right))
        operand = tree.operand
        if not isinstance(operand, Number):
            return tree
        candidates = [tag for tag, value in mapping if value == operand.value]
        if not candidates:
            if keep_unmapped:
                return tree
            raise UnmappedNumber(operand.value)
        fresh = [tag for tag in candidates if tag not in used]
        tag = fresh[0] if fresh else candidates[0]
        used.add(tag)
        return Leaf(Tag(tag))

    return bind(equation)


def detag(
    tokens: Sequence[Token],
    mapping: Mapping[str, Fraction] | Sequence[tuple[str, Fraction]],
) -> tuple[list[Token], list[str]]:
    """Swap tags for their numbers; returns ``(tokens, unresolved_tag_ids)``."""
    values = dict(mapping)
    out: list[Token] = []
    unresolved: list[str] = []
    for tok in tokens:
        if isinstance(tok, Tag):
            if tok.name in values:
                out.append(Number(Fraction(values[tok.name])))
                continue
            unresolved.append(tok.name)
        out.append(tok)
    return out, unresolved
