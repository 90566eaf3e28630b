"""Number-tagging strategies: selective, exclusive and label-selective tagging."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from ..expr import ExprTree, Number, leaves, parse_infix
from ..tagging import (
    NumberSpan,
    TaggedQuestion,
    detect_numbers,
    substitute_spans,
    tag_all,
    tag_values,
)
from .text import TOKEN_RE, is_stop_word, lemma, split_sentences

CLAUSE_PUNCTUATION = set(".,;:!?()")
DEFAULT_WINDOW = 4


def _equation_values(gold_equation: ExprTree | str) -> list[Fraction]:
    tree = parse_infix(gold_equation) if isinstance(gold_equation, str) else gold_equation
    return [op.value for op in leaves(tree) if isinstance(op, Number)]


def selective_tag(question: str, gold_equation: ExprTree | str) -> TaggedQuestion:
    """Tag only the numbers used by the gold equation; others stay literal."""
    spans = detect_numbers(question)
    return substitute_spans(question, tag_values(spans, _equation_values(gold_equation)))


def exclusive_tag(question: str, gold_equation: ExprTree | str) -> TaggedQuestion:
    """Like :func:`selective_tag` but numbers outside the equation are deleted."""
    spans = detect_numbers(question)
    relevant = tag_values(spans, _equation_values(gold_equation))
    keep = {s.start for s in relevant}
    return substitute_spans(question, relevant, [s for s in spans if s.start not in keep])


# -- label-selective tagging ------------------------------------------------


@dataclass(frozen=True)
class _Piece:
    kind: str
    surface: str
    start: int

    @property
    def is_word(self) -> bool:
        return self.kind in ("word", "number", "tag")

    @property
    def is_break(self) -> bool:
        return self.kind == "symbol" and self.surface in CLAUSE_PUNCTUATION


def _pieces(text: str) -> list[_Piece]:
    return [_Piece(m.lastgroup, m.group(), m.start()) for m in TOKEN_RE.finditer(text)]


def _proper_nouns(pieces: Iterable[_Piece]) -> set[str]:
    seen_lower: set[str] = set()
    seen: set[str] = set()
    for p in pieces:
        if p.kind == "word":
            seen.add(p.surface.lower())
            if not p.surface[:1].isupper():
                seen_lower.add(p.surface.lower())
    return seen - seen_lower


def term_counts(question: str) -> Counter:
    """Content-term frequencies keyed by lemma, in order of first occurrence.

    Stop words, numbers and words that are capitalized at every occurrence
    (names) are not counted.
    """
    pieces = _pieces(question)
    names = _proper_nouns(pieces)
    counts: Counter = Counter()
    for p in pieces:
        if p.kind == "word" and not is_stop_word(p.surface) and p.surface.lower() not in names:
            counts[lemma(p.surface)] += 1
    return counts


def find_label(question: str) -> tuple[str, int] | None:
    """Most frequent content term; ties go to the earliest first occurrence."""
    counts = term_counts(question)
    if not counts:
        return None
    best = max(counts.values())
    # Counter preserves insertion (first-occurrence) order
    label = next(term for term, n in counts.items() if n == best)
    return label, best


def _question_sentences(question: str) -> list[str]:
    return [s for s in split_sentences(question) if s.rstrip().endswith("?")]


def label_in_question_sentence(question: str, label: str) -> bool:
    for sentence in _question_sentences(question):
        if any(p.kind == "word" and lemma(p.surface) == label for p in _pieces(sentence)):
            return True
    return False


def _window(pieces: list[_Piece], index: int, step: int, width: int) -> list[int]:
    """Indices of up to ``width`` words from ``index`` in direction ``step``, stopping at punctuation."""
    found: list[int] = []
    i = index + step
    while 0 <= i < len(pieces) and len(found) < width:
        p = pieces[i]
        if p.is_break:
            break
        if p.is_word:
            found.append(i)
        i += step
    return found


def labelled_spans(question: str, label: str, window: int = DEFAULT_WINDOW) -> list[NumberSpan]:
    """Numbers that own an occurrence of ``label`` inside their windows.

    An occurrence reachable from several numbers belongs to the nearest one
    (ties to the number before it), so in "2 peaches and 4 apples" the word
    "peaches" labels 2 and not 4.
    """
    pieces = _pieces(question)
    spans = {s.start: s for s in detect_numbers(question)}
    number_idx = [i for i, p in enumerate(pieces) if p.kind == "number" and p.start in spans]

    owner: dict[int, tuple[int, int]] = {}  # label piece -> (distance, number piece)
    for ni in number_idx:
        for step in (-1, 1):
            for dist, wi in enumerate(_window(pieces, ni, step, window), start=1):
                p = pieces[wi]
                if p.kind != "word" or lemma(p.surface) != label:
                    continue
                # a number before the label (step=+1) wins ties
                key = (dist, 0 if step == 1 else 1, ni)
                if wi not in owner or key < owner[wi]:
                    owner[wi] = key
    tagged = {ni for _, _, ni in owner.values()}
    return [spans[pieces[ni].start] for ni in number_idx if ni in tagged]


def label_selective_tag(question: str, window: int = DEFAULT_WINDOW) -> TaggedQuestion:
    """Tag numbers whose neighbourhood mentions the question's dominant term.

    Falls back to tagging every number when no label exists or the label is
    missing from the sentence that asks the question.
    """
    found = find_label(question)
    if found is None or not label_in_question_sentence(question, found[0]):
        return tag_all(question)
    return substitute_spans(question, labelled_spans(question, found[0], window))
