"""Corpus loading, validation, train/test splitting and training-pair construction."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

from .expr import ExprError, ExprTree, Notation, evaluate, parse_infix, serialize, to_notation
from .preprocess import PreprocessConfig, apply_pipeline
from .tagging import mapping_to_json, retag_equation

log = logging.getLogger(__name__)

CANONICAL_SIZES = {"AI2": 395, "CC": 600, "IL": 562, "MAWPS": 2373}
DATASET_NAMES = ("AI2", "CC", "IL", "MAWPS", "custom")
DEFAULT_SEEDS = (11, 23, 47)
REL_TOL = 1e-4


class DatasetError(ValueError):
    pass


class SchemaError(DatasetError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnparsableEquation(DatasetError):
    def __init__(self, example_id: str, reason: str):
        super().__init__(f"example {example_id}: {reason}")
        self.example_id = example_id


_UNKNOWN_PREFIX = re.compile(r"^\s*([A-Za-z])\s*=\s*(.+)$")
_UNKNOWN_SUFFIX = re.compile(r"^(.+?)\s*=\s*([A-Za-z])\s*$")


def strip_unknown(equation: str) -> str:
    """Drop a single ``x =`` prefix (or ``= x`` suffix); reject other unknowns."""
    eq = equation.strip()
    if m := _UNKNOWN_PREFIX.match(eq):
        eq = m.group(2)
    elif m := _UNKNOWN_SUFFIX.match(eq):
        eq = m.group(1)
    if re.search(r"[A-Za-z=]", eq):
        raise ExprError(f"equation {equation!r} is not a closed arithmetic expression")
    return eq


def close_enough(value: float | Fraction, target: float | Fraction, rel_tol: float = REL_TOL) -> bool:
    value, target = float(value), float(target)
    if not (math.isfinite(value) and math.isfinite(target)):
        return False
    return math.isclose(value, target, rel_tol=rel_tol, abs_tol=rel_tol * 1e-3)


@dataclass(frozen=True)
class MWPExample:
    id: str
    question: str
    equation: str
    answer: Fraction

    @cached_property
    def tree(self) -> ExprTree:
        return parse_infix(strip_unknown(self.equation))

    def is_consistent(self, rel_tol: float = REL_TOL) -> bool:
        try:
            return close_enough(evaluate(self.tree), self.answer, rel_tol)
        except ExprError:
            return False

    def to_json(self) -> dict:
        return {"id": self.id, "question": self.question, "equation": self.equation,
                "answer": float(self.answer)}


@dataclass
class Corpus:
    name: str
    examples: list[MWPExample]
    rejected: list[tuple[str, str]] = field(default_factory=list)
    source_hash: str = ""

    def __post_init__(self) -> None:
        ids = [e.id for e in self.examples]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise DatasetError(f"duplicate example ids: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.95
    repetitions: int = 3
    seeds: tuple[int, ...] = DEFAULT_SEEDS

    def __post_init__(self) -> None:
        if not 0 < self.train_fraction <= 1:
            raise ValueError("train_fraction must be in (0, 1]")
        if len(self.seeds) < self.repetitions:
            raise ValueError(f"need {self.repetitions} seeds, got {len(self.seeds)}")

    def test_size(self, n: int) -> int:
        # round(.., 9) keeps 100 * 0.05 at 5 despite float error
        return math.floor(round(n * (1 - self.train_fraction), 9))


def _record_to_example(record: dict, index: int) -> MWPExample:
    if not isinstance(record, dict):
        raise SchemaError(index, "expected a JSON object")
    if "sQuestion" in record:
        equations = record.get("lEquations")
        solutions = record.get("lSolutions")
        if not isinstance(equations, list) or not isinstance(solutions, list):
            raise SchemaError(index, "lEquations and lSolutions must be lists")
        if len(equations) != 1 or len(solutions) != 1:
            raise UnparsableEquation(
                str(record.get("id", record.get("iIndex", index))),
                f"{len(equations)} equations / {len(solutions)} solutions (systems are not supported)",
            )
        question, equation, answer = record["sQuestion"], equations[0], solutions[0]
        ident = record.get("id", record.get("iIndex", index))
    elif "question" in record:
        missing = [k for k in ("equation", "answer") if k not in record]
        if missing:
            raise SchemaError(index, f"missing field(s) {missing}")
        question, equation, answer = record["question"], record["equation"], record["answer"]
        ident = record.get("id", index)
    else:
        raise SchemaError(index, "expected 'sQuestion' or 'question' field")
    if not isinstance(question, str) or not isinstance(equation, str):
        raise SchemaError(index, "question and equation must be strings")
    if isinstance(answer, bool) or not isinstance(answer, (int, float, str)):
        raise SchemaError(index, "answer must be a number")
    try:
        value = Fraction(str(answer))
    except ValueError:
        raise SchemaError(index, f"answer {answer!r} is not numeric") from None
    return MWPExample(str(ident), question.strip(), equation.strip(), value)


def _item_lines(text: str) -> list[int]:
    """Best-effort 1-based line number of each top-level array element."""
    lines, depth, line = [], 0, 1
    in_str = escape = False
    for ch in text:
        if ch == "\n":
            line += 1
        if in_str:
            if escape:
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch in "[{":
            depth += 1
            if depth == 2:
                lines.append(line)
        elif ch in "]}":
            depth -= 1
    return lines


def load_corpus(
    path: str | Path,
    name: str = "custom",
    on_invalid: str = "exclude",
    rel_tol: float = REL_TOL,
) -> Corpus:
    """Load a JSON corpus and validate each example.

    ``on_invalid`` is ``"exclude"`` (drop and record in ``Corpus.rejected``),
    ``"keep"`` (record but keep inconsistent answers) or ``"raise"``.
    """
    if on_invalid not in ("exclude", "keep", "raise"):
        raise ValueError(f"bad on_invalid {on_invalid!r}")
    raw = Path(path).read_bytes()
    text = raw.decode("utf-8")
    try:
        records = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(exc.lineno, exc.msg) from None
    if isinstance(records, dict) and "examples" in records:
        records = records["examples"]
    if not isinstance(records, list):
        raise SchemaError(1, "top level must be a JSON array of examples")
    item_lines = _item_lines(text)

    examples: list[MWPExample] = []
    rejected: list[tuple[str, str]] = []
    for index, record in enumerate(records):
        line = item_lines[index] if index < len(item_lines) else index + 1
        try:
            example = _record_to_example(record, line)
        except UnparsableEquation as exc:
            if on_invalid == "raise":
                raise
            rejected.append((exc.example_id, str(exc)))
            continue
        try:
            tree = example.tree
        except ExprError as exc:
            if on_invalid == "raise":
                raise UnparsableEquation(example.id, str(exc)) from None
            rejected.append((example.id, f"unparsable equation: {exc}"))
            continue
        if not example.is_consistent(rel_tol):
            try:
                got = str(float(evaluate(tree)))
            except ExprError as exc:
                got = str(exc)
            reason = f"equation evaluates to {got}, answer is {float(example.answer)}"
            if on_invalid == "raise":
                raise UnparsableEquation(example.id, reason)
            rejected.append((example.id, reason))
            if on_invalid == "exclude":
                continue
        examples.append(example)

    for ident, reason in rejected:
        log.warning("%s: rejected %s (%s)", name, ident, reason)
    corpus = Corpus(name, examples, rejected, hashlib.sha256(raw).hexdigest())
    expected = CANONICAL_SIZES.get(name)
    if expected is not None and len(corpus) != expected:
        log.info("%s: loaded %d examples (canonical set has %d)", name, len(corpus), expected)
    return corpus


def split(corpus: Corpus, spec: SplitSpec = SplitSpec(), repetition_index: int = 0) -> tuple[Corpus, Corpus]:
    if not 0 <= repetition_index < spec.repetitions:
        raise ValueError(f"repetition_index must be in 0..{spec.repetitions - 1}")
    order = list(range(len(corpus)))
    random.Random(spec.seeds[repetition_index]).shuffle(order)
    n_test = spec.test_size(len(corpus))
    test_idx = sorted(order[:n_test])
    train_idx = sorted(order[n_test:])
    train = Corpus(corpus.name, [corpus.examples[i] for i in train_idx])
    test = Corpus(corpus.name, [corpus.examples[i] for i in test_idx])
    return train, test


@dataclass
class TrainingPair:
    id: str
    source: str
    target: str
    mapping: list[tuple[str, Fraction]]
    equation: str
    answer: Fraction

    def metadata(self, split_name: str = "") -> dict:
        meta = {"id": self.id, "tags": mapping_to_json(self.mapping), "equation": self.equation,
                "answer": float(self.answer)}
        if split_name:
            meta["split"] = split_name
        return meta


def build_training_pairs(
    corpus: Iterable[MWPExample],
    notation: Notation | str,
    config: PreprocessConfig = PreprocessConfig(),
) -> list[TrainingPair]:
    """Source = processed, tagged question; target = tag-form equation in ``notation``.

    Equation numbers that are not tagged in the question (constants, or numbers
    a selective strategy left literal) stay literal in the target.
    """
    notation = Notation(notation)
    pairs = []
    for example in corpus:
        processed = apply_pipeline(example, config)
        tree = retag_equation(example.tree, processed.tagged.mapping, keep_unmapped=True)
        target = serialize(to_notation(tree, notation))
        pairs.append(TrainingPair(example.id, processed.source, target, processed.tagged.mapping,
                                  strip_unknown(example.equation), example.answer))
    return pairs


def write_prepared(out_dir: str | Path, train: Sequence[TrainingPair], test: Sequence[TrainingPair]) -> None:
    """Write ``train.src/.tgt``, ``test.src/.tgt`` and ``mappings.jsonl``.

    ``mappings.jsonl`` has one object per line: train examples first, then
    test, each carrying ``split``, ``id``, ``tags``, ``equation``, ``answer``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split_name, pairs in (("train", train), ("test", test)):
        for suffix, attr in (("src", "source"), ("tgt", "target")):
            lines = [getattr(p, attr).replace("\n", " ") for p in pairs]
            (out / f"{split_name}.{suffix}").write_text("".join(f"{l}\n" for l in lines), encoding="utf-8")
    with open(out / "mappings.jsonl", "w", encoding="utf-8") as fh:
        for split_name, pairs in (("train", train), ("test", test)):
            for p in pairs:
                fh.write(json.dumps(p.metadata(split_name), ensure_ascii=False) + "\n")


@dataclass
class PreparedSplit:
    sources: list[str]
    targets: list[str]
    metadata: list[dict]


def read_prepared(prepared_dir: str | Path, split_name: str) -> PreparedSplit:
    d = Path(prepared_dir)
    mappings = d / "mappings.jsonl"
    if not mappings.exists():
        raise DatasetError(f"{mappings} not found")
    sources = (d / f"{split_name}.src").read_text(encoding="utf-8").splitlines()
    targets = (d / f"{split_name}.tgt").read_text(encoding="utf-8").splitlines()
    meta = [json.loads(line) for line in mappings.read_text(encoding="utf-8").splitlines() if line.strip()]
    meta = [m for m in meta if m.get("split") == split_name]
    if not (len(sources) == len(targets) == len(meta)):
        raise DatasetError(
            f"{d}: {split_name} files are misaligned ({len(sources)} src, {len(targets)} tgt, {len(meta)} mappings)"
        )
    return PreparedSplit(sources, targets, meta)
