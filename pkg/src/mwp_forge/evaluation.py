"""Judging predictions, the cross-dataset macro average and report files."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .expr import (
    ExprError,
    ExprTree,
    Notation,
    Token,
    evaluate,
    parse_notation,
    serialize,
    to_notation,
    tokenize_expression,
)
from .tagging import detag

DATASET_COLUMNS = ("AI2", "CC", "IL", "MAWPS")
REL_TOL = 1e-4


class EvaluationError(ValueError):
    pass


class IncompleteGrid(EvaluationError):
    pass


class ZeroDenominator(EvaluationError):
    pass


@dataclass(frozen=True)
class Verdict:
    correct: bool
    expression: str = ""
    value: Fraction | None = None
    diagnostic: str | None = None


def _answers_match(value: Fraction, gold: Fraction | float, rel_tol: float) -> bool:
    v, g = float(value), float(gold)
    return math.isfinite(v) and math.isclose(v, g, rel_tol=rel_tol, abs_tol=rel_tol * 1e-3)


def judge(
    predicted: str | Sequence[Token],
    mapping,
    gold_equation: str | ExprTree,
    gold_answer: Fraction | float,
    notation: Notation | str = Notation.POSTFIX,
    mode: str = "answer",
    rel_tol: float = REL_TOL,
    gold_notation: Notation | str = Notation.INFIX,
) -> Verdict:
    """Decide whether a predicted expression is correct; never raises on bad predictions.

    ``answer`` mode evaluates the detagged prediction and compares it with the
    gold answer; ``exact`` mode compares token sequences with the gold
    equation rendered in ``notation``.
    """
    if mode not in ("answer", "exact"):
        raise ValueError("mode must be 'answer' or 'exact'")
    try:
        tokens = tokenize_expression(predicted) if isinstance(predicted, str) else list(predicted)
        tokens, unresolved = detag(tokens, mapping or {})
        expression = serialize(tokens)
    except (ExprError, TypeError, ValueError) as exc:
        return Verdict(False, str(predicted), None, type(exc).__name__)
    if unresolved:
        return Verdict(False, expression, None, f"UnresolvedTag({','.join(unresolved)})")
    try:
        tree = parse_notation(tokens, notation)
        value = evaluate(tree)
    except (ExprError, ZeroDivisionError) as exc:
        return Verdict(False, expression, None, type(exc).__name__)

    if mode == "answer":
        ok = _answers_match(value, gold_answer, rel_tol)
        return Verdict(ok, expression, value, None if ok else "WrongAnswer")
    gold_tree = gold_equation if not isinstance(gold_equation, str) else parse_notation(gold_equation, gold_notation)
    ok = tokens == to_notation(gold_tree, notation)
    return Verdict(ok, expression, value, None if ok else "ExpressionMismatch")


def model_average(results: Mapping[tuple[str, int], tuple[int, int]]) -> float:
    """Mean over repetitions of the mean over datasets of C/P (a macro average)."""
    if not results:
        raise IncompleteGrid("no results")
    datasets = sorted({d for d, _ in results})
    reps = sorted({r for _, r in results})
    missing = [(d, r) for d in datasets for r in reps if (d, r) not in results]
    if missing:
        raise IncompleteGrid(f"missing cells {missing}")
    total = Fraction(0)
    for r in reps:
        per_rep = Fraction(0)
        for d in datasets:
            c, p = results[(d, r)]
            if p == 0:
                raise ZeroDenominator(f"dataset {d}, repetition {r} has no examples")
            if not 0 <= c <= p:
                raise EvaluationError(f"correct count {c} outside [0, {p}]")
            per_rep += Fraction(c, p)
        total += per_rep / len(datasets)
    return float(total / len(reps))


def pooled_accuracy(results: Mapping[tuple[str, int], tuple[int, int]]) -> float:
    c = sum(v[0] for v in results.values())
    p = sum(v[1] for v in results.values())
    if p == 0:
        raise ZeroDenominator("no examples")
    return c / p


@dataclass
class EvalReport:
    results: dict[tuple[str, int], tuple[int, int]]
    label: str = "model"

    def dataset_means(self) -> dict[str, float]:
        by_dataset: dict[str, list[float]] = defaultdict(list)
        for (d, _), (c, p) in sorted(self.results.items()):
            if p == 0:
                raise ZeroDenominator(f"dataset {d} has no examples")
            by_dataset[d].append(c / p)
        return {d: sum(v) / len(v) for d, v in by_dataset.items()}

    def average(self) -> float | None:
        """Average over present datasets; equals :func:`model_average` on complete grids."""
        means = self.dataset_means()
        if not means:
            return None
        return sum(means.values()) / len(means)

    def columns(self) -> list[str]:
        extra = sorted({d for d, _ in self.results} - set(DATASET_COLUMNS))
        return [*DATASET_COLUMNS, *extra]


def _pct(x: float | None) -> str:
    return "--" if x is None else f"{100 * x:.1f}"


def render_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table: one row per report, dataset columns plus Average."""
    columns = sorted({c for r in reports for c in r.columns()}, key=lambda c: (c not in DATASET_COLUMNS, c))
    if not reports:
        columns = list(DATASET_COLUMNS)
    header = ["Model", *columns, "Average"]
    rows = []
    for rep in reports:
        means = rep.dataset_means()
        avg = rep.average()
        partial = avg is not None and len(means) < len([c for c in columns])
        avg_text = ("*" if partial else "") + _pct(avg)
        rows.append([rep.label, *(_pct(means.get(c)) for c in columns), avg_text])
    widths = [max(len(row[i]) for row in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths)))
             for row in [header, *rows]]
    if any(row[-1].startswith("*") for row in rows):
        lines.append("* denotes averages on present values only")
    return "\n".join(lines) + "\n"


def render_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "dataset", "repetition", "correct", "total", "accuracy"])
    for rep in reports:
        for (d, r), (c, p) in sorted(rep.results.items()):
            writer.writerow([rep.label, d, r, c, p, f"{c / p:.6f}" if p else ""])
    return buf.getvalue()


def report(reports: EvalReport | Sequence[EvalReport], out_dir: str | Path) -> dict[str, Path]:
    """Write ``results.csv``, ``summary.txt`` and ``summary.json``."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out / "results.csv", "txt": out / "summary.txt", "json": out / "summary.json"}
    paths["csv"].write_text(render_csv(reports), encoding="utf-8")
    paths["txt"].write_text(render_table(reports), encoding="utf-8")
    summary = []
    for rep in reports:
        complete = True
        try:
            macro = model_average(rep.results) if rep.results else None
        except IncompleteGrid:
            macro, complete = None, False
        summary.append({
            "model": rep.label,
            "cells": [{"dataset": d, "repetition": r, "correct": c, "total": p}
                      for (d, r), (c, p) in sorted(rep.results.items())],
            "dataset_means": rep.dataset_means() if rep.results else {},
            "average_present": rep.average() if rep.results else None,
            "model_avg": macro,
            "complete_grid": complete and bool(rep.results),
        })
    paths["json"].write_text(json.dumps(summary, indent=2), encoding="utf-8")
    return paths
