import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwp_forge.evaluation import (
    EvalReport,
    IncompleteGrid,
    ZeroDenominator,
    judge,
    model_average,
    pooled_accuracy,
    render_table,
    report,
)

MAPPING = [("a", Fraction(2)), ("b", Fraction(6)), ("c", Fraction(4))]
GOLD = "(2 + 6) / 4"


def test_answer_mode():
    v = judge("⟨a⟩ ⟨b⟩ + ⟨c⟩ /", MAPPING, GOLD, 2)
    assert v.correct and v.value == 2 and v.expression == "2 6 + 4 /"
    # a different expression with the same value still counts
    assert judge("⟨a⟩ ⟨c⟩ / ⟨b⟩ ⟨c⟩ / +", MAPPING, GOLD, 2).correct
    wrong = judge("⟨b⟩ ⟨c⟩ - ⟨a⟩ /", MAPPING, GOLD, 2)
    assert not wrong.correct and wrong.value == 1 and wrong.diagnostic == "WrongAnswer"


def test_exact_mode():
    assert judge("⟨a⟩ ⟨b⟩ + ⟨c⟩ /", MAPPING, GOLD, 2, mode="exact").correct
    v = judge("⟨b⟩ ⟨c⟩ - ⟨a⟩ /", MAPPING, GOLD, 2, mode="exact")
    assert not v.correct and v.diagnostic == "ExpressionMismatch"


@pytest.mark.parametrize(
    "prediction, diagnostic",
    [
        ("⟨a⟩ +", "ArityError"),
        ("⟨a⟩ ⟨z⟩ +", "UnresolvedTag(z)"),
        ("⟨a⟩ ⟨a⟩ - ⟨b⟩ /", None),
        ("⟨b⟩ ⟨a⟩ ⟨a⟩ - /", "DivisionByZero"),
        ("apples", "UnknownCharacter"),
        ("", "EmptyExpression"),
        ("⟨a⟩ ⟨b⟩", "TrailingTokens"),
    ],
)
def test_malformed_predictions_are_wrong_not_errors(prediction, diagnostic):
    v = judge(prediction, MAPPING, GOLD, 2)
    assert not v.correct
    if diagnostic:
        assert v.diagnostic == diagnostic


def test_tolerance():
    assert judge("⟨a⟩ ⟨c⟩ /", MAPPING, GOLD, 0.50004).correct
    assert not judge("⟨a⟩ ⟨c⟩ /", MAPPING, GOLD, 0.5002).correct


def test_macro_average_by_hand():
    assert model_average({("AI2", 0): (1, 2), ("CC", 0): (3, 4)}) == pytest.approx(0.625, abs=1e-12)
    grid = {("A", 0): (1, 2), ("B", 0): (1, 1), ("A", 1): (0, 2), ("B", 1): (1, 4)}
    # rep0: (0.5 + 1) / 2 = 0.75; rep1: (0 + 0.25) / 2 = 0.125
    assert model_average(grid) == pytest.approx(0.4375, abs=1e-12)


def test_macro_differs_from_micro():
    grid = {("AI2", 0): (9, 10), ("IL", 0): (10, 100)}
    assert model_average(grid) == pytest.approx(0.5, abs=1e-12)
    assert pooled_accuracy(grid) == pytest.approx(19 / 110)


def test_grid_errors():
    with pytest.raises(IncompleteGrid):
        model_average({("A", 0): (1, 2), ("B", 1): (1, 2)})
    with pytest.raises(IncompleteGrid):
        model_average({})
    with pytest.raises(ZeroDenominator):
        model_average({("A", 0): (0, 0)})


def test_report_files(tmp_path):
    rep = EvalReport({("AI2", 0): (1, 2), ("IL", 0): (3, 4)}, "(2) Postfix-Transformer")
    paths = report(rep, tmp_path)
    table = paths["txt"].read_text()
    assert "--" in table and "*62.5" in table
    summary = json.loads(paths["json"].read_text())
    assert summary[0]["model_avg"] == pytest.approx(0.625)
    assert paths["csv"].read_text().count("\n") == 3
    assert render_table([]).startswith("Model")


counts = st.tuples(st.integers(0, 50), st.integers(1, 50)).map(lambda t: (min(t), t[1]))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.data())
def test_macro_average_oracle(n_datasets, n_reps, data):
    grid = {(f"D{d}", r): data.draw(counts) for d in range(n_datasets) for r in range(n_reps)}
    expected = sum(Fraction(c, p) for c, p in grid.values()) / (n_datasets * n_reps)
    assert abs(model_average(grid) - float(expected)) <= 1e-12
    assert 0.0 <= model_average(grid) <= 1.0
