"""Acceptance gate: one PASS/FAIL line per criterion (also echoed in the terminal summary)."""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction

import pytest
import torch

from mwp_forge.cli import main
from mwp_forge.dataset import MWPExample, build_training_pairs, close_enough, load_corpus
from mwp_forge.evaluation import model_average, pooled_accuracy
from mwp_forge.expr import Number, evaluate, leaves, parse_notation, serialize, tokenize_expression
from mwp_forge.model import ModelConfig, Transformer, masked_cross_entropy, model_type
from mwp_forge.preprocess import PreprocessConfig
from mwp_forge.preprocess.strategies import find_label, label_in_question_sentence, label_selective_tag
from mwp_forge.synthetic import generate, write_corpus
from mwp_forge.tagging import detag, detect_numbers
from mwp_forge.tokenizer import PAD, START, build_vocab
from mwp_forge.train import TrainConfig, exact_match, train

from conftest import FALLBACK, TRANSLATIONS, GEORGE, check_round_trip, covering_trees

torch.set_num_threads(1)


def test_notation_conversion_oracle(criterion):
    with criterion("notation oracle") as c:
        start = time.perf_counter()
        total = failures = 0
        for tree in covering_trees():
            total += 1
            failures += not check_round_trip(tree)
        elapsed = time.perf_counter() - start
        c.detail = f"{total - failures}/{total} trees round-trip, {elapsed:.1f}s (limit 60s)"
        assert failures == 0
        assert total >= 20_000
        assert elapsed < 60


def test_reference_postfix_translations(criterion):
    with criterion("reference postfix translations") as c:
        examples = [MWPExample(str(i), q, e, a) for i, (q, e, a, _) in enumerate(TRANSLATIONS)]
        pairs = build_training_pairs(examples, "postfix", PreprocessConfig())
        got = []
        for pair in pairs:
            tokens, unresolved = detag(tokenize_expression(pair.target), pair.mapping)
            assert not unresolved
            got.append(serialize(tokens))
        expected = [f[3] for f in TRANSLATIONS]
        c.detail = " | ".join(got)
        assert got == expected


def test_label_selective_tagging(criterion):
    with criterion("LST fidelity") as c:
        label = find_label(GEORGE)
        tagged = label_selective_tag(GEORGE)
        untouched = [str(s.value) for s in tagged.untouched]
        fb_label, _ = find_label(FALLBACK)
        fallback = label_selective_tag(FALLBACK)
        c.detail = (f"label={label}, tagged={_show(tagged.values)}, literal={untouched}; "
                    f"fallback label {fb_label!r} tags {_show(fallback.values)}")
        assert label == ("peach", 3)
        assert sorted(tagged.values.values()) == [2, 5]
        assert untouched == ["4"] and "4 apples" in tagged.text
        assert not label_in_question_sentence(FALLBACK, fb_label)
        assert sorted(fallback.values.values()) == sorted(s.value for s in detect_numbers(FALLBACK))


def test_macro_average_metric(criterion):
    with criterion("macro-average metric") as c:
        cases = [
            ({("AI2", 0): (1, 2), ("CC", 0): (3, 4)}, 0.625),
            ({("A", 0): (1, 2), ("B", 0): (1, 1), ("A", 1): (0, 2), ("B", 1): (1, 4)}, 0.4375),
            ({(d, r): (r + 1, 4) for d in ("AI2", "CC", "IL", "MAWPS") for r in range(3)}, 0.5),
        ]
        errors = [abs(model_average(grid) - want) for grid, want in cases]
        skewed = {("AI2", 0): (9, 10), ("IL", 0): (10, 100)}
        macro, micro = model_average(skewed), pooled_accuracy(skewed)
        c.detail = f"max |err| {max(errors):.1e}; macro {macro:.3f} vs micro {micro:.3f}"
        assert max(errors) <= 1e-12
        assert abs(macro - 0.5) <= 1e-12 and abs(micro - 19 / 110) <= 1e-12


def test_gradient_check(criterion):
    with criterion("gradient check") as c:
        start = time.perf_counter()
        torch.manual_seed(0)
        cfg = ModelConfig(num_layers=2, num_heads=2, d_model=8, d_ff=12, dropout=0.0, max_seq_len=16)
        model = Transformer(cfg, vocab_size=13).double()
        src = torch.tensor([[5, 6, 7, 8, 9], [10, 11, 12, PAD, PAD]])
        tgt = torch.tensor([[START, 4, 5, 6], [START, 7, PAD, PAD]])
        gold = torch.tensor([[4, 5, 6, 2], [7, 2, PAD, PAD]])

        def objective() -> torch.Tensor:
            return masked_cross_entropy(model(src, tgt), gold)

        model.zero_grad()
        objective().backward()
        params = dict(model.named_parameters())
        rng = random.Random(0)
        coords = []
        for name, p in params.items():
            for _ in range(4):
                coords.append((name, tuple(rng.randrange(s) for s in p.shape)))
        worst, h = 0.0, 1e-6
        with torch.no_grad():
            for name, idx in coords:
                p = params[name]
                original = p[idx].item()
                p[idx] = original + h
                up = objective().item()
                p[idx] = original - h
                down = objective().item()
                p[idx] = original
                numeric = (up - down) / (2 * h)
                analytic = p.grad[idx].item()
                rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-7)
                worst = max(worst, rel)
        elapsed = time.perf_counter() - start
        c.detail = f"{len(coords)} coordinates over {len(params)} tensors, max rel err {worst:.2e}, {elapsed:.1f}s"
        assert len(coords) >= 100
        assert worst <= 1e-3
        assert elapsed < 300


@pytest.mark.slow
def test_overfit_oracle(criterion):
    with criterion("overfit oracle") as c:
        start = time.perf_counter()
        examples = generate(32, seed=1)
        pairs = [(p.source, p.target) for p in build_training_pairs(examples, "postfix")]
        vocab = build_vocab([s for p in pairs for s in p])
        tc = TrainConfig(iterations=300, seed=0)
        first = train(model_type(3), tc, pairs, vocab)
        accuracy = exact_match(first.model, vocab, pairs)
        second = train(model_type(3), tc, pairs, vocab)
        same = [r.loss for r in first.history] == [r.loss for r in second.history] and all(
            torch.equal(a, b) for a, b in zip(first.model.state_dict().values(), second.model.state_dict().values()))
        elapsed = time.perf_counter() - start
        c.detail = (f"train exact match {accuracy:.0%} after {tc.iterations} epochs, "
                    f"final loss {first.history[-1].loss:.4f}, identical rerun={same}, {elapsed:.0f}s for two runs")
        assert accuracy == 1.0
        assert same
        assert elapsed < 15 * 60


@pytest.mark.slow
def test_generalization_smoke(criterion, tmp_path):
    with criterion("desk-scale generalization") as c:
        start = time.perf_counter()
        corpus = tmp_path / "synthetic.json"
        write_corpus(corpus, generate(200, seed=7))
        prep = tmp_path / "prep"
        assert main(["prepare", "--corpus", str(corpus), "--notation", "postfix", "--out", str(prep)]) == 0
        for r in range(3):
            assert main(["train", "--prepared", str(prep / f"rep{r}"), "--model-type", "2",
                         "--iterations", "300", "--seed", "0"]) == 0
        dirs = [str(prep / f"rep{r}") for r in range(3)]
        assert main(["evaluate", "--prepared", *dirs, "--judge", "answer", "--out", str(tmp_path / "eval")]) == 0
        summary = json.loads((tmp_path / "eval" / "summary.json").read_text())[0]
        cells = {cell["repetition"]: f"{cell['correct']}/{cell['total']}" for cell in summary["cells"]}
        c.detail = (f"Type 2 postfix answer accuracy {summary['model_avg']:.1%} over 3 reps {cells}, "
                    f"{time.perf_counter() - start:.0f}s")
        assert summary["complete_grid"]
        assert summary["model_avg"] >= 0.80


def test_tokenizer_round_trip(criterion, tmp_path):
    with criterion("tokenizer round trip") as c:
        pairs = build_training_pairs(generate(200, seed=7), "postfix")
        texts = [p.source for p in pairs] + [p.target for p in pairs]
        vocab = build_vocab(texts)
        alphabet = sorted(set("".join(texts)))
        rng = random.Random(0)
        samples = ["".join(rng.choice(alphabet) for _ in range(rng.randint(0, 80))) for _ in range(10_000)]
        samples[:len(texts)] = texts[:10_000]
        bad = sum(vocab.decode(vocab.encode(s)) != s for s in samples)
        h1 = build_vocab(texts).save(tmp_path / "a.txt")
        h2 = build_vocab(list(texts)).save(tmp_path / "b.txt")
        identical = (tmp_path / "a.txt").read_bytes() == (tmp_path / "b.txt").read_bytes()
        c.detail = f"{len(samples) - bad}/{len(samples)} round-trip over {len(alphabet)} symbols; vocab hash {h1[:12]} stable={identical}"
        assert bad == 0
        assert h1 == h2 and identical


def test_tag_detag_round_trip(criterion, tmp_path):
    with criterion("tag/detag round trip") as c:
        records = [{"iIndex": i, "sQuestion": q, "lEquations": [e], "lSolutions": [float(a)]}
                   for i, (q, e, a, _) in enumerate(TRANSLATIONS)]
        records += [{"iIndex": e.id, "sQuestion": e.question, "lEquations": [e.equation],
                     "lSolutions": [float(e.answer)]} for e in generate(300, seed=11)]
        path = tmp_path / "corpus.json"
        path.write_text(json.dumps(records))
        corpus = load_corpus(path)
        eligible = [e for e in corpus
                    if set(_equation_numbers(e)) <= {s.value for s in detect_numbers(e.question)}]
        checked = failures = 0
        for config in (PreprocessConfig(), PreprocessConfig(steps=("LST",)), PreprocessConfig(steps=("SW", "ST"))):
            for pair in build_training_pairs(eligible, "postfix", config):
                tokens, unresolved = detag(tokenize_expression(pair.target), pair.mapping)
                value = evaluate(parse_notation(tokens, "postfix"))
                checked += 1
                failures += bool(unresolved) or not close_enough(value, pair.answer, 1e-4)
        c.detail = f"{checked - failures}/{checked} detagged targets evaluate to the gold answer ({len(eligible)} examples x 3 configs)"
        assert failures == 0 and len(eligible) == len(corpus) > 0


def _equation_numbers(example: MWPExample) -> list[Fraction]:
    return [leaf.value for leaf in leaves(example.tree) if isinstance(leaf, Number)]


def _show(values) -> list[str]:
    return sorted(str(v) for v in values.values())
