"""``mwp-forge`` command line: prepare, convert, train, evaluate, solve.

Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .dataset import (
    DATASET_NAMES,
    DatasetError,
    SplitSpec,
    build_training_pairs,
    load_corpus,
    read_prepared,
    split,
    write_prepared,
)
from .evaluation import EvalReport, judge, render_table, report
from .expr import (
    ExprError,
    Notation,
    convert,
    evaluate,
    format_number,
    parse_notation,
    serialize,
    tokenize_expression,
)
from .preprocess import STEP_NAMES, InvalidCombination, PreprocessConfig, PreprocessError, load_config, parse_steps
from .tagging import TaggingError, detag, mapping_from_json

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.pt"

log = logging.getLogger("mwp_forge")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path: Path, manifest: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")


def _read_manifest(directory: Path) -> dict:
    path = directory / "manifest.json"
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))


def _configure_threads() -> None:
    threads = os.environ.get("MWP_FORGE_THREADS")
    if threads:
        import torch

        torch.set_num_threads(max(1, int(threads)))


# -- prepare -----------------------------------------------------------------


def _preprocess_config(args) -> PreprocessConfig:
    steps = parse_steps(args.steps) if args.steps is not None else None
    try:
        if args.config:
            return load_config(args.config, steps=steps, phase=args.phase, seed=args.seed,
                               lst_window=args.lst_window)
        return PreprocessConfig.from_dict({
            "steps": steps or (),
            "phase": args.phase or "train",
            "seed": args.seed if args.seed is not None else 0,
            "lst_window": args.lst_window if args.lst_window is not None else 4,
        })
    except InvalidCombination as exc:
        names = ", ".join(f"{k} ({v})" for k, v in STEP_NAMES.items())
        raise UsageError(f"{exc}\nvalid steps: {names}") from None


def cmd_prepare(args) -> int:
    config = _preprocess_config(args)
    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        raise DataError(f"corpus file {corpus_path} not found")
    corpus = load_corpus(corpus_path, args.dataset)
    if len(corpus) == 0:
        raise DataError(f"{corpus_path}: no examples")
    seeds = tuple(int(s) for s in args.split_seeds.split(","))
    spec = SplitSpec(train_fraction=args.train_fraction, repetitions=len(seeds), seeds=seeds)
    reps = range(spec.repetitions) if args.repetition is None else [args.repetition]
    out = Path(args.out)
    infer_config = config.for_inference()
    for r in reps:
        train_part, test_part = split(corpus, spec, r)
        # the test side sees only what inference would see
        test_cfg = infer_config if config.phase == "train" else config
        train_pairs = build_training_pairs(train_part, args.notation, config)
        test_pairs = build_training_pairs(test_part, args.notation, test_cfg)
        rep_dir = out / f"rep{r}"
        write_prepared(rep_dir, train_pairs, test_pairs)
        _write_manifest(rep_dir / "manifest.json", {
            "kind": "prepared",
            "dataset": args.dataset,
            "repetition": r,
            "split_seed": spec.seeds[r],
            "train_fraction": spec.train_fraction,
            "notation": args.notation,
            "preprocess": config.to_dict(),
            "test_preprocess": test_cfg.to_dict(),
            "corpus": str(corpus_path),
            "corpus_sha256": corpus.source_hash,
            "sizes": {"train": len(train_pairs), "test": len(test_pairs)},
            "rejected": len(corpus.rejected),
            "created": _now(),
            "version": __version__,
        })
        print(f"{rep_dir}: {len(train_pairs)} train / {len(test_pairs)} test")
    if corpus.rejected:
        print(f"rejected {len(corpus.rejected)} example(s); see log for reasons", file=sys.stderr)
    return EXIT_OK


# -- convert -----------------------------------------------------------------


def cmd_convert(args) -> int:
    try:
        print(convert(args.expression, args.source, args.target))
    except ExprError as exc:
        raise DataError(f"cannot parse {args.source} expression: {type(exc).__name__}: {exc}") from None
    return EXIT_OK


# -- train -------------------------------------------------------------------


def cmd_train(args) -> int:
    import torch

    from .model import model_type
    from .tokenizer import build_vocab
    from .train import TrainConfig, save_checkpoint, train, write_history

    _configure_threads()
    prepared = Path(args.prepared)
    data = read_prepared(prepared, "train")
    if not data.sources:
        raise DataError(f"{prepared}: no training examples")
    manifest = _read_manifest(prepared)
    pairs = list(zip(data.sources, data.targets))
    vocab = build_vocab(data.sources + data.targets, args.vocab_size)
    model_cfg = model_type(args.model_type, dropout=args.dropout, max_seq_len=args.max_seq_len)
    train_cfg = TrainConfig(batch_size=args.batch_size, iterations=args.iterations,
                            iteration_unit=args.iteration_unit, lr=args.lr, schedule=args.schedule,
                            patience=args.patience, seed=args.seed, checkpoint_every=args.checkpoint_every)
    out = Path(args.out) if args.out else prepared
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        if args.verbose or row.iteration % max(1, args.iterations // 10) == 0:
            print(f"iteration {row.iteration:4d}  loss {row.loss:.4f}  lr {row.lr:.2e}", flush=True)

    started = _now()
    result = train(model_cfg, train_cfg, pairs, vocab, checkpoint_dir=out, on_iteration=progress)
    notation = manifest.get("notation", "postfix")
    metadata = {
        "notation": notation,
        "dataset": manifest.get("dataset", "custom"),
        "repetition": manifest.get("repetition"),
        "model_type": args.model_type,
        "preprocess": manifest.get("preprocess", PreprocessConfig().to_dict()),
        "label": f"({args.model_type}) {notation.capitalize()}-Transformer",
    }
    ckpt = save_checkpoint(out / CHECKPOINT_NAME, result.model, vocab, train_cfg, result.optimizer,
                           result.history, metadata)
    vocab_hash = vocab.save(out / "vocab.txt")
    write_history(out / "history.csv", result.history)
    _write_manifest(out / "train_manifest.json", {
        "kind": "train",
        "prepared": str(prepared),
        "prepared_manifest": manifest,
        "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict(),
        "vocab_sha256": vocab_hash,
        "vocab_size": len(vocab),
        "checkpoint": str(ckpt),
        "checkpoint_sha256": _sha256_file(ckpt),
        "optimizer_steps": result.steps,
        "final_loss": result.history[-1].loss if result.history else None,
        "torch": torch.__version__,
        "started": started,
        "finished": _now(),
    })
    print(f"checkpoint: {ckpt}")
    return EXIT_OK


# -- evaluate / solve --------------------------------------------------------


def _decode_strings(checkpoint, sources: list[str], max_len: int) -> list[str]:
    from .model import greedy_decode

    vocab, model = checkpoint.vocab, checkpoint.model
    out: list[str] = []
    for start in range(0, len(sources), 64):
        ids = [vocab.encode(s) for s in sources[start:start + 64]]
        out.extend(vocab.decode(seq) for seq in greedy_decode(model, ids, max_len))
    return out


def cmd_evaluate(args) -> int:
    from .train import load_checkpoint

    _configure_threads()
    results: dict[tuple[str, int], tuple[int, int]] = {}
    checkpoints: dict[str, str] = {}
    label = None
    for directory in map(Path, args.prepared):
        manifest = _read_manifest(directory)
        data = read_prepared(directory, "test")
        ckpt_path = Path(args.checkpoint) if args.checkpoint else directory / CHECKPOINT_NAME
        if not ckpt_path.exists():
            raise DataError(f"checkpoint {ckpt_path} not found")
        checkpoint = load_checkpoint(ckpt_path)
        checkpoints[str(directory)] = f"{ckpt_path} sha256={_sha256_file(ckpt_path)}"
        label = label or checkpoint.metadata.get("label", "model")
        notation = manifest.get("notation") or checkpoint.metadata.get("notation", "postfix")
        dataset = manifest.get("dataset", directory.name)
        rep = int(manifest.get("repetition") or 0)
        if (dataset, rep) in results:
            raise DataError(f"two prepared directories claim dataset {dataset}, repetition {rep}")
        predictions = _decode_strings(checkpoint, data.sources, args.max_len)
        correct = 0
        for pred, meta in zip(predictions, data.metadata):
            verdict = judge(pred, mapping_from_json(meta), meta["equation"], meta["answer"],
                            notation, mode=args.judge)
            correct += verdict.correct
        results[(dataset, rep)] = (correct, len(predictions))
        print(f"{directory}: {dataset} rep {rep}: {correct}/{len(predictions)}")
    rep_obj = EvalReport(results, label or "model")
    paths = report(rep_obj, args.out)
    _write_manifest(Path(args.out) / "manifest.json", {
        "kind": "evaluate",
        "prepared": [str(d) for d in args.prepared],
        "checkpoints": checkpoints,
        "judge": args.judge,
        "max_len": args.max_len,
        "created": _now(),
        "version": __version__,
    })
    print(render_table([rep_obj]), end="")
    print(f"reports: {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def cmd_solve(args) -> int:
    from .preprocess import preprocess_question
    from .train import load_checkpoint

    _configure_threads()
    checkpoint = load_checkpoint(args.checkpoint)
    config = PreprocessConfig.from_dict(checkpoint.metadata.get("preprocess", {})).for_inference()
    notation = checkpoint.metadata.get("notation", "postfix")
    tagged = preprocess_question(args.question, config, key="solve")
    if not tagged.mapping and not tagged.untouched:
        print("no numeric quantities found")
        return EXIT_DATA
    raw = _decode_strings(checkpoint, [tagged.text], args.max_len)[0]
    try:
        tokens, unresolved = detag(tokenize_expression(raw), tagged.mapping)
        expression = serialize(tokens)
    except ExprError:
        tokens, unresolved, expression = None, [], raw
    print(f"expression: {expression}")
    if tokens is None or unresolved:
        print("answer: undefined")
        return EXIT_RUNTIME
    try:
        value = evaluate(parse_notation(tokens, notation))
    except ExprError as exc:
        print(f"answer: undefined ({type(exc).__name__})")
        return EXIT_RUNTIME
    print(f"answer: {format_number(value)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import generate, write_corpus

    path = write_corpus(args.out, generate(args.n, args.seed, args.max_operators))
    print(f"wrote {args.n} examples to {path}")
    return EXIT_OK


# -- wiring --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mwp-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    notations = [n.value for n in Notation]

    p = sub.add_parser("prepare", help="split a corpus and write tagged source/target files")
    p.add_argument("--corpus", required=True)
    p.add_argument("--dataset", default="custom", choices=DATASET_NAMES)
    p.add_argument("--config", help="key = value file (steps, phase, seed, lst_window)")
    p.add_argument("--steps", help="e.g. 'SW,LST' or 'none'")
    p.add_argument("--phase", choices=["train", "infer"])
    p.add_argument("--seed", type=int, help="seed for sentence reordering")
    p.add_argument("--lst-window", type=int)
    p.add_argument("--notation", choices=notations, default="postfix")
    p.add_argument("--split-seeds", default="11,23,47")
    p.add_argument("--train-fraction", type=float, default=0.95)
    p.add_argument("--repetition", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("convert", help="convert an expression between notations")
    p.add_argument("expression")
    p.add_argument("--from", dest="source", choices=notations, default="infix")
    p.add_argument("--to", dest="target", choices=notations, default="postfix")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("train", help="train a model on a prepared directory")
    p.add_argument("--prepared", required=True)
    p.add_argument("--model-type", type=int, choices=[1, 2, 3], default=2)
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--iteration-unit", choices=["epoch", "step"], default="epoch")
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--schedule", choices=["plateau", "warmup"], default="plateau")
    p.add_argument("--patience", type=int, default=25)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--max-seq-len", type=int, default=256)
    p.add_argument("--vocab-size", type=int, default=2**13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoint-every", type=int, default=0)
    p.add_argument("--out", help="output directory (default: the prepared directory)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="judge test splits and write reports")
    p.add_argument("--prepared", nargs="+", required=True)
    p.add_argument("--checkpoint", help="use one checkpoint for every directory")
    p.add_argument("--judge", choices=["answer", "exact"], default="answer")
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("solve", help="translate and evaluate a single question")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("question")
    p.add_argument("--max-len", type=int, default=64)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("synth", help="write a synthetic templated corpus")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-operators", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mwp-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DatasetError, ExprError, PreprocessError, TaggingError, FileNotFoundError) as exc:
        print(f"mwp-forge: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - last-resort exit code contract
        log.debug("runtime failure", exc_info=True)
        print(f"mwp-forge: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
