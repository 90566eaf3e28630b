"""Teacher-forced training loop, checkpoints and loss history."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import torch
from torch import Tensor

from .model import ModelConfig, SequenceTooLong, Transformer, greedy_decode, masked_cross_entropy
from .optim import BETAS, EPSILON, AdamState, InverseSqrtWarmup, PlateauHalving, adam_step
from .tokenizer import END, PAD, START, Vocab

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "mwp-forge-checkpoint"


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    iterations: int = 300
    iteration_unit: str = "epoch"  # or "step"
    lr: float = 1e-4
    schedule: str = "plateau"  # or "warmup"
    patience: int = 25
    lr_floor: float = 1e-6
    warmup: int = 4000
    beta1: float = BETAS[0]
    beta2: float = BETAS[1]
    epsilon: float = EPSILON
    seed: int = 0
    checkpoint_every: int = 0

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.iterations < 0:
            raise ValueError("batch_size must be positive and iterations non-negative")
        if self.iteration_unit not in ("epoch", "step"):
            raise ValueError("iteration_unit must be 'epoch' or 'step'")
        if self.schedule not in ("plateau", "warmup"):
            raise ValueError("schedule must be 'plateau' or 'warmup'")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("betas must lie in (0, 1)")
        if self.lr <= 0 or self.epsilon <= 0:
            raise ValueError("lr and epsilon must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class HistoryRow:
    iteration: int
    loss: float
    lr: float


@dataclass
class TrainResult:
    model: Transformer
    history: list[HistoryRow] = field(default_factory=list)
    steps: int = 0
    optimizer: AdamState = field(default_factory=AdamState)


def encode_pairs(pairs: Sequence[tuple[str, str]], vocab: Vocab) -> list[tuple[list[int], list[int]]]:
    """Source ids, and target ids wrapped in START ... END."""
    return [(vocab.encode(src), [START, *vocab.encode(tgt), END]) for src, tgt in pairs]


def pad_batch(seqs: Sequence[Sequence[int]]) -> Tensor:
    width = max(1, max((len(s) for s in seqs), default=1))
    out = torch.full((len(seqs), width), PAD, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(list(s), dtype=torch.long)
    return out


def _batches(n: int, batch_size: int, gen: torch.Generator):
    """Endless stream of (epoch, index batch); each epoch is one shuffled pass."""
    epoch = 0
    while True:
        order = torch.randperm(n, generator=gen).tolist()
        for start in range(0, n, batch_size):
            yield epoch, order[start:start + batch_size]
        epoch += 1


def train(
    model_config: ModelConfig,
    train_config: TrainConfig,
    pairs: Sequence[tuple[str, str]],
    vocab: Vocab,
    checkpoint_dir: str | Path | None = None,
    on_iteration: Callable[[HistoryRow], None] | None = None,
) -> TrainResult:
    """Train from scratch.  One iteration is an epoch (default) or a single step."""
    if not pairs:
        raise ValueError("no training pairs")
    tc = train_config
    torch.manual_seed(tc.seed)
    model = Transformer(model_config, len(vocab))
    data = encode_pairs(pairs, vocab)
    longest = max(max(len(s), len(t) - 1) for s, t in data)
    if longest > model_config.max_seq_len:
        raise SequenceTooLong(f"longest sequence has {longest} ids; max_seq_len is {model_config.max_seq_len}")

    names = [name for name, _ in model.named_parameters()]
    params = dict(model.named_parameters())
    state = AdamState()
    if tc.schedule == "plateau":
        schedule = PlateauHalving(tc.lr, tc.patience, tc.lr_floor)
    else:
        schedule = InverseSqrtWarmup(model_config.d_model, tc.warmup)

    gen = torch.Generator().manual_seed(tc.seed)
    stream = _batches(len(data), tc.batch_size, gen)
    steps_per_epoch = math.ceil(len(data) / tc.batch_size)
    steps_per_iteration = steps_per_epoch if tc.iteration_unit == "epoch" else 1

    result = TrainResult(model)
    model.train()
    for iteration in range(1, tc.iterations + 1):
        losses, lr_used = [], schedule.lr
        for _ in range(steps_per_iteration):
            _, idx = next(stream)
            src = pad_batch([data[i][0] for i in idx])
            tgt = pad_batch([data[i][1] for i in idx])
            logits = model(src, tgt[:, :-1])
            batch_loss = masked_cross_entropy(logits, tgt[:, 1:])
            model.zero_grad(set_to_none=True)
            batch_loss.backward()

            lr_used = schedule.step_lr(state.step + 1)
            current = {n: params[n].detach() for n in names}
            grads = {n: params[n].grad for n in names if params[n].grad is not None}
            updated, state = adam_step(current, grads, state, lr_used, (tc.beta1, tc.beta2), tc.epsilon)
            with torch.no_grad():
                for n in grads:
                    params[n].copy_(updated[n])
            losses.append(batch_loss.item())
        row = HistoryRow(iteration, sum(losses) / len(losses), lr_used)
        result.history.append(row)
        schedule.observe(row.loss)
        if on_iteration is not None:
            on_iteration(row)
        if checkpoint_dir and tc.checkpoint_every and iteration % tc.checkpoint_every == 0:
            save_checkpoint(Path(checkpoint_dir) / f"checkpoint-{iteration:04d}.pt", model, vocab, tc,
                            optimizer=state, history=result.history)
    result.steps = state.step
    result.optimizer = state
    model.eval()
    return result


def exact_match(model: Transformer, vocab: Vocab, pairs: Sequence[tuple[str, str]], max_len: int = 64,
                batch_size: int = 64) -> float:
    """Fraction of pairs whose greedy decoding reproduces the target ids exactly."""
    if not pairs:
        return 0.0
    hits = 0
    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        decoded = greedy_decode(model, [vocab.encode(s) for s, _ in chunk], max_len)
        hits += sum(d == vocab.encode(t) for d, (_, t) in zip(decoded, chunk))
    return hits / len(pairs)


# -- persistence -------------------------------------------------------------


def save_checkpoint(
    path: str | Path,
    model: Transformer,
    vocab: Vocab,
    train_config: TrainConfig | None = None,
    optimizer: AdamState | None = None,
    history: Sequence[HistoryRow] = (),
    metadata: dict | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "model_config": model.cfg.to_dict(),
        "train_config": train_config.to_dict() if train_config else None,
        "vocab": vocab.dumps(),
        "vocab_sha256": vocab.sha256,
        "state_dict": {k: v.detach().clone() for k, v in model.state_dict().items()},
        "optimizer": optimizer.state_dict() if optimizer else None,
        "history": [asdict(r) for r in history],
        "metadata": metadata or {},
    }
    torch.save(payload, path)
    return path


@dataclass
class Checkpoint:
    model: Transformer
    vocab: Vocab
    train_config: TrainConfig | None
    optimizer: AdamState | None
    history: list[HistoryRow]
    metadata: dict


def load_checkpoint(path: str | Path) -> Checkpoint:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    vocab = Vocab.loads(payload["vocab"])
    model = Transformer(ModelConfig(**payload["model_config"]), len(vocab))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    tc = TrainConfig(**payload["train_config"]) if payload.get("train_config") else None
    opt = AdamState.from_state_dict(payload["optimizer"]) if payload.get("optimizer") else None
    history = [HistoryRow(**r) for r in payload.get("history", [])]
    return Checkpoint(model, vocab, tc, opt, history, payload.get("metadata", {}))


def write_history(path: str | Path, history: Sequence[HistoryRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss", "lr"])
        for row in history:
            writer.writerow([row.iteration, f"{row.loss:.8g}", f"{row.lr:.8g}"])
