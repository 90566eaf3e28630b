"""Minimal encoder-decoder Transformer, masked cross-entropy and greedy decoding.

Post-norm layers, sinusoidal positions and scaled dot-product attention as in
the original architecture, written against plain tensors so every piece can be
inspected (attention weights) and gradient-checked.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
from torch import Tensor, nn

from .tokenizer import END, PAD, START


class ModelError(ValueError):
    pass


class SequenceTooLong(ModelError):
    pass


class IdOutOfRange(ModelError):
    pass


class ShapeMismatch(ModelError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    num_layers: int
    num_heads: int
    d_model: int
    d_ff: int
    dropout: float = 0.1
    max_seq_len: int = 256

    def __post_init__(self) -> None:
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.num_heads} heads")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if min(self.num_layers, self.num_heads, self.d_model, self.d_ff, self.max_seq_len) < 1:
            raise ValueError("model dimensions must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


# (layers, heads, depth, feed-forward depth)
MODEL_TYPES = {
    1: ModelConfig(num_layers=4, num_heads=8, d_model=512, d_ff=1024),
    2: ModelConfig(num_layers=2, num_heads=8, d_model=256, d_ff=1024),
    3: ModelConfig(num_layers=1, num_heads=8, d_model=256, d_ff=512),
}


def model_type(kind: int, **overrides) -> ModelConfig:
    if kind not in MODEL_TYPES:
        raise ValueError(f"model type must be one of {sorted(MODEL_TYPES)}, got {kind}")
    return ModelConfig(**{**MODEL_TYPES[kind].to_dict(), **overrides})


def sinusoidal_positions(length: int, d_model: int) -> Tensor:
    pos = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    i = torch.arange(0, d_model, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, i / d_model)
    table = torch.zeros(length, d_model, dtype=torch.float64)
    table[:, 0::2] = torch.sin(angle)
    table[:, 1::2] = torch.cos(angle[:, : d_model // 2])
    return table


def _uniform_(weight: Tensor, fan_in: int, fan_out: int) -> None:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    nn.init.uniform_(weight, -bound, bound)


class Linear(nn.Module):
    def __init__(self, d_in: int, d_out: int):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(d_out, d_in))
        self.bias = nn.Parameter(torch.zeros(d_out))
        _uniform_(self.weight, d_in, d_out)

    def forward(self, x: Tensor) -> Tensor:
        return x @ self.weight.T + self.bias


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, num_heads: int, dropout: float):
        super().__init__()
        self.h = num_heads
        self.d_head = d_model // num_heads
        self.q = Linear(d_model, d_model)
        self.k = Linear(d_model, d_model)
        self.v = Linear(d_model, d_model)
        self.o = Linear(d_model, d_model)
        self.drop = nn.Dropout(dropout)
        self.last_weights: Tensor | None = None

    def _heads(self, x: Tensor) -> Tensor:
        b, n, _ = x.shape
        return x.view(b, n, self.h, self.d_head).transpose(1, 2)

    def forward(self, query: Tensor, memory: Tensor, mask: Tensor) -> Tensor:
        """``mask`` is boolean, broadcastable to (batch, 1, q_len, k_len); True = attend."""
        q, k, v = self._heads(self.q(query)), self._heads(self.k(memory)), self._heads(self.v(memory))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        scores = scores.masked_fill(~mask, torch.finfo(scores.dtype).min)
        weights = torch.softmax(scores, dim=-1)
        self.last_weights = weights.detach()
        out = self.drop(weights) @ v
        b, _, n, _ = out.shape
        return self.o(out.transpose(1, 2).reshape(b, n, self.h * self.d_head))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int, dropout: float):
        super().__init__()
        self.inner = Linear(d_model, d_ff)
        self.outer = Linear(d_ff, d_model)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: Tensor) -> Tensor:
        return self.outer(self.drop(torch.relu(self.inner(x))))


class EncoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, x: Tensor, mask: Tensor) -> Tensor:
        x = self.norm1(x + self.drop(self.attn(x, x, mask)))
        return self.norm2(x + self.drop(self.ff(x)))


class DecoderLayer(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.self_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.cross_attn = MultiHeadAttention(cfg.d_model, cfg.num_heads, cfg.dropout)
        self.ff = FeedForward(cfg.d_model, cfg.d_ff, cfg.dropout)
        self.norm1 = nn.LayerNorm(cfg.d_model)
        self.norm2 = nn.LayerNorm(cfg.d_model)
        self.norm3 = nn.LayerNorm(cfg.d_model)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, y: Tensor, memory: Tensor, self_mask: Tensor, cross_mask: Tensor) -> Tensor:
        y = self.norm1(y + self.drop(self.self_attn(y, y, self_mask)))
        y = self.norm2(y + self.drop(self.cross_attn(y, memory, cross_mask)))
        return self.norm3(y + self.drop(self.ff(y)))


class Transformer(nn.Module):
    def __init__(self, cfg: ModelConfig, vocab_size: int):
        super().__init__()
        self.cfg = cfg
        self.vocab_size = vocab_size
        self.src_embed = nn.Parameter(torch.empty(vocab_size, cfg.d_model))
        self.tgt_embed = nn.Parameter(torch.empty(vocab_size, cfg.d_model))
        bound = math.sqrt(3.0 / cfg.d_model)
        nn.init.uniform_(self.src_embed, -bound, bound)
        nn.init.uniform_(self.tgt_embed, -bound, bound)
        self.register_buffer("positions", sinusoidal_positions(cfg.max_seq_len, cfg.d_model).float(),
                             persistent=False)
        self.encoder = nn.ModuleList(EncoderLayer(cfg) for _ in range(cfg.num_layers))
        self.decoder = nn.ModuleList(DecoderLayer(cfg) for _ in range(cfg.num_layers))
        self.project = Linear(cfg.d_model, vocab_size)
        self.drop = nn.Dropout(cfg.dropout)

    def _embed(self, table: Tensor, ids: Tensor) -> Tensor:
        x = table[ids] * math.sqrt(self.cfg.d_model)
        return self.drop(x + self.positions[: ids.shape[1]].to(x.dtype))

    def _check(self, ids: Tensor) -> None:
        if ids.shape[-1] > self.cfg.max_seq_len:
            raise SequenceTooLong(f"sequence of {ids.shape[-1]} exceeds max_seq_len {self.cfg.max_seq_len}")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.vocab_size):
            raise IdOutOfRange(f"ids must lie in [0, {self.vocab_size})")

    def encode(self, src: Tensor) -> tuple[Tensor, Tensor]:
        self._check(src)
        src_mask = (src != PAD)[:, None, None, :]
        x = self._embed(self.src_embed, src)
        for layer in self.encoder:
            x = layer(x, src_mask)
        return x, src_mask

    def decode(self, tgt: Tensor, memory: Tensor, src_mask: Tensor) -> Tensor:
        self._check(tgt)
        t = tgt.shape[1]
        causal = torch.tril(torch.ones(t, t, dtype=torch.bool, device=tgt.device))
        self_mask = causal[None, None] & (tgt != PAD)[:, None, None, :]
        # a fully padded query row still needs one key to attend to
        self_mask = self_mask | torch.eye(t, dtype=torch.bool, device=tgt.device)[None, None]
        y = self._embed(self.tgt_embed, tgt)
        for layer in self.decoder:
            y = layer(y, memory, self_mask, src_mask)
        return self.project(y)

    def forward(self, src: Tensor, tgt: Tensor) -> Tensor:
        """Logits (batch, tgt_len, vocab) for batched id tensors."""
        memory, src_mask = self.encode(src)
        return self.decode(tgt, memory, src_mask)


def forward(model: Transformer, src, tgt_prefix, mode: str = "infer") -> Tensor:
    """Logits for one (unbatched) or many (batched) sequences.

    ``mode="train"`` enables dropout; ``"infer"`` disables it.
    """
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    src = torch.as_tensor(src, dtype=torch.long)
    tgt = torch.as_tensor(tgt_prefix, dtype=torch.long)
    single = src.dim() == 1
    if single:
        src, tgt = src[None], tgt[None]
    was_training = model.training
    model.train(mode == "train")
    try:
        logits = model(src, tgt)
    finally:
        model.train(was_training)
    return logits[0] if single else logits


def masked_cross_entropy(logits: Tensor, gold: Tensor, pad_mask: Tensor | None = None) -> Tensor:
    """Mean over non-pad positions of ``-log softmax(logits)[gold]``.

    ``pad_mask`` is True at positions to ignore; by default positions whose
    gold id is PAD.
    """
    if logits.shape[:-1] != gold.shape:
        raise ShapeMismatch(f"logits {tuple(logits.shape)} do not match gold ids {tuple(gold.shape)}")
    if pad_mask is None:
        pad_mask = gold == PAD
    elif pad_mask.shape != gold.shape:
        raise ShapeMismatch(f"pad mask {tuple(pad_mask.shape)} does not match gold ids {tuple(gold.shape)}")
    log_probs = torch.log_softmax(logits, dim=-1)
    picked = log_probs.gather(-1, gold.unsqueeze(-1)).squeeze(-1)
    keep = (~pad_mask).to(logits.dtype)
    count = keep.sum()
    if count == 0:
        return logits.sum() * 0.0
    return -(picked * keep).sum() / count


loss = masked_cross_entropy


@torch.no_grad()
def greedy_decode(model: Transformer, src_ids, max_len: int = 64) -> list[int] | list[list[int]]:
    """Append the argmax token from START until END or ``max_len`` tokens.

    Accepts one id sequence or a list of them; returned sequences exclude START
    and END.
    """
    single = len(src_ids) == 0 or isinstance(src_ids[0], int)
    batch = [list(src_ids)] if single else [list(s) for s in src_ids]
    if not batch:
        return []
    was_training = model.training
    model.eval()
    try:
        width = max(1, max(len(s) for s in batch))
        src = torch.full((len(batch), width), PAD, dtype=torch.long)
        for i, s in enumerate(batch):
            src[i, : len(s)] = torch.as_tensor(s, dtype=torch.long)
        memory, src_mask = model.encode(src)
        out = torch.full((len(batch), 1), START, dtype=torch.long)
        done = torch.zeros(len(batch), dtype=torch.bool)
        limit = min(max_len, model.cfg.max_seq_len - 1)
        for _ in range(limit):
            logits = model.decode(out, memory, src_mask)[:, -1]
            nxt = logits.argmax(-1)
            nxt = torch.where(done, torch.full_like(nxt, PAD), nxt)
            out = torch.cat([out, nxt[:, None]], dim=1)
            done |= nxt == END
            if bool(done.all()):
                break
    finally:
        model.train(was_training)
    results = []
    for row in out[:, 1:].tolist():
        seq = []
        for tok in row:
            if tok in (END, PAD):
                break
            seq.append(tok)
        results.append(seq)
    return results[0] if single else results
