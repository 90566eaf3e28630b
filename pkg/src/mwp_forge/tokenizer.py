"""Byte-level subword vocabulary (pair merges) with atomic tag/operator symbols.

Every string is encodable because all 256 single bytes are units.  Tags
``⟨a⟩``..``⟨z⟩`` and the four operators are pre-tokenized as their own
chunks, so no learned unit ever spans them.
"""

from __future__ import annotations

import hashlib
import heapq
import re
import string
from collections import Counter, defaultdict
from pathlib import Path
from typing import Iterable, Sequence

PAD, START, END = 0, 1, 2
RESERVED = ("<pad>", "<s>", "</s>")
DEFAULT_VOCAB_SIZE = 2**13

ATOMIC_SYMBOLS = tuple(f"⟨{c}⟩" for c in string.ascii_lowercase)
OPERATOR_SYMBOLS = ("+", "-", "*", "/")

_PRETOKEN_RE = re.compile(
    r"⟨[a-z]⟩"
    r"|[+\-*/()]"
    r"| ?[^\W\d_]+"
    r"| ?\d+"
    r"| ?[^\s\w+\-*/()⟨⟩]+"
    r"|\s+"
    r"|.",
    re.DOTALL,
)

HEADER_PREFIX = "# mwp-forge-vocab"


class TokenizerError(ValueError):
    pass


class TargetTooSmall(TokenizerError):
    pass


class IdOutOfRange(TokenizerError, IndexError):
    pass


def pretokenize(text: str) -> list[str]:
    return _PRETOKEN_RE.findall(text)


def _escape(unit: bytes) -> str:
    try:
        text = unit.decode("utf-8")
    except UnicodeDecodeError:
        return "".join(f"\\x{b:02x}" for b in unit)
    out = []
    for ch in text:
        if ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 32 or ord(ch) == 127:
            out.append(f"\\x{ord(ch):02x}")
        else:
            out.append(ch)
    return "".join(out)


def _unescape(line: str) -> bytes:
    out = bytearray()
    i = 0
    while i < len(line):
        ch = line[i]
        if ch == "\\" and line[i + 1:i + 2] == "\\":
            out += b"\\"
            i += 2
        elif ch == "\\" and line[i + 1:i + 2] == "x":
            out.append(int(line[i + 2:i + 4], 16))
            i += 4
        else:
            out += ch.encode("utf-8")
            i += 1
    return bytes(out)


class Vocab:
    """Subword units; id = position.  Ids 0..2 are PAD/START/END."""

    def __init__(self, units: Sequence[bytes]):
        self.units: list[bytes] = [b"", b"", b""] + [bytes(u) for u in units]
        self.index: dict[bytes, int] = {}
        for i, unit in enumerate(self.units[len(RESERVED):], start=len(RESERVED)):
            if unit in self.index:
                raise TokenizerError(f"duplicate unit {unit!r}")
            self.index[unit] = i
        missing = [bytes([b]) for b in range(256) if bytes([b]) not in self.index]
        if missing:
            raise TokenizerError(f"vocab lacks {len(missing)} byte fallback units")
        self.atomic = {s: self.index[s.encode("utf-8")] for s in ATOMIC_SYMBOLS + OPERATOR_SYMBOLS}
        self.max_len = max(len(u) for u in self.units)

    def __len__(self) -> int:
        return len(self.units)

    def encode(self, text: str) -> list[int]:
        ids: list[int] = []
        for chunk in pretokenize(text):
            if chunk in self.atomic:
                ids.append(self.atomic[chunk])
                continue
            data = chunk.encode("utf-8")
            i = 0
            while i < len(data):
                for size in range(min(self.max_len, len(data) - i), 0, -1):
                    unit_id = self.index.get(data[i:i + size])
                    if unit_id is not None:
                        ids.append(unit_id)
                        i += size
                        break
        return ids

    def decode(self, ids: Iterable[int]) -> str:
        out = bytearray()
        for i in ids:
            i = int(i)
            if not 0 <= i < len(self.units):
                raise IdOutOfRange(f"id {i} outside vocabulary of {len(self.units)}")
            out += self.units[i]
        return out.decode("utf-8", errors="replace")

    def token_str(self, i: int) -> str:
        if i < len(RESERVED):
            return RESERVED[i]
        return self.units[i].decode("utf-8", errors="backslashreplace")

    # -- persistence --------------------------------------------------------

    def body_lines(self) -> list[str]:
        return list(RESERVED) + [_escape(u) for u in self.units[len(RESERVED):]]

    @property
    def sha256(self) -> str:
        return hashlib.sha256("\n".join(self.body_lines()).encode("utf-8")).hexdigest()

    def dumps(self) -> str:
        body = self.body_lines()
        return f"{HEADER_PREFIX} size={len(self)} sha256={self.sha256}\n" + "".join(f"{l}\n" for l in body)

    def save(self, path: str | Path) -> str:
        Path(path).write_text(self.dumps(), encoding="utf-8")
        return self.sha256

    @classmethod
    def loads(cls, text: str) -> "Vocab":
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or not lines[0].startswith(HEADER_PREFIX):
            raise TokenizerError("missing vocab header line")
        body = lines[1:]
        if tuple(body[:len(RESERVED)]) != RESERVED:
            raise TokenizerError("reserved ids are not PAD/START/END")
        vocab = cls([_unescape(l) for l in body[len(RESERVED):]])
        m = re.search(r"size=(\d+)", lines[0])
        if m and int(m.group(1)) != len(vocab):
            raise TokenizerError(f"header says {m.group(1)} units, file has {len(vocab)}")
        return vocab

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def base_units() -> list[bytes]:
    units = [bytes([b]) for b in range(256)]
    units += [s.encode("utf-8") for s in ATOMIC_SYMBOLS]
    return units


def base_size() -> int:
    return len(RESERVED) + len(base_units())


def build_vocab(texts: Iterable[str], target_size: int = DEFAULT_VOCAB_SIZE, min_frequency: int = 2) -> Vocab:
    """Learn pair merges until ``target_size`` units or no pair recurs.

    The most frequent adjacent pair is merged first; equal counts go to the
    lexicographically smallest pair.
    """
    if target_size < base_size():
        raise TargetTooSmall(f"target size {target_size} is below the {base_size()} base symbols")
    units = base_units()
    known = set(units)

    chunk_freq: Counter = Counter()
    for text in texts:
        for chunk in pretokenize(text):
            if chunk not in ATOMIC_SYMBOLS and chunk not in OPERATOR_SYMBOLS:
                chunk_freq[chunk] += 1
    words = [[bytes([b]) for b in chunk.encode("utf-8")] for chunk in chunk_freq]
    freqs = list(chunk_freq.values())

    pair_count: Counter = Counter()
    pair_where: dict[tuple[bytes, bytes], set[int]] = defaultdict(set)
    for wi, symbols in enumerate(words):
        for pair in zip(symbols, symbols[1:]):
            pair_count[pair] += freqs[wi]
            pair_where[pair].add(wi)
    heap = [(-n, pair) for pair, n in pair_count.items()]
    heapq.heapify(heap)

    while len(units) + len(RESERVED) < target_size and heap:
        neg, pair = heapq.heappop(heap)
        if pair_count.get(pair, 0) != -neg:
            continue  # stale entry
        if -neg < min_frequency:
            break
        merged = pair[0] + pair[1]
        if merged not in known:
            known.add(merged)
            units.append(merged)
        touched: set[tuple[bytes, bytes]] = set()
        for wi in sorted(pair_where.pop(pair, ())):
            symbols, f = words[wi], freqs[wi]
            for old in zip(symbols, symbols[1:]):
                pair_count[old] -= f
                touched.add(old)
            out, i = [], 0
            while i < len(symbols):
                if i + 1 < len(symbols) and (symbols[i], symbols[i + 1]) == pair:
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            words[wi] = out
            for new in zip(out, out[1:]):
                pair_count[new] += f
                pair_where[new].add(wi)
                touched.add(new)
        for p in touched:
            n = pair_count[p]
            if n <= 0:
                del pair_count[p]
                pair_where.pop(p, None)
            elif p != pair:
                heapq.heappush(heap, (-n, p))
        pair_count.pop(pair, None)
    return Vocab(units)
