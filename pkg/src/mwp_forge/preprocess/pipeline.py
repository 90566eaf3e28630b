"""Composable preprocessing pipelines over the eight algorithms."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from ..tagging import TaggedQuestion, normalize_number_words, tag_all
from .strategies import DEFAULT_WINDOW, exclusive_tag, label_selective_tag, selective_tag
from .text import lemmatize, pos_annotate, pos_replace, remove_stop_words, reorder_sentences

STEPS = ("SW", "L", "ST", "LST", "ET", "POS", "WPOS", "R")
STEP_NAMES = {
    "SW": "Remove Stop Words",
    "L": "Lemmatize",
    "ST": "Selective Tagging",
    "LST": "Label-Selective Tagging",
    "ET": "Exclusive Tagging",
    "POS": "Part of Speech",
    "WPOS": "Part of Speech w/ Words",
    "R": "Sentence Reordering",
}
TAGGING_STEPS = ("ST", "ET", "LST")
TRAINING_ONLY = ("ST", "ET")
CANONICAL_ORDER = ("SW", "L", "ST", "ET", "LST", "POS", "WPOS", "R")


class PreprocessError(ValueError):
    pass


class InvalidCombination(PreprocessError):
    pass


class PhaseViolation(PreprocessError):
    pass


def _abbreviations() -> str:
    return ", ".join(STEPS)


@dataclass(frozen=True)
class PreprocessConfig:
    steps: tuple[str, ...] = ()
    phase: str = "train"
    seed: int = 0
    lst_window: int = DEFAULT_WINDOW

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(s.upper() for s in self.steps))
        self.validate()

    def validate(self) -> None:
        unknown = [s for s in self.steps if s not in STEPS]
        if unknown:
            raise InvalidCombination(f"unknown step(s) {unknown}; expected one of {_abbreviations()}")
        if len(set(self.steps)) != len(self.steps):
            raise InvalidCombination(f"duplicate steps in {list(self.steps)}")
        if self.phase not in ("train", "infer"):
            raise InvalidCombination(f"phase must be 'train' or 'infer', got {self.phase!r}")
        tagging = [s for s in self.steps if s in TAGGING_STEPS]
        if len(tagging) > 1:
            raise InvalidCombination(f"tagging strategies {tagging} are mutually exclusive (pick one of ST, ET, LST)")
        if "POS" in self.steps and "WPOS" in self.steps:
            raise InvalidCombination("POS and WPOS are mutually exclusive")
        if self.phase == "infer":
            offending = [s for s in self.steps if s in TRAINING_ONLY]
            if offending:
                raise PhaseViolation(f"{offending} need the gold equation and apply to training only")
        if self.lst_window < 1:
            raise InvalidCombination("lst_window must be positive")

    @property
    def ordered_steps(self) -> tuple[str, ...]:
        return tuple(s for s in CANONICAL_ORDER if s in self.steps)

    @property
    def tagging(self) -> str:
        return next((s for s in self.steps if s in TAGGING_STEPS), "ALL")

    def for_inference(self) -> "PreprocessConfig":
        """Same pipeline with training-only tagging swapped for tag-all."""
        return replace(self, steps=tuple(s for s in self.steps if s not in TRAINING_ONLY), phase="infer")

    def to_dict(self) -> dict[str, Any]:
        return {"steps": list(self.steps), "phase": self.phase, "seed": self.seed, "lst_window": self.lst_window}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PreprocessConfig":
        return cls(
            steps=tuple(data.get("steps", ())),
            phase=data.get("phase", "train"),
            seed=int(data.get("seed", 0)),
            lst_window=int(data.get("lst_window", DEFAULT_WINDOW)),
        )


def parse_steps(value: str) -> tuple[str, ...]:
    """Accept ``"[SW, LST]"``, ``'["SW", "LST"]'``, ``"SW+LST"`` or ``"SW,LST"``."""
    value = value.strip().strip("[]")
    parts = re.split(r"[\s,+]+", value)
    steps = tuple(p.strip("'\"").upper() for p in parts if p.strip("'\""))
    if steps == ("NONE",):
        return ()
    return steps


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines (``#`` comments) into a raw dict."""
    out: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise PreprocessError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower().replace("-", "_")
        if key == "steps":
            out[key] = parse_steps(value)
        elif key in ("seed", "lst_window"):
            try:
                out[key] = int(value)
            except ValueError:
                raise PreprocessError(f"line {lineno}: {key} must be an integer") from None
        else:
            out[key] = value.strip("'\"")
    return out


def load_config(path: str | Path, **overrides: Any) -> PreprocessConfig:
    data = parse_config_text(Path(path).read_text(encoding="utf-8"))
    known = {k: v for k, v in data.items() if k in ("steps", "phase", "seed", "lst_window")}
    known.update({k: v for k, v in overrides.items() if v is not None})
    return PreprocessConfig.from_dict(known)


def derive_seed(seed: int, key: str) -> int:
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class ProcessedExample:
    id: str
    source: str
    tagged: TaggedQuestion
    steps: tuple[str, ...] = field(default_factory=tuple)


def preprocess_question(
    question: str,
    config: PreprocessConfig,
    equation=None,
    key: str = "",
) -> TaggedQuestion:
    """Run the pipeline on raw question text; ``equation`` is needed for ST/ET."""
    steps = config.ordered_steps
    text = normalize_number_words(question)
    if "SW" in steps:
        text = remove_stop_words(text)
    if "L" in steps:
        text = lemmatize(text)

    strategy = config.tagging
    if strategy in TRAINING_ONLY:
        if config.phase != "train":
            raise PhaseViolation(f"{strategy} applies to training only")
        if equation is None:
            raise PhaseViolation(f"{strategy} needs the gold equation")
        tagged = (selective_tag if strategy == "ST" else exclusive_tag)(text, equation)
    elif strategy == "LST":
        tagged = label_selective_tag(text, config.lst_window)
    else:
        tagged = tag_all(text)

    text = tagged.text
    if "POS" in steps:
        text = pos_replace(text)
    elif "WPOS" in steps:
        text = pos_annotate(text)
    if "R" in steps:
        text = reorder_sentences(text, derive_seed(config.seed, key))
    return TaggedQuestion(text, tagged.mapping, tagged.untouched)


def apply_pipeline(example, config: PreprocessConfig) -> ProcessedExample:
    """Process an example (anything with ``id``, ``question`` and ``tree``)."""
    equation = example.tree if config.tagging in TRAINING_ONLY else None
    tagged = preprocess_question(example.question, config, equation, key=str(example.id))
    return ProcessedExample(str(example.id), tagged.text, tagged, config.ordered_steps)
