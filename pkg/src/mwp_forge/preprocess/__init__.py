"""Question preprocessing: stop words, lemmas, tagging strategies, POS, reordering."""

from .pipeline import (
    CANONICAL_ORDER,
    STEP_NAMES,
    STEPS,
    InvalidCombination,
    PhaseViolation,
    PreprocessConfig,
    PreprocessError,
    ProcessedExample,
    apply_pipeline,
    derive_seed,
    load_config,
    parse_config_text,
    parse_steps,
    preprocess_question,
)
from .strategies import (
    exclusive_tag,
    find_label,
    label_selective_tag,
    labelled_spans,
    selective_tag,
    term_counts,
)
from .text import (
    lemma,
    lemmatize,
    lexicon_tagger,
    pos_annotate,
    pos_replace,
    remove_stop_words,
    reorder_sentences,
    split_sentences,
    stop_words,
)

__all__ = [
    "CANONICAL_ORDER",
    "STEP_NAMES",
    "STEPS",
    "InvalidCombination",
    "PhaseViolation",
    "PreprocessConfig",
    "PreprocessError",
    "ProcessedExample",
    "apply_pipeline",
    "derive_seed",
    "exclusive_tag",
    "find_label",
    "label_selective_tag",
    "labelled_spans",
    "lemma",
    "lemmatize",
    "lexicon_tagger",
    "load_config",
    "parse_config_text",
    "parse_steps",
    "pos_annotate",
    "pos_replace",
    "preprocess_question",
    "remove_stop_words",
    "reorder_sentences",
    "selective_tag",
    "split_sentences",
    "stop_words",
    "term_counts",
]
