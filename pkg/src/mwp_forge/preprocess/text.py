"""Word-level transforms: stop words, lemmas, part-of-speech codes, reordering."""

from __future__ import annotations

import random
import re
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

# words, numbers and tags are "words" for windowing; anything else is a symbol
TOKEN_RE = re.compile(
    r"(?P<tag>⟨[a-z]+⟩)"
    r"|(?P<number>(?<![\d.])(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?(?!\d))"
    r"|(?P<word>[A-Za-z]+(?:['’-][A-Za-z]+)*)"
    r"|(?P<symbol>\S)"
)
WORD_RE = re.compile(r"[A-Za-z]+(?:['’-][A-Za-z]+)*")
SENTENCE_END = ".!?"

STOP_WORDS_FILE = "stopwords_v1.txt"


@lru_cache(maxsize=None)
def stop_words() -> frozenset[str]:
    text = resources.files("mwp_forge.data").joinpath(STOP_WORDS_FILE).read_text("utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


def is_stop_word(word: str) -> bool:
    return word.lower() in stop_words()


def remove_stop_words(text: str) -> str:
    kept = []
    for chunk in text.split():
        m = WORD_RE.fullmatch(chunk.strip(".,;:!?\"'()"))
        if m and is_stop_word(m.group()):
            core = m.group()
            rest = chunk.replace(core, "", 1)
            if rest:
                kept.append(rest)
            continue
        kept.append(chunk)
    return " ".join(kept)


# -- lemmatizer -------------------------------------------------------------

IRREGULAR = {
    # verbs
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do",
    "went": "go", "gone": "go", "goes": "go",
    "bought": "buy", "brought": "bring", "caught": "catch", "taught": "teach",
    "thought": "think", "sold": "sell", "told": "tell", "made": "make",
    "ate": "eat", "eaten": "eat", "gave": "give", "given": "give",
    "took": "take", "taken": "take", "got": "get", "gotten": "get",
    "found": "find", "lost": "lose", "paid": "pay",
    "spent": "spend", "sent": "send", "built": "build", "kept": "keep",
    "ran": "run", "saw": "see", "seen": "see", "came": "come", "grew": "grow",
    "grown": "grow", "threw": "throw", "thrown": "throw", "won": "win",
    "drove": "drive", "driven": "drive", "rode": "ride", "ridden": "ride",
    "flew": "fly", "flown": "fly", "wrote": "write", "written": "write",
    "read": "read", "put": "put", "cut": "cut", "held": "hold", "fell": "fall",
    "fallen": "fall", "broke": "break", "broken": "break", "picked": "pick",
    "swam": "swim", "sang": "sing", "drank": "drink", "began": "begin",
    "knew": "know", "known": "know", "stood": "stand", "sat": "sit",
    "met": "meet", "led": "lead", "fed": "feed", "baked": "bake",
    "used": "use", "using": "use", "raised": "raise", "shared": "share",
    "placed": "place", "traveled": "travel", "travelled": "travel",
    # nouns
    "children": "child", "people": "person", "men": "man", "women": "woman",
    "feet": "foot", "teeth": "tooth", "mice": "mouse", "geese": "goose",
    "leaves": "leaf", "knives": "knife", "wolves": "wolf", "loaves": "loaf",
    "shelves": "shelf", "halves": "half", "lives": "life", "wives": "wife",
    "sheep": "sheep", "fish": "fish", "deer": "deer", "series": "series",
    "species": "species", "buses": "bus", "tomatoes": "tomato",
    "potatoes": "potato", "heroes": "hero", "cookies": "cookie",
    "movies": "movie", "pies": "pie", "ties": "tie", "brownies": "brownie",
}

_VOWELS = set("aeiou")
_NO_STRIP_S = ("ss", "us", "is", "ous", "as")


def _restore_e(stem: str) -> str:
    # bak(ing) -> bake, giv(ing) -> give; consonant-vowel-consonant endings only
    if (
        len(stem) >= 3
        and stem[-1] in "kvczg"
        and stem[-2] in _VOWELS
        and stem[-3] not in _VOWELS
    ):
        return stem + "e"
    return stem


def _undouble(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "lsz" and stem[-1] not in _VOWELS:
        return stem[:-1]
    return stem


def lemma(word: str) -> str:
    """Lowercase lemma of a single word via dictionary lookup and suffix rules."""
    w = word.lower()
    if w in IRREGULAR:
        return IRREGULAR[w]
    if len(w) <= 3 or not w.isalpha():
        if "-" in w:
            head, _, tail = w.rpartition("-")
            return f"{head}-{lemma(tail)}"
        return w
    if w.endswith("ies") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith(("ches", "shes", "sses", "xes", "zes")):
        return w[:-2]
    if w.endswith("s") and not w.endswith(_NO_STRIP_S):
        return w[:-1]
    if w.endswith("ied") and len(w) > 4:
        return w[:-3] + "y"
    if w.endswith("ing") and len(w) > 5:
        return _restore_e(_undouble(w[:-3]))
    if w.endswith("ed") and len(w) > 4:
        stem = w[:-2]
        if stem.endswith("e"):
            return stem
        return _restore_e(_undouble(stem))
    return w


def _match_case(original: str, replacement: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def lemmatize(text: str) -> str:
    return WORD_RE.sub(lambda m: _match_case(m.group(), lemma(m.group())), text)


# -- part of speech ---------------------------------------------------------

Tagger = Callable[[Sequence[str]], list[str]]

_CLOSED_CLASS = {
    "DT": "a an the each every this that these those some all no another both either neither",
    "IN": "in on at of for with by from into about after before during over under between "
          "through than per among since until without within across behind near off",
    "TO": "to",
    "PRP": "i you he she it we they me him us them myself himself herself itself themselves",
    "PRP$": "my your his her its our their",
    "CC": "and or but nor",
    "WRB": "how when where why",
    "WP": "what who whom which",
    "MD": "will would can could should may might must shall",
    "VBZ": "is has does",
    "VBP": "are have do am",
    "VBD": "was were had did went bought gave got made took ate sold left lost found paid "
           "spent ran saw came grew threw won drove rode flew wrote held fell broke",
    "JJ": "many much few several total other same new old more less",
    "RB": "now then not also still only again already just very too altogether together away",
    "EX": "there",
}
POS_LEXICON = {w: code for code, words in _CLOSED_CLASS.items() for w in words.split()}


def _suffix_tag(word: str) -> str:
    w = word.lower()
    if w in POS_LEXICON:
        return POS_LEXICON[w]
    if word[:1].isupper():
        return "NN"
    if w.endswith("ly"):
        return "RB"
    if w.endswith("ing"):
        return "VBG"
    if w.endswith("ed"):
        return "VBD"
    if w.endswith(("ous", "ful", "able", "ible", "ive", "less")):
        return "JJ"
    if w.endswith("est"):
        return "JJS"
    if w.endswith("s") and lemma(w) != w:
        return "NNS"
    return "NN"


def lexicon_tagger(words: Sequence[str]) -> list[str]:
    """Default tagger: closed-class lexicon, then suffix heuristics, else ``NN``."""
    return [_suffix_tag(w) for w in words]


def _pos_pieces(text: str):
    for m in TOKEN_RE.finditer(text):
        yield m.lastgroup, m.group()


def pos_replace(text: str, tagger: Tagger = lexicon_tagger, replace_quantities: bool = False) -> str:
    """Replace every word by its POS code.

    Tags and numbers keep their surface form (they are what the decoder copies)
    unless ``replace_quantities`` is set, in which case they become ``CD``.
    """
    pieces = list(_pos_pieces(text))
    codes = iter(tagger([s for kind, s in pieces if kind == "word"]))
    out = []
    for kind, surface in pieces:
        if kind == "word":
            out.append(next(codes))
        elif kind in ("tag", "number") and replace_quantities:
            out.append("CD")
        else:
            out.append(surface)
    return " ".join(out)


def pos_annotate(text: str, tagger: Tagger = lexicon_tagger) -> str:
    pieces = list(_pos_pieces(text))
    codes = iter(tagger([s for kind, s in pieces if kind == "word"]))
    out = []
    for kind, surface in pieces:
        if kind == "word":
            out.append(f"({next(codes)} {surface})")
        elif kind in ("tag", "number"):
            out.append(f"(CD {surface})")
        else:
            out.append(surface)
    return " ".join(out)


# -- sentences --------------------------------------------------------------

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(text.strip()) if s]


def reorder_sentences(text: str, seed: int) -> str:
    sentences = split_sentences(text)
    random.Random(seed).shuffle(sentences)
    return " ".join(sentences)
