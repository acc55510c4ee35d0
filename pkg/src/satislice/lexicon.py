"""Dictionary-driven text analysis: lexicon loading, tokenization, features.

A lexicon is a CSV of word categories (``category_id,group,structural,pattern``,
one pattern per row). Dictionary-backed categories score as relative
frequencies over the word total; structural categories count surface
properties of the token stream (words, sentences, punctuation classes).
A trailing ``*`` in a pattern matches any suffix; matching is otherwise
exact. Structural rows put a metric key from STRUCTURAL_METRICS in the
pattern column.
"""

from __future__ import annotations

import csv
import logging
import unicodedata
from dataclasses import dataclass
from datetime import datetime
from itertools import groupby
from pathlib import Path
from typing import Callable, Iterable

from .corpus import UserRecord
from .errors import DataValidationError

log = logging.getLogger(__name__)

GROUPS = (
    "basic_usage",
    "journey_word",
    "personal_vocabulary",
    "spoken_word",
    "chinese_characteristic",
)

WORD = "word"
PUNCTUATION = "punctuation"
NUMBER = "number"
OTHER = "other"

MAX_MATCH = "max_match"
WHITESPACE = "whitespace"
TOKENIZER_MODES = (MAX_MATCH, WHITESPACE)

_CJK_RANGES = (
    (0x4E00, 0x9FFF),    # unified ideographs
    (0x3400, 0x4DBF),    # extension A
    (0x20000, 0x2A6DF),  # extension B
    (0xF900, 0xFAFF),    # compatibility ideographs
)

_COMMA = {",", "，", "、"}
_PERIOD = {".", "。", "．"}
_QUESTION = {"?", "？"}
_EXCLAIM = {"!", "！"}
_COLON = {":", "："}
_SEMICOLON = {";", "；"}
_DASH = {"-", "—", "–", "－"}
_QUOTE = {'"', "'", "“", "”", "‘", "’", "「", "」", "『", "』"}
_PAREN = {"(", ")", "（", "）", "[", "]", "【", "】"}
_ELLIPSIS = {"…"}
_NAMED_PUNCT = (
    _COMMA | _PERIOD | _QUESTION | _EXCLAIM | _COLON | _SEMICOLON
    | _DASH | _QUOTE | _PAREN | _ELLIPSIS
)
_SENTENCE_END = _PERIOD | _QUESTION | _EXCLAIM | _ELLIPSIS


def is_cjk(char: str) -> bool:
    code = ord(char)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


@dataclass(frozen=True)
class Token:
    surface: str
    kind: str


@dataclass(frozen=True)
class TokenStream:
    """Ordered tokens whose surfaces concatenate back to the exact input."""

    tokens: tuple[Token, ...]

    @property
    def text(self) -> str:
        return "".join(t.surface for t in self.tokens)

    def words(self) -> list[str]:
        return [t.surface for t in self.tokens if t.kind == WORD]


def _count_kind(stream: TokenStream, kind: str) -> float:
    return float(sum(1 for t in stream.tokens if t.kind == kind))


def _count_punct(stream: TokenStream, chars: set[str]) -> float:
    return float(
        sum(1 for t in stream.tokens if t.kind == PUNCTUATION and t.surface in chars)
    )


def _count_other_punct(stream: TokenStream) -> float:
    return float(
        sum(
            1
            for t in stream.tokens
            if t.kind == PUNCTUATION and t.surface not in _NAMED_PUNCT
        )
    )


def _count_sentences(stream: TokenStream) -> float:
    """Number of maximal runs of sentence-ending punctuation tokens."""
    runs = 0
    in_run = False
    for token in stream.tokens:
        ending = token.kind == PUNCTUATION and token.surface in _SENTENCE_END
        if ending and not in_run:
            runs += 1
        in_run = ending
    return float(runs)


STRUCTURAL_METRICS: dict[str, Callable[[TokenStream], float]] = {
    "word_count": lambda s: _count_kind(s, WORD),
    "sentence_count": _count_sentences,
    "number_count": lambda s: _count_kind(s, NUMBER),
    "comma_count": lambda s: _count_punct(s, _COMMA),
    "period_count": lambda s: _count_punct(s, _PERIOD),
    "question_count": lambda s: _count_punct(s, _QUESTION),
    "exclaim_count": lambda s: _count_punct(s, _EXCLAIM),
    "colon_count": lambda s: _count_punct(s, _COLON),
    "semicolon_count": lambda s: _count_punct(s, _SEMICOLON),
    "dash_count": lambda s: _count_punct(s, _DASH),
    "quote_count": lambda s: _count_punct(s, _QUOTE),
    "paren_count": lambda s: _count_punct(s, _PAREN),
    "ellipsis_count": lambda s: _count_punct(s, _ELLIPSIS),
    "other_punct_count": _count_other_punct,
    "all_punct_count": lambda s: _count_kind(s, PUNCTUATION),
}


@dataclass(frozen=True)
class Category:
    category_id: str
    group: str
    structural: bool
    patterns: tuple[str, ...]


class Lexicon:
    """Immutable set of categories plus the matching machinery built from it."""

    def __init__(self, categories: Iterable[Category], duplicate_count: int = 0):
        self.categories: tuple[Category, ...] = tuple(categories)
        self.duplicate_count = duplicate_count
        seen: set[str] = set()
        for cat in self.categories:
            if cat.category_id in seen:
                raise DataValidationError(f"duplicate category_id {cat.category_id!r}")
            seen.add(cat.category_id)
        self._exact: dict[str, set[str]] = {}
        self._prefix: dict[str, set[str]] = {}
        vocabulary: set[str] = set()
        for cat in self.categories:
            if cat.structural:
                continue
            for pattern in cat.patterns:
                if pattern.endswith("*"):
                    stem = pattern[:-1]
                    self._prefix.setdefault(stem, set()).add(cat.category_id)
                else:
                    stem = pattern
                    self._exact.setdefault(stem, set()).add(cat.category_id)
                vocabulary.add(stem)
        self.vocabulary = frozenset(vocabulary)
        self._max_word_len = max((len(w) for w in vocabulary), default=0)

    @property
    def feature_ids(self) -> tuple[str, ...]:
        return tuple(cat.category_id for cat in self.categories)

    def group_counts(self) -> dict[str, int]:
        counts = {group: 0 for group in GROUPS}
        for cat in self.categories:
            counts[cat.group] += 1
        return counts

    def categories_for(self, token: str) -> set[str]:
        """Category ids whose patterns match the token (each at most once)."""
        matched = set(self._exact.get(token, ()))
        for i in range(len(token) + 1):
            hit = self._prefix.get(token[:i])
            if hit:
                matched.update(hit)
        return matched


def load_lexicon(path: str | Path) -> Lexicon:
    """Parse a lexicon CSV, deduplicating repeated (category, pattern) rows."""
    order: list[str] = []
    groups: dict[str, str] = {}
    structural: dict[str, bool] = {}
    patterns: dict[str, list[str]] = {}
    duplicates = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        required = {"category_id", "group", "structural", "pattern"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataValidationError(f"{path}: lexicon CSV needs columns {sorted(required)}")
        for row in reader:
            cid = row["category_id"].strip()
            group = row["group"].strip()
            is_structural = row["structural"].strip() == "1"
            pattern = row["pattern"].strip()
            if group not in GROUPS:
                raise DataValidationError(f"{path}: unknown group {group!r} for {cid!r}")
            if not pattern:
                raise DataValidationError(f"{path}: empty pattern for category {cid!r}")
            if cid not in groups:
                order.append(cid)
                groups[cid] = group
                structural[cid] = is_structural
                patterns[cid] = []
            elif groups[cid] != group or structural[cid] != is_structural:
                raise DataValidationError(f"{path}: inconsistent group/structural for {cid!r}")
            if is_structural and pattern not in STRUCTURAL_METRICS:
                raise DataValidationError(
                    f"{path}: unknown structural metric {pattern!r} for {cid!r}"
                )
            if pattern in patterns[cid]:
                duplicates += 1
                continue
            patterns[cid].append(pattern)
    categories = [
        Category(cid, groups[cid], structural[cid], tuple(patterns[cid])) for cid in order
    ]
    lexicon = Lexicon(categories, duplicate_count=duplicates)
    if duplicates:
        log.warning("%s: dropped %d duplicate pattern rows", path, duplicates)
    log.info("%s: loaded %d categories %s", path, len(categories), lexicon.group_counts())
    return lexicon


def build_word_bag(record: UserRecord, up_to: datetime, include_reposts: bool = True) -> str:
    """Concatenate status texts posted at or before ``up_to``, newline-joined."""
    texts = [
        s.text
        for s in record.statuses
        if s.posted_at <= up_to and (include_reposts or not s.is_repost)
    ]
    return "\n".join(texts)


def _char_class(char: str) -> str:
    if is_cjk(char):
        return "cjk"
    category = unicodedata.category(char)
    if category.startswith("P"):
        return "punct"
    if category == "Nd":
        return "digit"
    if char.isalpha():
        return "alpha"
    return "other"


def _segment_cjk(run: str, lexicon: Lexicon) -> list[str]:
    """Greedy forward maximum matching over the lexicon vocabulary."""
    words: list[str] = []
    i = 0
    n = len(run)
    limit = max(lexicon._max_word_len, 1)
    while i < n:
        length = min(limit, n - i)
        while length > 1 and run[i : i + length] not in lexicon.vocabulary:
            length -= 1
        words.append(run[i : i + length])
        i += length
    return words


def tokenize(text: str, lexicon: Lexicon, mode: str = MAX_MATCH) -> TokenStream:
    """Split text into a lossless token stream.

    max_match: CJK runs are segmented by greedy forward maximum matching
    against the lexicon vocabulary (unmatched characters become
    single-character words); Latin/digit runs become single word/number
    tokens. whitespace: word boundaries are Unicode whitespace only, for
    pre-segmented corpora. In both modes punctuation characters are
    individual punctuation tokens and whitespace survives as ``other``
    tokens, so surfaces always concatenate back to the input.
    """
    if mode not in TOKENIZER_MODES:
        raise DataValidationError(f"unknown tokenizer mode {mode!r}")

    def char_class(char: str) -> str:
        base = _char_class(char)
        if mode == WHITESPACE and base != "punct":
            if char.isspace():
                return "other"
            return "blob"
        return base

    tokens: list[Token] = []
    for cls, group in groupby(text, key=char_class):
        run = "".join(group)
        if cls == "punct":
            tokens.extend(Token(c, PUNCTUATION) for c in run)
        elif cls == "other":
            tokens.append(Token(run, OTHER))
        elif cls == "digit":
            tokens.append(Token(run, NUMBER))
        elif cls == "blob":
            tokens.append(Token(run, NUMBER if run.isdigit() else WORD))
        elif cls == "cjk":
            tokens.extend(Token(w, WORD) for w in _segment_cjk(run, lexicon))
        else:
            tokens.append(Token(run, WORD))
    return TokenStream(tuple(tokens))


@dataclass(frozen=True)
class LinguisticFeatures:
    """Named feature values in lexicon order plus the word total they used."""

    values: dict[str, float]
    word_total: int


def extract_linguistic(bag: str, lexicon: Lexicon, mode: str = MAX_MATCH) -> LinguisticFeatures:
    """Compute every lexicon feature over a word bag.

    Dictionary categories are (matching word tokens) / word_total, 0 when
    the bag holds no words; structural categories are token-stream counts.
    """
    stream = tokenize(bag, lexicon, mode)
    words = stream.words()
    word_total = len(words)
    hits = {cat.category_id: 0 for cat in lexicon.categories if not cat.structural}
    for word in words:
        for cid in lexicon.categories_for(word):
            hits[cid] += 1
    values: dict[str, float] = {}
    for cat in lexicon.categories:
        if cat.structural:
            values[cat.category_id] = STRUCTURAL_METRICS[cat.patterns[0]](stream)
        elif word_total == 0:
            values[cat.category_id] = 0.0
        else:
            values[cat.category_id] = hits[cat.category_id] / word_total
    return LinguisticFeatures(values=values, word_total=word_total)
