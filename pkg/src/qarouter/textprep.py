"""Text normalization, tokenization and passage chunking.

Every other module (classifier features, retrieval terms, answer metrics)
goes through the single normalizer defined here, so "the same question with
or without a final question mark" is the same question everywhere.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import UnanswerableInput

# Whitespace-delimited tokens; hyphen and apostrophe survive only between
# letters/digits ("raio-x", "d'agua"), never at a word edge.
_FINAL_PUNCT = "?!.…"
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")

TokenSeq = list[str]


@dataclass(frozen=True)
class NormalizedText:
    """Cleaned question/answer text plus the rules that actually fired."""

    text: str
    applied_rules: tuple[str, ...] = ()


@dataclass(frozen=True)
class Passage:
    passage_id: str
    span: tuple[int, int]  # [start, end) indices into the document token sequence
    text: str

    @property
    def word_count(self) -> int:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class PassageSet:
    doc_id: str
    passages: tuple[Passage, ...]
    max_words: int = 100


def _is_word_char(ch: str) -> bool:
    return ch.isalpha() or ch.isdigit()


def _apply_whitelist(text: str) -> str:
    out = []
    for i, ch in enumerate(text):
        if _is_word_char(ch):
            out.append(ch)
        elif ch in "-'":
            prev_ok = i > 0 and _is_word_char(text[i - 1])
            next_ok = i + 1 < len(text) and _is_word_char(text[i + 1])
            out.append(ch if prev_ok and next_ok else " ")
        else:
            out.append(" ")
    return "".join(out)


def normalize_text(raw: str) -> NormalizedText:
    """Lowercase, drop final punctuation, whitelist characters, squeeze spaces.

    Unlike normalize_question this never raises; an input with no usable
    characters yields empty text (passages may legitimately be empty).
    """
    rules: list[str] = []
    text = raw

    lowered = text.lower()
    if lowered != text:
        rules.append("lowercase")
    text = lowered

    # U+2019 is the apostrophe most copy-pasted text carries.
    swapped = text.replace("’", "'")
    if swapped != text:
        rules.append("unify_apostrophe")
    text = swapped

    stripped = text.rstrip()
    while stripped and stripped[-1] in _FINAL_PUNCT:
        stripped = stripped[:-1].rstrip()
    if stripped != text:
        rules.append("strip_final_punct")
    text = stripped

    filtered = _apply_whitelist(text)
    if filtered != text:
        rules.append("whitelist")
    text = filtered

    collapsed = " ".join(text.split())
    if collapsed != text:
        rules.append("collapse_whitespace")
    text = collapsed

    return NormalizedText(text=text, applied_rules=tuple(rules))


def normalize_question(raw: str) -> NormalizedText:
    """normalize_text, but an empty result is an error for a question."""
    normalized = normalize_text(raw)
    if not normalized.text:
        raise UnanswerableInput(f"question is empty after normalization: {raw!r}")
    return normalized


def tokenize(text: NormalizedText | str) -> TokenSeq:
    """Whitespace split of normalized text. Empty text gives an empty list."""
    if isinstance(text, NormalizedText):
        text = text.text
    return text.split()


def split_sentences(raw: str) -> list[str]:
    """Split on `.`, `?`, `!` followed by whitespace (or end of text).

    Deliberately abbreviation-blind: "Dr. Silva" splits after "Dr.".
    Joining the pieces with single spaces reproduces the input modulo
    whitespace.
    """
    raw = raw.strip()
    if not raw:
        return []
    return [piece for piece in _SENTENCE_SPLIT.split(raw) if piece]


def chunk_document(doc_id: str, raw: str, max_words: int = 100) -> PassageSet:
    """Pack whole sentences greedily into passages of at most max_words words.

    A single sentence longer than max_words is hard-split into max_words-sized
    pieces; everything else breaks only at sentence boundaries. Words are
    whitespace-delimited tokens of the raw text, so concatenating the passages'
    token spans reproduces the document token sequence exactly.
    """
    if max_words < 1:
        raise ValueError(f"max_words must be >= 1, got {max_words}")

    passages: list[Passage] = []
    current: list[str] = []
    start = 0  # token offset of the open passage
    cursor = 0  # token offset just past everything consumed so far

    def flush() -> None:
        nonlocal current, start
        if current:
            pid = f"{doc_id}:{len(passages):04d}"
            passages.append(Passage(pid, (start, start + len(current)), " ".join(current)))
            start += len(current)
            current = []

    for sentence in split_sentences(raw):
        words = sentence.split()
        cursor += len(words)
        if len(words) > max_words:
            flush()
            while len(words) > max_words:
                head, words = words[:max_words], words[max_words:]
                pid = f"{doc_id}:{len(passages):04d}"
                passages.append(Passage(pid, (start, start + len(head)), " ".join(head)))
                start += len(head)
            current = words
        elif len(current) + len(words) <= max_words:
            current.extend(words)
        else:
            flush()
            current = words
    flush()

    return PassageSet(doc_id=doc_id, passages=tuple(passages), max_words=max_words)


def load_corpus_jsonl(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (doc_id, text) from a JSON Lines file of {"id":..., "text":...}."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            try:
                yield str(record["id"]), str(record["text"])
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing field {exc}") from None


def load_corpus_dir(path: str | Path) -> Iterator[tuple[str, str]]:
    """Yield (doc_id, text) for every *.txt file; doc id is the filename stem."""
    for txt in sorted(Path(path).glob("*.txt")):
        yield txt.stem, txt.read_text(encoding="utf-8")


def chunk_corpus(docs: Iterable[tuple[str, str]], max_words: int = 100) -> list[PassageSet]:
    return [chunk_document(doc_id, text, max_words) for doc_id, text in docs]
