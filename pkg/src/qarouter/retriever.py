"""BM25 retrieval over an inverted index of chunked passages.

Passages are indexed on normalized tokens; the raw text is kept for display
and for the reader. Query terms are deduplicated (set semantics), so a
stuttered question scores the same as a clean one.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DuplicatePassageId, UnknownPassageId
from .textprep import PassageSet, TokenSeq, normalize_question, normalize_text, tokenize

INDEX_FORMAT = "qa-router-bm25-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.2
    b: float = 0.75
    idf_floor: bool = True  # ln(1 + ...) variant; off = classic RSJ idf

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be nonnegative, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass(frozen=True)
class ScoredPassage:
    passage_id: str
    score: float
    rank: int
    text: str = ""


@dataclass
class InvertedIndex:
    postings: dict[str, list[tuple[str, int]]]
    doc_freq: dict[str, int]
    passage_lengths: dict[str, int]
    avg_length: float
    passage_store: dict[str, str]
    params: Bm25Params


def build_index(passage_sets: Iterable[PassageSet], params: Bm25Params = Bm25Params()) -> InvertedIndex:
    """Index every passage of every document. Passage ids must be unique."""
    pairs = (
        (passage.passage_id, passage.text)
        for passage_set in passage_sets
        for passage in passage_set.passages
    )
    return build_index_from_pairs(pairs, params)


def build_index_from_pairs(
    pairs: Iterable[tuple[str, str]], params: Bm25Params = Bm25Params()
) -> InvertedIndex:
    """Index (passage_id, raw_text) pairs directly (CLI and snapshot path)."""
    postings: dict[str, list[tuple[str, int]]] = {}
    lengths: dict[str, int] = {}
    store: dict[str, str] = {}

    for passage_id, text in pairs:
        if passage_id in store:
            raise DuplicatePassageId(passage_id)
        tokens = tokenize(normalize_text(text))
        store[passage_id] = text
        lengths[passage_id] = len(tokens)
        for term, tf in Counter(tokens).items():
            postings.setdefault(term, []).append((passage_id, tf))

    for term in postings:
        postings[term].sort()
    doc_freq = {term: len(entries) for term, entries in postings.items()}
    avg_length = sum(lengths.values()) / len(lengths) if lengths else 0.0
    return InvertedIndex(postings, doc_freq, lengths, avg_length, store, params)


def _idf(index: InvertedIndex, term: str) -> float:
    df = index.doc_freq.get(term, 0)
    n = len(index.passage_store)
    if df == 0:
        return 0.0
    if index.params.idf_floor:
        return math.log(1 + (n - df + 0.5) / (df + 0.5))
    return math.log((n - df + 0.5) / (df + 0.5))


def _term_score(index: InvertedIndex, term: str, tf: int, length: int) -> float:
    k1, b = index.params.k1, index.params.b
    norm = 1 - b + b * (length / index.avg_length) if index.avg_length > 0 else 1.0
    return _idf(index, term) * tf * (k1 + 1) / (tf + k1 * norm)


def bm25_score(index: InvertedIndex, query: TokenSeq, passage_id: str) -> float:
    """Okapi BM25 score of one passage; distinct query terms count once."""
    if passage_id not in index.passage_store:
        raise UnknownPassageId(passage_id)
    length = index.passage_lengths[passage_id]
    score = 0.0
    for term in sorted(set(query)):  # sorted: float sums stay run-to-run stable
        entries = index.postings.get(term)
        if not entries:
            continue
        tf = next((f for pid, f in entries if pid == passage_id), 0)
        if tf:
            score += _term_score(index, term, tf, length)
    return score


def top_k(index: InvertedIndex, question: str, k: int = 5) -> list[ScoredPassage]:
    """The k best-scoring passages for a question, non-matching ones excluded.

    Order: score descending, then passage id ascending. Fewer than k matches
    give fewer than k results.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = sorted(set(tokenize(normalize_question(question))))
    scores: dict[str, float] = {}
    for term in terms:
        for passage_id, tf in index.postings.get(term, ()):
            contribution = _term_score(index, term, tf, index.passage_lengths[passage_id])
            scores[passage_id] = scores.get(passage_id, 0.0) + contribution

    ordered = sorted(
        ((pid, s) for pid, s in scores.items() if s > 0),
        key=lambda item: (-item[1], item[0]),
    )[:k]
    return [
        ScoredPassage(pid, score, rank, index.passage_store[pid])
        for rank, (pid, score) in enumerate(ordered, start=1)
    ]


def index_stats(index: InvertedIndex) -> dict:
    return {
        "passages": len(index.passage_store),
        "terms": len(index.postings),
        "avg_length": index.avg_length,
        "params": {
            "k1": index.params.k1,
            "b": index.params.b,
            "idf_floor": index.params.idf_floor,
        },
    }


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Versioned JSON snapshot; derived fields are rebuilt on load."""
    document = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "params": {
            "k1": index.params.k1,
            "b": index.params.b,
            "idf_floor": index.params.idf_floor,
        },
        "passages": [
            {"id": pid, "text": index.passage_store[pid], "length": index.passage_lengths[pid]}
            for pid in sorted(index.passage_store)
        ],
        "postings": {term: [[pid, tf] for pid, tf in entries] for term, entries in sorted(index.postings.items())},
    }
    Path(path).write_text(json.dumps(document, ensure_ascii=False), encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if document.get("format") != INDEX_FORMAT or document.get("version") != INDEX_VERSION:
        raise ValueError(f"{path}: not a {INDEX_FORMAT} v{INDEX_VERSION} snapshot")
    params = Bm25Params(**document["params"])
    lengths = {p["id"]: p["length"] for p in document["passages"]}
    store = {p["id"]: p["text"] for p in document["passages"]}
    postings = {
        term: [(pid, tf) for pid, tf in entries] for term, entries in document["postings"].items()
    }
    doc_freq = {term: len(entries) for term, entries in postings.items()}
    avg_length = sum(lengths.values()) / len(lengths) if lengths else 0.0
    return InvertedIndex(postings, doc_freq, lengths, avg_length, store, params)
