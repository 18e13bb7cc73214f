"""Turns a question plus retrieved passages into an answer.

The built-in reader is extractive: it returns the passage sentence with the
highest token-overlap F1 against the question. A generative model can be
plugged in over the file spool instead.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from . import ipcbridge
from .errors import NoAnswer
from .ipcbridge import SpoolDirs
from .retriever import ScoredPassage
from .textprep import normalize_text, split_sentences, tokenize

# Fixed marker between question and each passage; part of the wire contract
# for external readers (see docs/ipc-protocol.md).
PASSAGE_SEPARATOR = "\n### passagem ###\n"


@dataclass(frozen=True)
class ReaderPassage:
    rank: int
    passage_id: str
    text: str


@dataclass(frozen=True)
class ReaderInput:
    question: str  # normalized
    passages: tuple[ReaderPassage, ...]
    separator: str = PASSAGE_SEPARATOR

    def __post_init__(self):
        ranks = [p.rank for p in self.passages]
        if ranks != sorted(ranks) or len(set(ranks)) != len(ranks):
            raise ValueError(f"passages must carry strictly ascending ranks, got {ranks}")

    def render(self) -> str:
        """Byte-stable layout sent to external readers."""
        parts = [self.question]
        for passage in self.passages:
            parts.append(self.separator)
            parts.append(passage.text)
        return "".join(parts)


@dataclass(frozen=True)
class ReaderAnswer:
    text: str
    provenance: str  # passage id (builtin) or backend tag (external)
    score: float


def assemble_reader_input(question: str, scored_passages: list[ScoredPassage]) -> ReaderInput:
    """Question first, then passages in rank order, each behind the separator."""
    ordered = sorted(scored_passages, key=lambda p: p.rank)
    return ReaderInput(
        question=normalize_text(question).text,
        passages=tuple(ReaderPassage(p.rank, p.passage_id, p.text) for p in ordered),
    )


def _overlap_f1(question_tokens: Counter, sentence: str) -> float:
    tokens = Counter(tokenize(normalize_text(sentence)))
    overlap = sum((question_tokens & tokens).values())
    if overlap == 0 or not tokens or not question_tokens:
        return 0.0
    precision = overlap / sum(tokens.values())
    recall = overlap / sum(question_tokens.values())
    return 2 * precision * recall / (precision + recall)


def extractive_answer(reader_input: ReaderInput) -> ReaderAnswer:
    """Best-overlapping sentence across passages; ties go to the earlier
    rank, then the earlier sentence. Raises NoAnswer on zero overlap."""
    question_tokens = Counter(tokenize(normalize_text(reader_input.question)))
    best: tuple[float, int, int] | None = None  # (f1, rank_pos, sentence_pos), max by f1
    best_answer: ReaderAnswer | None = None

    for rank_pos, passage in enumerate(reader_input.passages):
        for sentence_pos, sentence in enumerate(split_sentences(passage.text)):
            f1 = _overlap_f1(question_tokens, sentence)
            if f1 <= 0:
                continue
            key = (-f1, rank_pos, sentence_pos)
            if best is None or key < best:
                best = key
                best_answer = ReaderAnswer(sentence, passage.passage_id, f1)

    if best_answer is None:
        raise NoAnswer(f"no passage shares a token with {reader_input.question!r}")
    return best_answer


@dataclass(frozen=True)
class ReaderBackendRef:
    kind: str  # "builtin" | "external"
    spool: SpoolDirs | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind == "external" and self.spool is None:
            raise ValueError("external reader backend needs a spool channel")
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown backend kind {self.kind!r}")


def read(backend: ReaderBackendRef, reader_input: ReaderInput) -> ReaderAnswer:
    """Answer through the configured reader backend."""
    if backend.kind == "builtin":
        return extractive_answer(reader_input)
    payload = ipcbridge.request_round_trip(
        backend.spool, "reader", {"input": reader_input.render()}, backend.timeout
    )
    return ReaderAnswer(text=payload["answer"], provenance="external", score=float(payload["score"]))
