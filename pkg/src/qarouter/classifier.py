"""Question routing: factual vs database-directed.

The built-in model is a Bernoulli naive Bayes over presence/absence of
vocabulary unigrams (one feature per distinct word, never counting repeats),
with Laplace smoothing. An external neural classifier can be plugged in
through the file spool; it only has to answer the classifier wire schema.
"""

from __future__ import annotations

import csv
import json
import math
import random
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from statistics import mean, stdev
from typing import Sequence

from . import ipcbridge
from .errors import CorpusTooSmall, TrainingDataError
from .ipcbridge import SpoolDirs
from .textprep import normalize_question, tokenize

MODEL_FORMAT = "qa-router-nb-model"
MODEL_VERSION = 1


class RouteLabel(Enum):
    FACTUAL = "factual"
    SQL = "sql"


@dataclass(frozen=True)
class LabeledQuestion:
    question: str
    label: RouteLabel
    source: str | None = None


@dataclass(frozen=True)
class NaiveBayesModel:
    """Smoothed Bernoulli estimates, all in log space.

    Likelihood arrays are aligned with the sorted vocabulary; absent_mass
    caches the per-label sum of log P(term absent) so prediction only touches
    the terms actually present in a question.
    """

    vocabulary: tuple[str, ...]
    log_prior: dict[RouteLabel, float]
    log_likelihood_present: dict[RouteLabel, tuple[float, ...]]
    log_likelihood_absent: dict[RouteLabel, tuple[float, ...]]
    smoothing_alpha: float = 1.0
    term_index: dict[str, int] = field(repr=False, default_factory=dict)
    absent_mass: dict[RouteLabel, float] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if not self.term_index:
            object.__setattr__(
                self, "term_index", {t: i for i, t in enumerate(self.vocabulary)}
            )
        if not self.absent_mass:
            object.__setattr__(
                self,
                "absent_mass",
                {c: sum(self.log_likelihood_absent[c]) for c in self.log_prior},
            )


def question_features(question: str) -> set[str]:
    """The distinct unigrams of a normalized question (presence features)."""
    return set(tokenize(normalize_question(question)))


def train_nb(corpus: Sequence[LabeledQuestion], smoothing_alpha: float = 1.0) -> NaiveBayesModel:
    """Fit the Bernoulli model. Needs at least one example of each label."""
    if smoothing_alpha <= 0:
        raise ValueError(f"smoothing_alpha must be positive, got {smoothing_alpha}")

    features: list[tuple[RouteLabel, set[str]]] = []
    for row, example in enumerate(corpus):
        try:
            tokens = question_features(example.question)
        except Exception as exc:
            raise TrainingDataError(f"row {row}: unusable question {example.question!r}: {exc}") from exc
        features.append((example.label, tokens))

    counts = {label: 0 for label in RouteLabel}
    for label, _ in features:
        counts[label] += 1
    missing = [label.value for label, n in counts.items() if n == 0]
    if missing or not features:
        raise TrainingDataError(f"corpus must contain every label; missing: {missing or 'all'}")

    vocabulary = tuple(sorted({t for _, tokens in features for t in tokens}))
    doc_freq = {label: [0] * len(vocabulary) for label in RouteLabel}
    index = {t: i for i, t in enumerate(vocabulary)}
    for label, tokens in features:
        for t in tokens:
            doc_freq[label][index[t]] += 1

    total = len(features)
    log_prior = {label: math.log(counts[label] / total) for label in RouteLabel}
    present = {}
    absent = {}
    for label in RouteLabel:
        denom = counts[label] + 2 * smoothing_alpha
        present[label] = tuple(
            math.log((df + smoothing_alpha) / denom) for df in doc_freq[label]
        )
        absent[label] = tuple(
            math.log((counts[label] - df + smoothing_alpha) / denom) for df in doc_freq[label]
        )

    return NaiveBayesModel(
        vocabulary=vocabulary,
        log_prior=log_prior,
        log_likelihood_present=present,
        log_likelihood_absent=absent,
        smoothing_alpha=smoothing_alpha,
    )


def predict(model: NaiveBayesModel, question: str) -> tuple[RouteLabel, dict[RouteLabel, float]]:
    """Label plus normalized per-label log-posteriors.

    Out-of-vocabulary tokens are ignored; an exact score tie goes to FACTUAL
    (the factual path degrades more gracefully than a wrong SQL parse).
    """
    tokens = question_features(question)
    scores = {}
    for label in model.log_prior:
        score = model.log_prior[label] + model.absent_mass[label]
        present = model.log_likelihood_present[label]
        absent = model.log_likelihood_absent[label]
        for t in tokens:
            i = model.term_index.get(t)
            if i is not None:
                score += present[i] - absent[i]
        scores[label] = score

    label = RouteLabel.SQL if scores[RouteLabel.SQL] > scores[RouteLabel.FACTUAL] else RouteLabel.FACTUAL
    log_norm = _logsumexp(list(scores.values()))
    posteriors = {c: s - log_norm for c, s in scores.items()}
    return label, posteriors


def _logsumexp(values: list[float]) -> float:
    top = max(values)
    return top + math.log(sum(math.exp(v - top) for v in values))


@dataclass(frozen=True)
class ClassifierBackendRef:
    """Builtin carries a trained model; external carries a spool channel."""

    kind: str  # "builtin" | "external"
    model: NaiveBayesModel | None = None
    spool: SpoolDirs | None = None
    timeout: float = 10.0

    def __post_init__(self):
        if self.kind == "builtin" and self.model is None:
            raise ValueError("builtin classifier backend needs a model")
        if self.kind == "external" and self.spool is None:
            raise ValueError("external classifier backend needs a spool channel")
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown backend kind {self.kind!r}")


def classify_route(backend: ClassifierBackendRef, question: str) -> RouteLabel:
    """Route one question through the configured classifier backend."""
    if backend.kind == "builtin":
        label, _ = predict(backend.model, question)
        return label
    payload = ipcbridge.request_round_trip(
        backend.spool, "classifier", {"question": question}, backend.timeout
    )
    return RouteLabel(payload["label"])


@dataclass(frozen=True)
class CrossValResult:
    fold_f1: tuple[float, ...]
    mean: float
    std: float
    skipped_folds: int = 0


def _binary_f1(predictions: Sequence[RouteLabel], golds: Sequence[RouteLabel]) -> float:
    """F1 with SQL as the positive class."""
    tp = sum(1 for p, g in zip(predictions, golds) if p is RouteLabel.SQL and g is RouteLabel.SQL)
    fp = sum(1 for p, g in zip(predictions, golds) if p is RouteLabel.SQL and g is not RouteLabel.SQL)
    fn = sum(1 for p, g in zip(predictions, golds) if p is not RouteLabel.SQL and g is RouteLabel.SQL)
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def cross_validate(
    corpus: Sequence[LabeledQuestion],
    k: int = 10,
    seed: int = 0,
    smoothing_alpha: float = 1.0,
) -> CrossValResult:
    """Stratified k-fold cross-validation of the built-in model.

    Folds come from a seeded shuffle within each label group, dealt
    round-robin, so identical corpus and seed give identical folds. A fold
    whose training split lacks a class is skipped with a warning.
    """
    if k < 2:
        raise CorpusTooSmall(f"need k >= 2 folds, got {k}")
    if len(corpus) < k:
        raise CorpusTooSmall(f"{len(corpus)} examples cannot fill {k} folds")

    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for label in RouteLabel:
        group = [i for i, ex in enumerate(corpus) if ex.label is label]
        rng.shuffle(group)
        for pos, idx in enumerate(group):
            folds[pos % k].append(idx)

    fold_f1 = []
    skipped = 0
    for f, test_idx in enumerate(folds):
        train = [corpus[i] for j, fold in enumerate(folds) if j != f for i in fold]
        test = [corpus[i] for i in test_idx]
        labels_in_train = {ex.label for ex in train}
        if len(labels_in_train) < len(RouteLabel) or not test:
            warnings.warn(f"fold {f} skipped: training split lacks a class or fold is empty")
            skipped += 1
            continue
        model = train_nb(train, smoothing_alpha)
        predictions = [predict(model, ex.question)[0] for ex in test]
        fold_f1.append(_binary_f1(predictions, [ex.label for ex in test]))

    if not fold_f1:
        raise TrainingDataError("no usable folds: every training split lacked a class")
    std = stdev(fold_f1) if len(fold_f1) > 1 else 0.0
    return CrossValResult(tuple(fold_f1), mean(fold_f1), std, skipped)


def load_labeled_csv(path: str | Path) -> list[LabeledQuestion]:
    """Read training data: UTF-8 CSV with header question,label,source."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["question", "label", "source"]
        if reader.fieldnames != expected:
            raise TrainingDataError(f"expected header {expected}, got {reader.fieldnames}")
        corpus = []
        for lineno, row in enumerate(reader, start=2):
            try:
                label = RouteLabel(row["label"])
            except ValueError:
                raise TrainingDataError(
                    f"{path} line {lineno}: label must be factual or sql, got {row['label']!r}"
                ) from None
            corpus.append(LabeledQuestion(row["question"], label, row["source"] or None))
    return corpus


def save_model(model: NaiveBayesModel, path: str | Path) -> None:
    document = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "smoothing_alpha": model.smoothing_alpha,
        "vocabulary": list(model.vocabulary),
        "log_prior": {c.value: v for c, v in model.log_prior.items()},
        "log_likelihood_present": {
            c.value: list(v) for c, v in model.log_likelihood_present.items()
        },
        "log_likelihood_absent": {
            c.value: list(v) for c, v in model.log_likelihood_absent.items()
        },
    }
    Path(path).write_text(json.dumps(document, ensure_ascii=False), encoding="utf-8")


def load_model(path: str | Path) -> NaiveBayesModel:
    document = json.loads(Path(path).read_text(encoding="utf-8"))
    if document.get("format") != MODEL_FORMAT or document.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} v{MODEL_VERSION} document")
    return NaiveBayesModel(
        vocabulary=tuple(document["vocabulary"]),
        log_prior={RouteLabel(c): v for c, v in document["log_prior"].items()},
        log_likelihood_present={
            RouteLabel(c): tuple(v) for c, v in document["log_likelihood_present"].items()
        },
        log_likelihood_absent={
            RouteLabel(c): tuple(v) for c, v in document["log_likelihood_absent"].items()
        },
        smoothing_alpha=document["smoothing_alpha"],
    )
