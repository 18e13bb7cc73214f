"""Answer metrics (exact match, token F1, macro-average F1), classifier
reports and latency statistics.

Metric normalization reuses the shared text normalizer and optionally strips
Portuguese articles, mirroring how English evaluation scripts drop a/an/the.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from statistics import mean, median
from typing import Iterable, Sequence

from .classifier import RouteLabel
from .errors import EmptyEvaluation, LengthMismatch
from .textprep import normalize_text, tokenize

PORTUGUESE_ARTICLES = frozenset({"o", "a", "os", "as", "um", "uma", "uns", "umas"})


@dataclass(frozen=True)
class MetricConfig:
    strip_articles: bool = True
    articles: frozenset[str] = PORTUGUESE_ARTICLES


@dataclass(frozen=True)
class EvalRecord:
    question_id: str
    prediction: str
    golds: tuple[str, ...]
    route: RouteLabel
    stage_timings: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.golds:
            raise ValueError("EvalRecord needs at least one gold answer")
        if any(t < 0 for t in self.stage_timings.values()):
            raise ValueError("stage timings must be nonnegative")


def metric_tokens(text: str, config: MetricConfig = MetricConfig()) -> list[str]:
    """Normalized tokens for metric comparison (articles optionally removed)."""
    tokens = tokenize(normalize_text(text))
    if config.strip_articles:
        tokens = [t for t in tokens if t not in config.articles]
    return tokens


def exact_match(prediction: str, golds: Sequence[str], config: MetricConfig = MetricConfig()) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise EmptyEvaluation("exact_match needs at least one gold answer")
    pred = metric_tokens(prediction, config)
    return int(any(pred == metric_tokens(g, config) for g in golds))


def token_f1(prediction: str, gold: str, config: MetricConfig = MetricConfig()) -> float:
    """Multiset token-overlap F1. Both empty -> 1.0; exactly one empty -> 0.0."""
    pred = metric_tokens(prediction, config)
    gold_tokens = metric_tokens(gold, config)
    if not pred and not gold_tokens:
        return 1.0
    if not pred or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def best_token_f1(prediction: str, golds: Sequence[str], config: MetricConfig = MetricConfig()) -> float:
    if not golds:
        raise EmptyEvaluation("needs at least one gold answer")
    return max(token_f1(prediction, g, config) for g in golds)


def macro_avg_f1(records: Sequence[EvalRecord], config: MetricConfig = MetricConfig()) -> float:
    """Unweighted mean over records of the per-record best F1 against its golds."""
    if not records:
        raise EmptyEvaluation("macro_avg_f1 over zero records")
    return mean(best_token_f1(r.prediction, r.golds, config) for r in records)


def classifier_report(
    predictions: Sequence[RouteLabel], golds: Sequence[RouteLabel]
) -> dict:
    """Accuracy, per-class precision/recall/F1 and confusion counts.

    Zero-division convention: a class never predicted has precision 0, a class
    absent from the golds has recall 0.
    """
    if len(predictions) != len(golds):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(golds)} golds")
    if not predictions:
        raise EmptyEvaluation("classifier_report over zero records")

    labels = list(RouteLabel)
    confusion = {g.value: {p.value: 0 for p in labels} for g in labels}
    for pred, gold in zip(predictions, golds):
        confusion[gold.value][pred.value] += 1

    per_class = {}
    correct = 0
    for label in labels:
        tp = confusion[label.value][label.value]
        fp = sum(confusion[g.value][label.value] for g in labels if g is not label)
        fn = sum(confusion[label.value][p.value] for p in labels if p is not label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[label.value] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": tp + fn,
        }
        correct += tp

    return {
        "accuracy": correct / len(golds),
        "per_class": per_class,
        "confusion": confusion,
    }


def _p95(values: list[float]) -> float:
    """Nearest-rank 95th percentile of a nonempty list."""
    ordered = sorted(values)
    rank = max(1, -(-len(ordered) * 95 // 100))  # ceil without math import
    return ordered[rank - 1]


def _summary(values: list[float]) -> dict:
    return {"mean": mean(values), "median": median(values), "p95": _p95(values)}


def latency_stats(records: Sequence[EvalRecord]) -> dict:
    """Per-route mean/median/p95 of total and per-stage durations.

    Routes with no records are omitted rather than zero-filled.
    """
    if not records:
        raise EmptyEvaluation("latency_stats over zero records")

    report: dict = {}
    for route in RouteLabel:
        routed = [r for r in records if r.route is route]
        if not routed:
            continue
        totals = [sum(r.stage_timings.values()) for r in routed]
        stage_names = sorted({name for r in routed for name in r.stage_timings})
        stages = {
            name: _summary([r.stage_timings[name] for r in routed if name in r.stage_timings])
            for name in stage_names
        }
        report[route.value] = {"count": len(routed), "total": _summary(totals), "stages": stages}
    return report
