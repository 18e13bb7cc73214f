"""End-to-end orchestration: classify, route, answer, time every stage.

Batch answering never throws: each failure is captured in its record with
the stage it happened in, so one bad question cannot kill an evaluation run.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import evalkit
from .classifier import ClassifierBackendRef, RouteLabel, classify_route, load_model
from .errors import EmptyBatch, QaRouterError, StageError
from .ipcbridge import open_spool
from .nl2sql import Nl2SqlBackendRef, Nl2SqlRequest, answer_sql_question, load_rules, load_synonyms
from .reader import ReaderBackendRef, assemble_reader_input, read
from .retriever import load_index, top_k
from .sqlengine import load_csv_database
from .textprep import normalize_question

SPOOL_ENV_VAR = "QA_ROUTER_SPOOL"
CONFIG_ENV_VAR = "QA_ROUTER_CONFIG"
DEFAULT_CONFIG_NAME = "qa-router.json"
DEFAULT_TIMEOUTS = {"classifier": 10.0, "reader": 30.0, "nl2sql": 30.0}


@dataclass(frozen=True)
class RouterConfig:
    """File-level configuration; paths are resolved lazily per route."""

    classifier: dict = field(default_factory=lambda: {"kind": "builtin", "model": None})
    reader: dict = field(default_factory=lambda: {"kind": "builtin"})
    nl2sql: dict = field(default_factory=lambda: {"kind": "builtin"})
    k: int = 5
    index_path: str | None = None
    database_path: str | None = None
    db_id: str = "default"
    spool_root: str | None = None
    timeouts: dict = field(default_factory=lambda: dict(DEFAULT_TIMEOUTS))

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


def load_config(path: str | Path) -> RouterConfig:
    """Read a config file; QA_ROUTER_SPOOL overrides the spool root."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return config_from_dict(raw, base_dir=Path(path).parent)


def config_from_dict(raw: dict, base_dir: Path | None = None) -> RouterConfig:
    def resolve(value):
        if value is None or base_dir is None:
            return value
        candidate = Path(value)
        return str(candidate if candidate.is_absolute() else base_dir / candidate)

    timeouts = dict(DEFAULT_TIMEOUTS)
    timeouts.update(raw.get("timeouts", {}))
    spool_root = os.environ.get(SPOOL_ENV_VAR) or resolve(raw.get("spool"))

    classifier = dict(raw.get("classifier", {"kind": "builtin"}))
    if classifier.get("model"):
        classifier["model"] = resolve(classifier["model"])
    nl2sql = dict(raw.get("nl2sql", {"kind": "builtin"}))
    for key in ("rules", "synonyms"):
        if nl2sql.get(key):
            nl2sql[key] = resolve(nl2sql[key])

    config = RouterConfig(
        classifier=classifier,
        reader=dict(raw.get("reader", {"kind": "builtin"})),
        nl2sql=nl2sql,
        k=raw.get("k", 5),
        index_path=resolve(raw.get("index")),
        database_path=resolve(raw.get("database")),
        db_id=raw.get("db_id", "default"),
        spool_root=spool_root,
        timeouts=timeouts,
    )
    validate_config_paths(config)
    return config


def validate_config_paths(config: RouterConfig) -> None:
    """Every configured path must exist before any question is answered."""
    referenced = {
        "classifier model": config.classifier.get("model"),
        "index": config.index_path,
        "database": config.database_path,
        "spool root": config.spool_root,
        "nl2sql rules": config.nl2sql.get("rules"),
        "nl2sql synonyms": config.nl2sql.get("synonyms"),
    }
    for what, path in referenced.items():
        if path is not None and not Path(path).exists():
            raise FileNotFoundError(f"configured {what} does not exist: {path}")


@dataclass
class AnswerRecord:
    question: str
    question_normalized: str | None = None
    route: str | None = None
    answer: str | None = None
    provenance: list[str] | str | None = None
    stage_timings: dict[str, float] = field(default_factory=dict)
    error: dict | None = None

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "question_normalized": self.question_normalized,
            "route": self.route,
            "answer": self.answer,
            "provenance": self.provenance,
            "stage_timings": self.stage_timings,
            "error": self.error,
        }


def _format_result_rows(rows) -> str:
    return "; ".join(", ".join("" if v is None else str(v) for v in row) for row in rows)


class Router:
    """Answers questions per the configured backends, loading the index,
    database and model on first use of the route that needs them."""

    def __init__(self, config: RouterConfig, index=None, database=None, model=None):
        self.config = config
        self._index = index
        self._database = database
        self._model = model
        self._spool = None
        self._classifier_backend = None
        self._reader_backend = None
        self._nl2sql_backend = None

    # --- lazy resources ---

    def _spool_handle(self):
        if self._spool is None:
            if not self.config.spool_root:
                raise QaRouterError("external backend configured but no spool root set")
            self._spool = open_spool(self.config.spool_root)
        return self._spool

    def index(self):
        if self._index is None:
            if not self.config.index_path:
                raise QaRouterError("factual route needs an index (config key 'index')")
            self._index = load_index(self.config.index_path)
        return self._index

    def database(self):
        if self._database is None:
            if not self.config.database_path:
                raise QaRouterError("sql route needs a database (config key 'database')")
            root = Path(self.config.database_path)
            self._database = load_csv_database(root / "schema.json", root)
        return self._database

    def classifier_backend(self) -> ClassifierBackendRef:
        if self._classifier_backend is None:
            spec = self.config.classifier
            if spec.get("kind") == "external":
                self._classifier_backend = ClassifierBackendRef(
                    "external", spool=self._spool_handle(),
                    timeout=self.config.timeouts["classifier"],
                )
            else:
                model = self._model
                if model is None:
                    if not spec.get("model"):
                        raise QaRouterError("builtin classifier needs a model path")
                    model = load_model(spec["model"])
                self._classifier_backend = ClassifierBackendRef("builtin", model=model)
        return self._classifier_backend

    def reader_backend(self) -> ReaderBackendRef:
        if self._reader_backend is None:
            if self.config.reader.get("kind") == "external":
                self._reader_backend = ReaderBackendRef(
                    "external", spool=self._spool_handle(),
                    timeout=self.config.timeouts["reader"],
                )
            else:
                self._reader_backend = ReaderBackendRef("builtin")
        return self._reader_backend

    def nl2sql_backend(self) -> Nl2SqlBackendRef:
        if self._nl2sql_backend is None:
            spec = self.config.nl2sql
            if spec.get("kind") == "external":
                self._nl2sql_backend = Nl2SqlBackendRef(
                    "external", spool=self._spool_handle(),
                    timeout=self.config.timeouts["nl2sql"],
                )
            else:
                rules = load_rules(spec.get("rules")) if spec.get("rules") else None
                synonyms = load_synonyms(spec.get("synonyms")) if spec.get("synonyms") else None
                self._nl2sql_backend = Nl2SqlBackendRef("builtin", rules=rules, synonyms=synonyms)
        return self._nl2sql_backend

    # --- answering ---

    def answer(self, question: str) -> AnswerRecord:
        """Route and answer one question; failures land in the record."""
        record = AnswerRecord(question=question)

        def timed(stage, fn):
            started = time.perf_counter()
            try:
                return fn()
            finally:
                record.stage_timings[stage] = time.perf_counter() - started

        def capture(stage, exc):
            if isinstance(exc, StageError):
                stage, exc = exc.stage, exc.cause
            record.error = {
                "stage": stage,
                "type": type(exc).__name__,
                "message": str(exc),
            }

        try:
            backend = self.classifier_backend()
            record.question_normalized = normalize_question(question).text
            label = timed("classify", lambda: classify_route(backend, question))
        except Exception as exc:
            capture("classify", exc)
            return record
        record.route = label.value

        if label is RouteLabel.FACTUAL:
            stage = "retrieve"
            try:
                index = self.index()  # resource loading stays outside the timers
                passages = timed("retrieve", lambda: top_k(index, question, self.config.k))
                record.provenance = [p.passage_id for p in passages]
                stage = "read"
                reader_backend = self.reader_backend()
                answer = timed(
                    "read",
                    lambda: read(reader_backend, assemble_reader_input(question, passages)),
                )
            except Exception as exc:
                capture(stage, exc)
                return record
            record.answer = answer.text
        else:
            try:
                database = self.database()
                backend = self.nl2sql_backend()
                request = Nl2SqlRequest(
                    question=record.question_normalized,
                    schema=database.schema,
                    db_id=self.config.db_id,
                )
                result, sql = timed(
                    "nl2sql", lambda: answer_sql_question(backend, request, database)
                )
            except Exception as exc:
                capture("nl2sql", exc)
                return record
            record.provenance = sql
            record.answer = _format_result_rows(result.rows)
        return record

    def answer_batch(self, questions: list) -> tuple[list[AnswerRecord], dict]:
        """Answer a batch (strings or {"id","question","golds","route"} dicts);
        returns the records plus an aggregate report."""
        if not questions:
            raise EmptyBatch("answer_batch needs at least one question")

        items = [
            {"id": str(i), "question": q} if isinstance(q, str) else q
            for i, q in enumerate(questions)
        ]
        records = [self.answer(item.get("question", "")) for item in items]
        return records, build_batch_report(items, records)


def build_batch_report(
    items: list[dict],
    records: list[AnswerRecord],
    metric_config: evalkit.MetricConfig = evalkit.MetricConfig(),
) -> dict:
    report: dict = {
        "count": len(records),
        "routes": {},
        "errors": sum(1 for r in records if r.error is not None),
    }
    for record in records:
        if record.route:
            report["routes"][record.route] = report["routes"].get(record.route, 0) + 1

    gold_routes = [(i, r) for (i, r) in zip(items, records) if i.get("route")]
    if gold_routes:
        correct = sum(1 for item, record in gold_routes if record.route == item["route"])
        report["routing_accuracy"] = correct / len(gold_routes)

    eval_records = []
    for item, record in zip(items, records):
        golds = item.get("golds")
        if golds and record.route:
            eval_records.append(
                evalkit.EvalRecord(
                    question_id=str(item.get("id", "")),
                    prediction=record.answer or "",
                    golds=tuple(golds),
                    route=RouteLabel(record.route),
                    stage_timings=record.stage_timings,
                )
            )
    if eval_records:
        report["exact_match"] = sum(
            evalkit.exact_match(r.prediction, r.golds, metric_config) for r in eval_records
        ) / len(eval_records)
        report["macro_avg_f1"] = evalkit.macro_avg_f1(eval_records, metric_config)

    timing_records = [
        evalkit.EvalRecord(
            question_id=str(item.get("id", "")),
            prediction=record.answer or "",
            golds=("-",),
            route=RouteLabel(record.route),
            stage_timings=record.stage_timings,
        )
        for item, record in zip(items, records)
        if record.route
    ]
    if timing_records:
        report["latency"] = evalkit.latency_stats(timing_records)
    return report
