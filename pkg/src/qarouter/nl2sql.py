"""Natural-language question -> SQL text, grounded on a database schema.

The built-in translator is rule-based: an ordered rule table (JSON asset)
with trigger phrases and slot bindings, grounded through a synonym table
mapping Portuguese surface forms to schema names. An external neural
translator can serve the same role over the file spool. Either way, no SQL
reaches execution without passing the subset parser first.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from . import ipcbridge
from .errors import MalformedBackendResponse, NoRuleMatched, StageError
from .ipcbridge import SpoolDirs
from .sqlengine import (
    Database,
    ResultTable,
    Schema,
    SqlEngineError,
    execute,
    parse_sql,
    schema_to_dict,
    validate,
)
from .textprep import normalize_question, tokenize

RULES_FORMAT = "qa-router-nl2sql-rules"
_NUMBER_TOKEN = re.compile(r"\d+(\.\d+)?$")
_SKIP_BEFORE_VALUE = {"de", "do", "da", "dos", "das", "igual", "a", "e", "com"}
_QUANTIFIER_SIGN = {"mais": 1, "maior": 1, "menos": -1, "menor": -1}

# ordered longest-first so "menos de" wins over any shorter overlap
_COMPARISON_CUES = (
    ("menores que", "<"),
    ("maiores que", ">"),
    ("menor que", "<"),
    ("maior que", ">"),
    ("menos de", "<"),
    ("abaixo de", "<"),
    ("mais de", ">"),
    ("acima de", ">"),
    ("pelo menos", ">="),
    ("no mínimo", ">="),
    ("no minimo", ">="),
    ("no máximo", "<="),
    ("no maximo", "<="),
    ("diferente de", "!="),
    ("igual a", "="),
)


@dataclass(frozen=True)
class Nl2SqlRequest:
    question: str
    schema: Schema
    db_id: str

    def __post_init__(self):
        if not self.schema.tables:
            raise ValueError("request schema has no tables")


@dataclass(frozen=True)
class RulePattern:
    name: str
    triggers: tuple[str, ...]
    template: str
    bindings: dict[str, dict]
    requires: tuple[str, ...] = ()


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[RulePattern, ...]
    polarity: dict[str, str]


def _rules_from_dict(document: dict) -> RuleSet:
    if document.get("format") != RULES_FORMAT:
        raise ValueError(f"not a {RULES_FORMAT} document")
    rules = []
    for raw in document["rules"]:
        rule = RulePattern(
            name=raw["name"],
            triggers=tuple(raw["triggers"]),
            template=raw["template"],
            bindings=raw["bindings"],
            requires=tuple(raw.get("requires", ())),
        )
        slots = set(re.findall(r"\{(\w+)\}", rule.template))
        if slots != set(rule.bindings):
            raise ValueError(
                f"rule {rule.name}: template slots {sorted(slots)} do not match "
                f"bindings {sorted(rule.bindings)}"
            )
        rules.append(rule)
    if not rules:
        raise ValueError("rule set is empty")
    return RuleSet(tuple(rules), dict(document.get("polarity", {})))


def load_rules(path: str | Path | None = None) -> RuleSet:
    """Load a rule set; None loads the bundled Portuguese defaults."""
    if path is None:
        text = resources.files("qarouter.data").joinpath("rules.pt.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return _rules_from_dict(json.loads(text))


def load_synonyms(path: str | Path | None = None) -> dict[str, str]:
    """Surface term -> schema name; None loads the bundled defaults."""
    if path is None:
        text = resources.files("qarouter.data").joinpath("synonyms.pt.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    mapping = json.loads(text)
    if not isinstance(mapping, dict):
        raise ValueError("synonym table must be a JSON object")
    return {str(k).lower(): str(v) for k, v in mapping.items()}


def _phrase_in(text: str, phrase: str) -> bool:
    return f" {phrase} " in f" {text} "


class _Grounding:
    """Resolves slot bindings for one question against one schema."""

    def __init__(self, question: str, schema: Schema, synonyms: dict[str, str], polarity: dict[str, str]):
        self.text = question
        self.tokens = tokenize(question)
        self.schema = schema
        self.synonyms = synonyms
        self.polarity = polarity
        self.table = None  # bound by the "table" kind

    def _candidates(self, token: str) -> list[str]:
        names = [token]
        synonym = self.synonyms.get(token)
        if synonym:
            names.append(synonym)
        return names

    def _find_table(self):
        for token in self.tokens:
            for name in self._candidates(token):
                table = self.schema.find_table(name)
                if table is not None:
                    return table
        return None

    def _find_column(self, col_type: str | None, skip_tokens: set[str] = frozenset()):
        """First question token naming a column of the bound table."""
        for position, token in enumerate(self.tokens):
            if token in skip_tokens:
                continue
            for name in self._candidates(token):
                index = self.table.column_index(name)
                if index is None:
                    continue
                column = self.table.columns[index]
                if col_type is None or column.type == col_type:
                    return position, column
        return None

    def bind(self, spec: dict):
        kind = spec["kind"]
        if kind == "table":
            table = self._find_table()
            if table is None:
                return None
            self.table = table
            return table.name

        if self.table is None:
            return None

        if kind == "first_column":
            return self.table.columns[0].name

        if kind == "label_column":
            hit = self._find_column("text")
            if hit is not None:
                return hit[1].name
            for column in self.table.columns:
                if column.type == "text":
                    return column.name
            return None

        if kind == "numeric_filter_column":
            hit = self._find_column("number")
            return hit[1].name if hit is not None else None

        if kind == "comparison_op":
            for phrase, op in _COMPARISON_CUES:
                if _phrase_in(self.text, phrase):
                    return op
            return None

        if kind == "number_literal":
            for token in self.tokens:
                if _NUMBER_TOKEN.match(token):
                    return token
            return None

        if kind == "text_filter_column":
            hit = self._find_column("text")
            if hit is None or self._value_after(hit[0]) is None:
                return None
            return hit[1].name

        if kind == "text_filter_value":
            hit = self._find_column("text")
            if hit is None:
                return None
            value = self._value_after(hit[0])
            return value.replace("'", "''") if value else None

        if kind == "superlative_column":
            pair = self._superlative_pair()
            return pair[0] if pair else None

        if kind == "superlative_direction":
            pair = self._superlative_pair()
            return pair[1] if pair else None

        raise ValueError(f"unknown binding kind {kind!r}")

    def _value_after(self, position: int) -> str | None:
        for token in self.tokens[position + 1:]:
            if token in _SKIP_BEFORE_VALUE:
                continue
            return token
        return None

    def _superlative_pair(self) -> tuple[str, str] | None:
        """(numeric column, ASC|DESC) from a quantifier + scale word pair."""
        for position, token in enumerate(self.tokens):
            sign = _QUANTIFIER_SIGN.get(token)
            if sign is None or position + 1 >= len(self.tokens):
                continue
            adjective = self.tokens[position + 1]
            for name in self._candidates(adjective):
                index = self.table.column_index(name)
                if index is None or self.table.columns[index].type != "number":
                    continue
                scale = 1 if self.polarity.get(adjective, "high") == "high" else -1
                return self.table.columns[index].name, ("DESC" if sign * scale > 0 else "ASC")
        return None


def rule_translate(
    request: Nl2SqlRequest,
    rules: RuleSet,
    synonyms: dict[str, str],
) -> str:
    """First rule whose triggers match and whose slots all bind wins."""
    question = normalize_question(request.question).text
    for rule in rules.rules:
        if not any(_phrase_in(question, t) for t in rule.triggers):
            continue
        if rule.requires and not any(_phrase_in(question, t) for t in rule.requires):
            continue
        grounding = _Grounding(question, request.schema, synonyms, rules.polarity)
        slots = {}
        for slot, spec in rule.bindings.items():
            value = grounding.bind(spec)
            if value is None:
                slots = None
                break
            slots[slot] = value
        if slots is not None:
            return rule.template.format(**slots)
    raise NoRuleMatched(f"no rule matched: {question!r}")


@dataclass(frozen=True)
class Nl2SqlBackendRef:
    kind: str  # "builtin" | "external"
    rules: RuleSet | None = None
    synonyms: dict[str, str] | None = None
    spool: SpoolDirs | None = None
    timeout: float = 30.0

    def __post_init__(self):
        if self.kind == "external" and self.spool is None:
            raise ValueError("external nl2sql backend needs a spool channel")
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"unknown backend kind {self.kind!r}")


def translate(backend: Nl2SqlBackendRef, request: Nl2SqlRequest) -> str:
    """Translate through the backend; gate everything through the parser."""
    if backend.kind == "builtin":
        rules = backend.rules if backend.rules is not None else load_rules()
        synonyms = backend.synonyms if backend.synonyms is not None else load_synonyms()
        sql = rule_translate(request, rules, synonyms)
        origin = "builtin rule translator"
    else:
        payload = ipcbridge.request_round_trip(
            backend.spool,
            "nl2sql",
            {
                "question": request.question,
                "db_id": request.db_id,
                "schema": schema_to_dict(request.schema),
            },
            backend.timeout,
        )
        sql = payload["sql"]
        origin = "external nl2sql backend"
    try:
        parse_sql(sql)
    except SqlEngineError as exc:
        raise MalformedBackendResponse(f"{origin} produced unparseable SQL {sql!r}: {exc}") from exc
    return sql


def answer_sql_question(
    backend: Nl2SqlBackendRef,
    request: Nl2SqlRequest,
    database: Database,
) -> tuple[ResultTable, str]:
    """translate -> parse -> validate -> execute; failures carry their stage."""
    try:
        sql = translate(backend, request)
    except Exception as exc:
        raise StageError("translate", exc) from exc
    try:
        plan = validate(parse_sql(sql), database.schema)
    except Exception as exc:
        raise StageError("validate", exc) from exc
    try:
        result = execute(plan, database)
    except Exception as exc:
        raise StageError("execute", exc) from exc
    return result, sql
