"""Model backends behind one narrow interface.

A backend is a callable taking the request payload and returning the response
payload for its role. The bundled "stub" backend needs no machine-learning
dependencies; real model wrappers install as optional extras and register
themselves here (see register_backend).
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable

PayloadHandler = Callable[[dict], dict]

_REGISTRY: dict[str, Callable[[str, str], PayloadHandler]] = {}


class BackendUnavailable(Exception):
    pass


def register_backend(scheme: str, factory: Callable[[str, str], PayloadHandler]) -> None:
    """Make `--model <scheme>:<spec>` resolvable. factory(role, spec) -> handler."""
    _REGISTRY[scheme] = factory


def _normalize(text: str) -> str:
    """Lowercase and strip final punctuation, mirroring the router's cleanup."""
    text = text.lower().strip()
    while text and text[-1] in "?!.…":
        text = text[:-1].rstrip()
    chars = []
    for ch in text:
        chars.append(ch if ch.isalnum() or ch in "-'" else " ")
    return " ".join("".join(chars).split())


class StubModel:
    """Canned responses from a behavior dict (same schema as the router's
    stub server): keyword maps for classifier/nl2sql, fixed or echoed text
    for the reader."""

    def __init__(self, role: str, behavior: dict):
        self.role = role
        self.behavior = behavior

    def _lookup(self, question: str):
        normalized = f" {_normalize(question)} "
        for keyword, value in self.behavior.get("keywords", {}).items():
            if f" {_normalize(keyword)} " in normalized:
                return value
        return self.behavior.get("default")

    def __call__(self, payload: dict) -> dict:
        if self.role == "classifier":
            label = self._lookup(payload["question"])
            if label not in ("factual", "sql"):
                raise ValueError(f"stub behavior produced no usable label: {label!r}")
            return {"label": label}
        if self.role == "reader":
            if self.behavior.get("echo"):
                return {"answer": payload["input"], "score": float(self.behavior.get("score", 1.0))}
            answer = self.behavior.get("answer")
            if not isinstance(answer, str):
                raise ValueError("reader stub needs an 'answer' string or 'echo': true")
            return {"answer": answer, "score": float(self.behavior.get("score", 1.0))}
        if self.role == "nl2sql":
            sql = self._lookup(payload["question"])
            if not isinstance(sql, str):
                raise ValueError(f"stub behavior produced no SQL for {payload['question']!r}")
            return {"sql": sql}
        raise ValueError(f"unknown role {self.role!r}")


def load_backend(role: str, model: str, stub_behavior_path: str | None) -> PayloadHandler:
    """Resolve the --model flag to a payload handler.

    "stub" loads the JSON behavior file; anything else must be
    "<scheme>:<spec>" with the scheme registered by an optional extra.
    """
    if model == "stub":
        if not stub_behavior_path:
            raise BackendUnavailable("stub mode needs --stub-behavior <file.json>")
        behavior = json.loads(Path(stub_behavior_path).read_text(encoding="utf-8"))
        if not isinstance(behavior, dict):
            raise BackendUnavailable("behavior file must hold a JSON object")
        return StubModel(role, behavior)

    scheme, _, spec = model.partition(":")
    factory = _REGISTRY.get(scheme)
    if factory is None:
        raise BackendUnavailable(
            f"no backend registered for {scheme!r}; install a model extra and "
            f"register it with model_adapter.models.register_backend"
        )
    return factory(role, spec)
