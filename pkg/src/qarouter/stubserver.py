"""Built-in stub backend: serves the spool protocol with canned behavior.

Lets the full pipeline run end to end with "external" backends but no model
processes: fixed or keyword-mapped responses come from a small JSON behavior
file. Also the reference consumer loop (claim -> handle -> respond, failures
to failed/, periodic stale sweeps).

Behavior files by role::

    classifier  {"default": "factual", "keywords": {"quantos": "sql"}}
    reader      {"answer": "texto fixo", "score": 1.0}   or {"echo": true}
    nl2sql      {"default": "SELECT ...", "keywords": {"caro": "SELECT ..."}}
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from . import ipcbridge
from .ipcbridge import SpoolDirs
from .textprep import normalize_text


def load_behavior(path: str | Path) -> dict:
    behavior = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(behavior, dict):
        raise ValueError("behavior file must hold a JSON object")
    return behavior


def _keyword_lookup(question: str, behavior: dict) -> str | None:
    normalized = normalize_text(question).text
    for keyword, value in behavior.get("keywords", {}).items():
        if f" {normalize_text(keyword).text} " in f" {normalized} ":
            return value
    return behavior.get("default")


def stub_response(role: str, behavior: dict, payload: dict) -> dict:
    """Response payload for one request, per the role's behavior schema."""
    if role == "classifier":
        label = _keyword_lookup(payload["question"], behavior)
        if label not in ("factual", "sql"):
            raise ValueError(f"classifier behavior produced no usable label: {label!r}")
        return {"label": label}
    if role == "reader":
        if behavior.get("echo"):
            return {"answer": payload["input"], "score": float(behavior.get("score", 1.0))}
        answer = behavior.get("answer")
        if not isinstance(answer, str):
            raise ValueError("reader behavior needs an 'answer' string or 'echo': true")
        return {"answer": answer, "score": float(behavior.get("score", 1.0))}
    if role == "nl2sql":
        sql = _keyword_lookup(payload["question"], behavior)
        if not isinstance(sql, str):
            raise ValueError(f"nl2sql behavior produced no SQL for {payload['question']!r}")
        return {"sql": sql}
    raise ValueError(f"unknown role {role!r}")


def serve_stub(
    spool: SpoolDirs,
    role: str,
    behavior: dict,
    consumer_id: str = "stub",
    poll_interval: float = 0.05,
    max_requests: int | None = None,
    stale_after: float | None = None,
    stop_event: threading.Event | None = None,
) -> int:
    """Claim/handle/respond loop; returns the number of requests served.

    Runs until stop_event is set or max_requests have been handled. With
    stale_after set, abandoned claims are swept back to the inbox on startup
    and then once per stale_after interval.
    """
    handled = 0
    last_sweep = 0.0
    while max_requests is None or handled < max_requests:
        if stop_event is not None and stop_event.is_set():
            break
        if stale_after is not None and time.monotonic() - last_sweep >= stale_after:
            ipcbridge.sweep_stale(spool, role, older_than=stale_after)
            last_sweep = time.monotonic()
        message = ipcbridge.claim_next(spool, role, consumer_id)
        if message is None:
            time.sleep(poll_interval)
            continue
        try:
            response = stub_response(role, behavior, message.payload)
        except Exception as exc:
            ipcbridge.fail_request(spool, role, message.id, str(exc), consumer_id)
            continue
        ipcbridge.respond(spool, role, message.id, response, consumer_id)
        handled += 1
    return handled
