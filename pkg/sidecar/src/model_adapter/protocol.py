"""The file-spool wire protocol, implemented from its documented contract.

This module deliberately does not import the router package: the sidecar
proves that the published protocol (see the router repo's
docs/ipc-protocol.md) is sufficient to interoperate. All state transitions
are atomic renames on one filesystem.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from datetime import datetime, timezone
from pathlib import Path

PROTOCOL_VERSION = 1
ROLES = ("classifier", "reader", "nl2sql")
SUBDIRS = ("inbox", "processing", "done", "failed")

_REQUEST_FIELDS = {
    "classifier": ("question",),
    "reader": ("input",),
    "nl2sql": ("question", "db_id", "schema"),
}
_RESPONSE_FIELDS = {
    "classifier": ("label",),
    "reader": ("answer", "score"),
    "nl2sql": ("sql",),
}


class ProtocolError(Exception):
    """A message violates the wire contract."""


class SpoolMissing(Exception):
    """The spool tree is absent or incomplete."""


def role_dir(root: Path, role: str, sub: str) -> Path:
    return Path(root) / role / sub


def check_spool(root: str | Path, role: str) -> Path:
    root = Path(root)
    for sub in SUBDIRS:
        if not role_dir(root, role, sub).is_dir():
            raise SpoolMissing(f"missing {role}/{sub} under {root}")
    return root


def now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat()


def new_id() -> str:
    return f"{time.time_ns():020d}-{uuid.uuid4().hex[:8]}"


def envelope(msg_id: str, role: str, kind: str, payload: dict) -> str:
    return json.dumps(
        {
            "id": msg_id,
            "role": role,
            "kind": kind,
            "protocol_version": PROTOCOL_VERSION,
            "created_at": now_rfc3339(),
            "payload": payload,
        },
        ensure_ascii=False,
    )


def parse_envelope(text: str, expected_role: str, expected_kind: str) -> dict:
    """Validated envelope dict; raises ProtocolError on any contract breach."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ProtocolError("envelope must be a JSON object")
    for field in ("id", "role", "kind", "protocol_version", "created_at", "payload"):
        if field not in data:
            raise ProtocolError(f"envelope missing {field!r}")
    if data["protocol_version"] != PROTOCOL_VERSION:
        raise ProtocolError(f"unsupported protocol_version {data['protocol_version']!r}")
    if data["role"] != expected_role:
        raise ProtocolError(f"expected role {expected_role!r}, got {data['role']!r}")
    if data["kind"] != expected_kind:
        raise ProtocolError(f"expected kind {expected_kind!r}, got {data['kind']!r}")
    schema = (_REQUEST_FIELDS if expected_kind == "request" else _RESPONSE_FIELDS)[expected_role]
    payload = data["payload"]
    if not isinstance(payload, dict):
        raise ProtocolError("payload must be an object")
    missing = [f for f in schema if f not in payload]
    extra = [f for f in payload if f not in schema]
    if missing or extra:
        raise ProtocolError(f"payload fields wrong: missing {missing}, extra {extra}")
    return data


def atomic_write(directory: Path, name: str, text: str) -> None:
    tmp = directory / f".tmp-{uuid.uuid4().hex}"
    tmp.write_text(text, encoding="utf-8")
    os.rename(tmp, directory / name)


def claim_request(root: Path, role: str, consumer: str) -> dict | None:
    """Claim the oldest request by renaming it into processing/.

    Malformed files are quarantined into failed/ and scanning continues;
    returns the parsed envelope or None when the inbox is empty.
    """
    inbox = role_dir(root, role, "inbox")
    processing = role_dir(root, role, "processing")
    for name in sorted(os.listdir(inbox)):
        if not name.endswith(".req.json"):
            continue
        claimed = processing / f"{name}.{consumer}"
        try:
            os.rename(inbox / name, claimed)
        except FileNotFoundError:
            continue  # another consumer won this file
        try:
            data = parse_envelope(claimed.read_text(encoding="utf-8"), role, "request")
            if f"{data['id']}.req.json" != name:
                raise ProtocolError(f"file {name!r} does not match envelope id {data['id']!r}")
        except ProtocolError as exc:
            quarantine(root, role, claimed, name, str(exc))
            continue
        return data
    return None


def quarantine(root: Path, role: str, path: Path, original_name: str, error: str) -> None:
    failed = role_dir(root, role, "failed")
    request_id = original_name.removesuffix(".req.json")
    atomic_write(
        failed,
        f"{request_id}.err.json",
        json.dumps({"id": request_id, "error": error, "failed_at": now_rfc3339()}, ensure_ascii=False),
    )
    os.rename(path, failed / original_name)


def publish_response(root: Path, role: str, request_id: str, payload: dict, consumer: str) -> None:
    """Write <id>.resp.json into done/ and archive the claimed request."""
    claimed = role_dir(root, role, "processing") / f"{request_id}.req.json.{consumer}"
    done = role_dir(root, role, "done")
    atomic_write(done, f"{request_id}.resp.json", envelope(request_id, role, "response", payload))
    os.rename(claimed, done / f"{request_id}.req.json")


def fail_claimed(root: Path, role: str, request_id: str, error: str, consumer: str) -> None:
    claimed = role_dir(root, role, "processing") / f"{request_id}.req.json.{consumer}"
    quarantine(root, role, claimed, f"{request_id}.req.json", error)


def sweep_stale(root: Path, role: str, older_than: float) -> list[str]:
    """Re-queue processing files older than the threshold; atomic, so each
    stale file moves back exactly once even with concurrent sweepers."""
    processing = role_dir(root, role, "processing")
    requeued = []
    now = time.time()
    for name in sorted(os.listdir(processing)):
        if ".req.json." not in name:
            continue
        path = processing / name
        try:
            if now - path.stat().st_mtime < older_than:
                continue
            original = name[: name.index(".req.json") + len(".req.json")]
            os.rename(path, role_dir(root, role, "inbox") / original)
        except FileNotFoundError:
            continue
        requeued.append(original.removesuffix(".req.json"))
    return requeued
