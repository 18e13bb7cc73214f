"""Shared-filesystem message exchange between the router and backend processes.

Layout under one spool root, one tree per role::

    <root>/<role>/inbox/        <id>.req.json        producer drops requests
    <root>/<role>/processing/   <id>.req.json.<consumer>   claimed work
    <root>/<role>/done/         <id>.resp.json + <id>.req.json
    <root>/<role>/failed/       <id>.req.json + <id>.err.json

All visibility transitions are atomic renames on one mounted filesystem, so a
reader never sees a half-written file and a request can be claimed by exactly
one consumer. Network filesystems without atomic rename are unsupported.
"""

from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import (
    ExternalTimeout,
    MalformedBackendResponse,
    SerializationError,
    SpoolUnavailable,
    UnknownRequestId,
)

PROTOCOL_VERSION = 1
ROLES = ("classifier", "reader", "nl2sql")
SUBDIRS = ("inbox", "processing", "done", "failed")
DEFAULT_POLL_INTERVAL = 0.1
DEFAULT_STALE_AFTER = 300.0

# payload schema per (role, kind): field name -> allowed types
_PAYLOAD_FIELDS = {
    ("classifier", "request"): {"question": (str,)},
    ("classifier", "response"): {"label": (str,)},
    ("reader", "request"): {"input": (str,)},
    ("reader", "response"): {"answer": (str,), "score": (int, float)},
    ("nl2sql", "request"): {"question": (str,), "db_id": (str,), "schema": (dict,)},
    ("nl2sql", "response"): {"sql": (str,)},
}
_LABEL_VALUES = ("factual", "sql")


@dataclass(frozen=True)
class SpoolDirs:
    """Paths of one spool root; directories are created by init_spool."""

    root: Path

    def dir(self, role: str, sub: str) -> Path:
        return self.root / role / sub

    def inbox(self, role: str) -> Path:
        return self.dir(role, "inbox")

    def processing(self, role: str) -> Path:
        return self.dir(role, "processing")

    def done(self, role: str) -> Path:
        return self.dir(role, "done")

    def failed(self, role: str) -> Path:
        return self.dir(role, "failed")


@dataclass(frozen=True)
class IpcMessage:
    id: str
    role: str
    kind: str
    payload: dict
    created_at: str
    protocol_version: int = PROTOCOL_VERSION

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "role": self.role,
                "kind": self.kind,
                "protocol_version": self.protocol_version,
                "created_at": self.created_at,
                "payload": self.payload,
            },
            ensure_ascii=False,
        )


def new_message_id() -> str:
    """Timestamp-prefixed id: sorts in send order, random tail avoids collisions."""
    return f"{time.time_ns():020d}-{uuid.uuid4().hex[:8]}"


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat()


def validate_payload(role: str, kind: str, payload: object) -> None:
    """Raise ValueError unless payload matches the documented body schema."""
    schema = _PAYLOAD_FIELDS.get((role, kind))
    if schema is None:
        raise ValueError(f"unknown role/kind: {role}/{kind}")
    if not isinstance(payload, dict):
        raise ValueError(f"payload must be an object, got {type(payload).__name__}")
    for name, types in schema.items():
        if name not in payload:
            raise ValueError(f"{role} {kind} payload missing field {name!r}")
        if not isinstance(payload[name], types) or isinstance(payload[name], bool):
            raise ValueError(f"{role} {kind} payload field {name!r} has wrong type")
    extra = set(payload) - set(schema)
    if extra:
        raise ValueError(f"{role} {kind} payload has unexpected fields: {sorted(extra)}")
    if (role, kind) == ("classifier", "response") and payload["label"] not in _LABEL_VALUES:
        raise ValueError(f"classifier label must be one of {_LABEL_VALUES}, got {payload['label']!r}")


def parse_message(text: str) -> IpcMessage:
    """Parse and fully validate one wire message. Raises ValueError."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError("message must be a JSON object")
    required = {"id", "role", "kind", "protocol_version", "created_at", "payload"}
    missing = required - set(data)
    if missing:
        raise ValueError(f"message missing fields: {sorted(missing)}")
    if data["protocol_version"] != PROTOCOL_VERSION:
        raise ValueError(f"unsupported protocol_version {data['protocol_version']!r}")
    if data["role"] not in ROLES:
        raise ValueError(f"unknown role {data['role']!r}")
    if data["kind"] not in ("request", "response"):
        raise ValueError(f"unknown kind {data['kind']!r}")
    if not isinstance(data["id"], str) or not data["id"]:
        raise ValueError("message id must be a nonempty string")
    if not isinstance(data["created_at"], str):
        raise ValueError("created_at must be a string")
    validate_payload(data["role"], data["kind"], data["payload"])
    return IpcMessage(
        id=data["id"],
        role=data["role"],
        kind=data["kind"],
        payload=data["payload"],
        created_at=data["created_at"],
        protocol_version=data["protocol_version"],
    )


def init_spool(root: str | Path) -> SpoolDirs:
    """Create the full directory tree (idempotent) and return its handle."""
    spool = SpoolDirs(Path(root))
    for role in ROLES:
        for sub in SUBDIRS:
            spool.dir(role, sub).mkdir(parents=True, exist_ok=True)
    return spool


def open_spool(root: str | Path) -> SpoolDirs:
    """Return a handle to an existing spool, checking the tree is complete."""
    spool = SpoolDirs(Path(root))
    for role in ROLES:
        for sub in SUBDIRS:
            if not spool.dir(role, sub).is_dir():
                raise SpoolUnavailable(f"missing spool directory: {spool.dir(role, sub)}")
    return spool


def _atomic_write(directory: Path, final_name: str, text: str) -> None:
    tmp = directory / f".tmp-{uuid.uuid4().hex}"
    tmp.write_text(text, encoding="utf-8")
    os.rename(tmp, directory / final_name)


def send_request(spool: SpoolDirs, role: str, payload: dict, msg_id: str | None = None) -> str:
    """Atomically drop a request into the role's inbox; returns the message id."""
    inbox = spool.inbox(role)
    if not inbox.is_dir():
        raise SpoolUnavailable(f"no inbox for role {role!r} under {spool.root}")
    validate_payload(role, "request", payload)
    message = IpcMessage(
        id=msg_id or new_message_id(),
        role=role,
        kind="request",
        payload=payload,
        created_at=_now_rfc3339(),
    )
    try:
        text = message.to_json()
    except (TypeError, ValueError) as exc:
        raise SerializationError(f"cannot serialize {role} request: {exc}") from exc
    _atomic_write(inbox, f"{message.id}.req.json", text)
    return message.id


def _quarantine(spool: SpoolDirs, role: str, path: Path, original_name: str, error: str) -> None:
    """Move an unusable request file to failed/ with an error sidecar."""
    failed = spool.failed(role)
    request_id = original_name[: -len(".req.json")] if original_name.endswith(".req.json") else original_name
    sidecar = json.dumps(
        {"id": request_id, "error": error, "failed_at": _now_rfc3339()}, ensure_ascii=False
    )
    _atomic_write(failed, f"{request_id}.err.json", sidecar)
    os.rename(path, failed / original_name)


def claim_next(spool: SpoolDirs, role: str, consumer_id: str) -> IpcMessage | None:
    """Claim the oldest pending request by renaming it into processing/.

    The rename is the lock: losing a race simply moves on to the next file.
    Unparseable request files are quarantined to failed/ and scanning continues.
    Returns None when the inbox is empty.
    """
    inbox = spool.inbox(role)
    if not inbox.is_dir():
        raise SpoolUnavailable(f"no inbox for role {role!r} under {spool.root}")
    try:
        names = sorted(n for n in os.listdir(inbox) if n.endswith(".req.json"))
    except OSError as exc:
        raise SpoolUnavailable(f"cannot list {inbox}: {exc}") from exc

    for name in names:
        claimed = spool.processing(role) / f"{name}.{consumer_id}"
        try:
            os.rename(inbox / name, claimed)
        except FileNotFoundError:
            continue  # lost the race for this file
        try:
            message = parse_message(claimed.read_text(encoding="utf-8"))
            if message.kind != "request":
                raise ValueError(f"expected a request, got kind={message.kind!r}")
            if message.role != role:
                raise ValueError(f"message role {message.role!r} does not match spool role {role!r}")
            expected = f"{message.id}.req.json"
            if name != expected:
                raise ValueError(f"file name {name!r} does not match message id {message.id!r}")
        except ValueError as exc:
            _quarantine(spool, role, claimed, name, str(exc))
            continue
        return message
    return None


def _claimed_path(spool: SpoolDirs, role: str, request_id: str, consumer_id: str) -> Path:
    return spool.processing(role) / f"{request_id}.req.json.{consumer_id}"


def respond(spool: SpoolDirs, role: str, request_id: str, payload: dict, consumer_id: str) -> None:
    """Publish a response for a request this consumer claimed earlier."""
    claimed = _claimed_path(spool, role, request_id, consumer_id)
    if not claimed.exists():
        raise UnknownRequestId(f"no claimed request {request_id!r} for consumer {consumer_id!r}")
    validate_payload(role, "response", payload)
    message = IpcMessage(
        id=request_id,
        role=role,
        kind="response",
        payload=payload,
        created_at=_now_rfc3339(),
    )
    done = spool.done(role)
    _atomic_write(done, f"{request_id}.resp.json", message.to_json())
    os.rename(claimed, done / f"{request_id}.req.json")


def fail_request(spool: SpoolDirs, role: str, request_id: str, error: str, consumer_id: str) -> None:
    """Move a claimed request to failed/ with an error sidecar."""
    claimed = _claimed_path(spool, role, request_id, consumer_id)
    if not claimed.exists():
        raise UnknownRequestId(f"no claimed request {request_id!r} for consumer {consumer_id!r}")
    _quarantine(spool, role, claimed, f"{request_id}.req.json", error)


def await_response(
    spool: SpoolDirs,
    role: str,
    request_id: str,
    timeout: float,
    poll_interval: float = DEFAULT_POLL_INTERVAL,
) -> IpcMessage:
    """Poll done/ until <id>.resp.json appears, validating it on arrival."""
    done = spool.done(role)
    err_sidecar = spool.failed(role) / f"{request_id}.err.json"
    deadline = time.monotonic() + timeout
    while True:
        resp_path = done / f"{request_id}.resp.json"
        if resp_path.exists():
            try:
                message = parse_message(resp_path.read_text(encoding="utf-8"))
                if message.kind != "response" or message.role != role:
                    raise ValueError("not a response for this role")
                if message.id != request_id:
                    raise ValueError(f"response id {message.id!r} does not match request {request_id!r}")
            except ValueError as exc:
                raise MalformedBackendResponse(str(exc)) from None
            return message
        if err_sidecar.exists():
            detail = err_sidecar.read_text(encoding="utf-8")
            raise MalformedBackendResponse(f"backend failed request {request_id}: {detail}")
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise ExternalTimeout(f"no {role} response for {request_id} within {timeout:.1f}s")
        time.sleep(min(poll_interval, remaining))


def request_round_trip(
    spool: SpoolDirs,
    role: str,
    payload: dict,
    timeout: float,
    poll_interval: float = DEFAULT_POLL_INTERVAL,
) -> dict:
    """send_request + await_response; returns the response payload."""
    request_id = send_request(spool, role, payload)
    response = await_response(spool, role, request_id, timeout, poll_interval)
    return response.payload


def sweep_stale(spool: SpoolDirs, role: str, older_than: float = DEFAULT_STALE_AFTER) -> list[str]:
    """Re-queue requests stuck in processing/ longer than older_than seconds.

    Returns the re-queued request ids. Rename atomicity makes concurrent
    sweepers safe: each stale file is re-queued exactly once.
    """
    processing = spool.processing(role)
    if not processing.is_dir():
        raise SpoolUnavailable(f"no processing dir for role {role!r} under {spool.root}")
    requeued = []
    now = time.time()
    for name in sorted(os.listdir(processing)):
        if ".req.json." not in name:
            continue
        path = processing / name
        try:
            age = now - path.stat().st_mtime
        except FileNotFoundError:
            continue
        if age < older_than:
            continue
        original = name[: name.index(".req.json.") + len(".req.json")]
        try:
            os.rename(path, spool.inbox(role) / original)
        except FileNotFoundError:
            continue
        requeued.append(original[: -len(".req.json")])
    return requeued
