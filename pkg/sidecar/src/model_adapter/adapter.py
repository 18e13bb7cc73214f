"""The claim -> infer -> respond loop."""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from . import protocol
from .models import PayloadHandler


@dataclass(frozen=True)
class AdapterConfig:
    spool_root: str
    role: str
    model: str = "stub"
    stub_behavior: str | None = None
    poll_interval: float = 0.1
    stale_after: float | None = None
    consumer_id: str = ""
    max_requests: int | None = None
    max_sequence_length: int = 512  # informational: advertised model context

    def __post_init__(self):
        if self.role not in protocol.ROLES:
            raise ValueError(f"role must be one of {protocol.ROLES}, got {self.role!r}")
        if not self.consumer_id:
            object.__setattr__(self, "consumer_id", f"adapter-{os.getpid()}")


def serve(config: AdapterConfig, handler: PayloadHandler, stop_event: threading.Event | None = None) -> int:
    """Serve requests until stopped; returns how many were answered.

    The stop event is only consulted between messages, so an in-flight
    request always completes before shutdown. Handler failures move the
    request to failed/ with an error sidecar and the loop continues;
    malformed inbox files are quarantined by the claim step itself.
    """
    root = protocol.check_spool(config.spool_root, config.role)
    handled = 0
    last_sweep = 0.0
    while config.max_requests is None or handled < config.max_requests:
        if stop_event is not None and stop_event.is_set():
            break
        if config.stale_after is not None and time.monotonic() - last_sweep >= config.stale_after:
            protocol.sweep_stale(root, config.role, config.stale_after)
            last_sweep = time.monotonic()
        request = protocol.claim_request(root, config.role, config.consumer_id)
        if request is None:
            time.sleep(config.poll_interval)
            continue
        try:
            response = handler(request["payload"])
        except Exception as exc:
            protocol.fail_claimed(root, config.role, request["id"], str(exc), config.consumer_id)
            continue
        protocol.publish_response(root, config.role, request["id"], response, config.consumer_id)
        handled += 1
    return handled
