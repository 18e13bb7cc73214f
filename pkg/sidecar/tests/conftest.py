import json
from pathlib import Path

import pytest

from model_adapter import protocol

SIDECAR_ROOT = Path(__file__).parent.parent
ROUTER_REPO = SIDECAR_ROOT.parent
GOLDEN_DIR = ROUTER_REPO / "fixtures" / "ipc"
SMOKE_BATCH = ROUTER_REPO / "fixtures" / "smoke_batch.jsonl"
HOSPITAL = ROUTER_REPO / "fixtures" / "hospital"
KB_DIR = ROUTER_REPO / "fixtures" / "kb"
MINI_CORPUS = ROUTER_REPO / "src" / "qarouter" / "data" / "mini_corpus.csv"


def make_spool(root: Path) -> Path:
    """Create the documented spool layout without touching the router package."""
    for role in protocol.ROLES:
        for sub in protocol.SUBDIRS:
            (root / role / sub).mkdir(parents=True, exist_ok=True)
    return root


def drop_request(root: Path, role: str, payload: dict, msg_id: str | None = None) -> str:
    """Producer side of the protocol, written here from the docs."""
    msg_id = msg_id or protocol.new_id()
    protocol.atomic_write(
        protocol.role_dir(root, role, "inbox"),
        f"{msg_id}.req.json",
        protocol.envelope(msg_id, role, "request", payload),
    )
    return msg_id


def read_response(root: Path, role: str, msg_id: str) -> dict:
    path = protocol.role_dir(root, role, "done") / f"{msg_id}.resp.json"
    return protocol.parse_envelope(path.read_text(encoding="utf-8"), role, "response")


def golden_cases():
    return [
        json.loads(path.read_text(encoding="utf-8"))
        for path in sorted(GOLDEN_DIR.glob("golden_*.json"))
    ]


@pytest.fixture()
def spool(tmp_path):
    return make_spool(tmp_path / "spool")
