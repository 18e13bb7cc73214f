"""Mixed-deployment smoke: the router's built-in stub serves the reader role
while this sidecar serves the classifier role, and the 20-question batch must
complete with routing decisions identical to the all-builtin run.

The router is driven exclusively through its external interfaces: the
qa-router CLI, the config file format, and the spool protocol.
"""

import json
import subprocess
import sys
import threading
from pathlib import Path

import pytest

from conftest import HOSPITAL, KB_DIR, MINI_CORPUS, SMOKE_BATCH, make_spool
from model_adapter.adapter import AdapterConfig, serve
from model_adapter.models import StubModel

CLASSIFIER_BEHAVIOR = {
    "default": "factual",
    "keywords": {
        "quantos": "sql",
        "quantas": "sql",
        "encontre": "sql",
        "nomes": "sql",
        "barato": "sql",
    },
}
READER_BEHAVIOR = {"answer": "resposta do leitor externo", "score": 0.5}


def run_router(*argv, timeout=120):
    proc = subprocess.run(
        [sys.executable, "-m", "qarouter.cli", *argv],
        capture_output=True, text=True, timeout=timeout,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def router_assets(tmp_path_factory):
    """Index and model built through the router CLI only."""
    root = tmp_path_factory.mktemp("assets")
    passages = root / "passages.jsonl"
    index = root / "index.json"
    model = root / "model.json"
    run_router("ingest", "--input", str(KB_DIR), "--output", str(passages))
    run_router("index", "build", "--passages", str(passages), "--out", str(index))
    run_router("train-classifier", "--data", str(MINI_CORPUS), "--out", str(model))
    return {"index": index, "model": model, "root": root}


def eval_routes(config_path: Path, records_path: Path) -> dict:
    run_router(
        "eval", "--input", str(SMOKE_BATCH), "--output", str(records_path),
        "--config", str(config_path),
    )
    routes = {}
    with open(records_path, encoding="utf-8") as fh:
        for item, line in zip(_smoke_items(), fh):
            record = json.loads(line)
            routes[item["id"]] = record["route"]
            assert record["answer"] is not None or record["error"] is not None
    return routes


def _smoke_items():
    with open(SMOKE_BATCH, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


class TestMixedDeployment:
    def test_mixed_run_matches_builtin_routing(self, router_assets, tmp_path):
        # --- baseline: everything builtin ---
        builtin_config = tmp_path / "builtin.json"
        builtin_config.write_text(json.dumps({
            "classifier": {"kind": "builtin", "model": str(router_assets["model"])},
            "reader": {"kind": "builtin"},
            "nl2sql": {"kind": "builtin"},
            "index": str(router_assets["index"]),
            "database": str(HOSPITAL),
            "db_id": "hospital",
        }), encoding="utf-8")
        builtin_routes = eval_routes(builtin_config, tmp_path / "builtin-records.jsonl")
        assert len(builtin_routes) == 20

        # --- mixed: sidecar serves classifier, router stub serves reader ---
        spool = make_spool(tmp_path / "spool")
        mixed_config = tmp_path / "mixed.json"
        mixed_config.write_text(json.dumps({
            "classifier": {"kind": "external"},
            "reader": {"kind": "external"},
            "nl2sql": {"kind": "builtin"},
            "index": str(router_assets["index"]),
            "database": str(HOSPITAL),
            "db_id": "hospital",
            "spool": str(spool),
            "timeouts": {"classifier": 30, "reader": 30},
        }), encoding="utf-8")

        stop = threading.Event()
        sidecar_config = AdapterConfig(
            spool_root=str(spool), role="classifier",
            poll_interval=0.02, consumer_id="sidecar-under-test", max_requests=20,
        )
        sidecar = threading.Thread(
            target=serve,
            args=(sidecar_config, StubModel("classifier", CLASSIFIER_BEHAVIOR)),
            kwargs={"stop_event": stop},
            daemon=True,
        )
        sidecar.start()

        behavior_path = tmp_path / "reader-behavior.json"
        behavior_path.write_text(json.dumps(READER_BEHAVIOR), encoding="utf-8")
        reader_stub = subprocess.Popen(
            [sys.executable, "-m", "qarouter.cli", "serve-stub",
             "--spool", str(spool), "--role", "reader",
             "--behavior", str(behavior_path), "--max-requests", "10", "--poll", "0.02"],
            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
        )
        try:
            mixed_routes = eval_routes(mixed_config, tmp_path / "mixed-records.jsonl")
        finally:
            stop.set()
            sidecar.join(timeout=10)
            try:
                reader_stub.wait(timeout=10)
            except subprocess.TimeoutExpired:
                reader_stub.kill()
                reader_stub.wait()

        assert mixed_routes == builtin_routes
        golds = {item["id"]: item["route"] for item in _smoke_items()}
        assert mixed_routes == golds  # i.e. routing accuracy 100% in the mixed run

    def test_sidecar_cli_serves_a_router_request(self, tmp_path):
        """End-to-end over the console entry point, not the library."""
        spool = make_spool(tmp_path / "spool")
        behavior_path = tmp_path / "behavior.json"
        behavior_path.write_text(json.dumps(CLASSIFIER_BEHAVIOR), encoding="utf-8")

        from conftest import drop_request, read_response

        msg_id = drop_request(spool, "classifier", {"question": "quantos pacientes existem?"})
        proc = subprocess.run(
            [sys.executable, "-m", "model_adapter.cli",
             "--spool", str(spool), "--role", "classifier",
             "--stub-behavior", str(behavior_path), "--max-requests", "1", "--poll", "0.02"],
            capture_output=True, text=True, timeout=60,
        )
        assert proc.returncode == 0, proc.stderr
        assert "served 1 requests" in proc.stderr
        assert read_response(spool, "classifier", msg_id)["payload"] == {"label": "sql"}
