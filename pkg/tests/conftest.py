import json
import sys
from importlib import resources
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for oracles.py

from qarouter.classifier import load_labeled_csv, save_model, train_nb
from qarouter.retriever import build_index, save_index
from qarouter.textprep import chunk_corpus, load_corpus_dir

REPO_ROOT = Path(__file__).parent.parent
FIXTURES = REPO_ROOT / "fixtures"
HOSPITAL = FIXTURES / "hospital"
KB_DIR = FIXTURES / "kb"
SMOKE_BATCH = FIXTURES / "smoke_batch.jsonl"


def mini_corpus_path() -> str:
    return str(resources.files("qarouter.data").joinpath("mini_corpus.csv"))


@pytest.fixture(scope="session")
def mini_corpus():
    return load_labeled_csv(mini_corpus_path())


@pytest.fixture(scope="session")
def trained_model(mini_corpus):
    return train_nb(mini_corpus)


@pytest.fixture(scope="session")
def kb_index():
    return build_index(chunk_corpus(load_corpus_dir(KB_DIR)))


@pytest.fixture(scope="session")
def workspace(tmp_path_factory, trained_model, kb_index):
    """Model file, index snapshot and a config pointing at the fixtures."""
    root = tmp_path_factory.mktemp("workspace")
    model_path = root / "model.json"
    save_model(trained_model, model_path)
    index_path = root / "index.json"
    save_index(kb_index, index_path)
    config = {
        "classifier": {"kind": "builtin", "model": str(model_path)},
        "reader": {"kind": "builtin"},
        "nl2sql": {"kind": "builtin"},
        "k": 5,
        "index": str(index_path),
        "database": str(HOSPITAL),
        "db_id": "hospital",
    }
    config_path = root / "qa-router.json"
    config_path.write_text(json.dumps(config), encoding="utf-8")
    return {
        "root": root,
        "model_path": model_path,
        "index_path": index_path,
        "config_path": config_path,
        "config": config,
    }


def load_smoke_batch():
    with open(SMOKE_BATCH, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
