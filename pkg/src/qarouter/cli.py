"""Operator command line.

Commands: ingest, index build/stats, train-classifier, crossval, ask, eval,
sql, spool-init, serve-stub. Machine-readable output (JSON/CSV) goes to
stdout, diagnostics to stderr. Exit codes: 0 success, 1 domain error,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import signal
import sys
import threading
from pathlib import Path

from . import __version__
from .classifier import cross_validate, load_labeled_csv, save_model, train_nb
from .errors import QaRouterError
from .evalkit import MetricConfig
from .ipcbridge import init_spool, open_spool
from .pipeline import (
    CONFIG_ENV_VAR,
    DEFAULT_CONFIG_NAME,
    Router,
    build_batch_report,
    load_config,
)
from .retriever import Bm25Params, build_index_from_pairs, index_stats, load_index, save_index
from .sqlengine import load_csv_database, run_query
from .stubserver import load_behavior, serve_stub
from .textprep import chunk_document, load_corpus_dir, load_corpus_jsonl


def _print_json(payload) -> None:
    print(json.dumps(payload, ensure_ascii=False, sort_keys=True))


def _discover_config(path_arg: str | None) -> Path:
    if path_arg:
        return Path(path_arg)
    env = os.environ.get(CONFIG_ENV_VAR)
    if env:
        return Path(env)
    default = Path(DEFAULT_CONFIG_NAME)
    if default.exists():
        return default
    raise QaRouterError(
        f"no config found: pass --config, set {CONFIG_ENV_VAR}, or create ./{DEFAULT_CONFIG_NAME}"
    )


def cmd_ingest(args) -> int:
    source = Path(args.input)
    docs = load_corpus_dir(source) if source.is_dir() else load_corpus_jsonl(source)
    count = 0
    with open(args.output, "w", encoding="utf-8") as out:
        for doc_id, text in docs:
            passage_set = chunk_document(doc_id, text, args.max_words)
            for passage in passage_set.passages:
                record = {
                    "doc_id": doc_id,
                    "passage_id": passage.passage_id,
                    "text": passage.text,
                    "word_count": passage.word_count,
                }
                out.write(json.dumps(record, ensure_ascii=False) + "\n")
                count += 1
    print(f"wrote {count} passages to {args.output}", file=sys.stderr)
    return 0


def cmd_index_build(args) -> int:
    pairs = []
    with open(args.passages, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                pairs.append((record["passage_id"], record["text"]))
    params = Bm25Params(k1=args.k1, b=args.b, idf_floor=not args.classic_idf)
    index = build_index_from_pairs(pairs, params)
    save_index(index, args.out)
    print(f"indexed {len(pairs)} passages into {args.out}", file=sys.stderr)
    return 0


def cmd_index_stats(args) -> int:
    _print_json(index_stats(load_index(args.index)))
    return 0


def cmd_train_classifier(args) -> int:
    corpus = load_labeled_csv(args.data)
    model = train_nb(corpus, smoothing_alpha=args.alpha)
    save_model(model, args.out)
    _print_json({
        "examples": len(corpus),
        "vocabulary_size": len(model.vocabulary),
        "model": str(args.out),
    })
    return 0


def cmd_crossval(args) -> int:
    corpus = load_labeled_csv(args.data)
    result = cross_validate(corpus, k=args.k, seed=args.seed, smoothing_alpha=args.alpha)
    _print_json({
        "folds": list(result.fold_f1),
        "mean": result.mean,
        "std": result.std,
        "skipped_folds": result.skipped_folds,
    })
    return 0


def _record_json(record) -> str:
    return json.dumps(record.to_dict(), ensure_ascii=False)


def cmd_ask(args) -> int:
    router = Router(load_config(_discover_config(args.config)))
    if args.question is not None:
        print(_record_json(router.answer(args.question)))
        return 0
    for line in sys.stdin:  # REPL: one question per line
        question = line.strip()
        if not question:
            continue
        print(_record_json(router.answer(question)), flush=True)
    return 0


def cmd_eval(args) -> int:
    router = Router(load_config(_discover_config(args.config)))
    with open(args.input, encoding="utf-8") as fh:
        items = [json.loads(line) for line in fh if line.strip()]
    records, _ = router.answer_batch(items)
    metric_config = MetricConfig(strip_articles=args.strip_articles)
    report = build_batch_report(items, records, metric_config)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as out:
            for record in records:
                out.write(_record_json(record) + "\n")
        print(f"wrote {len(records)} records to {args.output}", file=sys.stderr)
    _print_json(report)
    return 0


def cmd_sql(args) -> int:
    root = Path(args.db)
    database = load_csv_database(root / "schema.json", root)
    result = run_query(args.query, database)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.header:
        writer.writerow(result.headers)
    for row in result.rows:
        writer.writerow(["" if value is None else value for value in row])
    return 0


def cmd_spool_init(args) -> int:
    spool = init_spool(args.root)
    print(f"spool initialized at {spool.root}", file=sys.stderr)
    return 0


def cmd_serve_stub(args) -> int:
    spool = open_spool(args.spool)
    behavior = load_behavior(args.behavior)
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)
    handled = serve_stub(
        spool,
        args.role,
        behavior,
        consumer_id=args.consumer_id,
        poll_interval=args.poll,
        max_requests=args.max_requests,
        stale_after=args.stale_after,
        stop_event=stop,
    )
    print(f"served {handled} requests", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qa-router",
        description="Route questions to BM25+reader or text-to-SQL and answer them.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="chunk a corpus into passages")
    ingest.add_argument("--input", required=True, help="JSONL file or directory of .txt files")
    ingest.add_argument("--output", required=True, help="passages JSONL to write")
    ingest.add_argument("--max-words", type=int, default=100)
    ingest.set_defaults(func=cmd_ingest)

    index = commands.add_parser("index", help="build or inspect the BM25 index")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    build = index_sub.add_parser("build", help="build an index snapshot from passages")
    build.add_argument("--passages", required=True)
    build.add_argument("--out", required=True)
    build.add_argument("--k1", type=float, default=1.2)
    build.add_argument("--b", type=float, default=0.75)
    build.add_argument("--classic-idf", action="store_true",
                       help="use the classic idf (may go negative) instead of the floored variant")
    build.set_defaults(func=cmd_index_build)
    stats = index_sub.add_parser("stats", help="print index statistics as JSON")
    stats.add_argument("--index", required=True)
    stats.set_defaults(func=cmd_index_stats)

    train = commands.add_parser("train-classifier", help="train the routing model")
    train.add_argument("--data", required=True, help="CSV with header question,label,source")
    train.add_argument("--out", required=True)
    train.add_argument("--alpha", type=float, default=1.0)
    train.set_defaults(func=cmd_train_classifier)

    crossval = commands.add_parser("crossval", help="k-fold cross-validation of the router")
    crossval.add_argument("--data", required=True)
    crossval.add_argument("--k", type=int, default=10)
    crossval.add_argument("--seed", type=int, default=0)
    crossval.add_argument("--alpha", type=float, default=1.0)
    crossval.set_defaults(func=cmd_crossval)

    ask = commands.add_parser("ask", help="answer one question, or REPL from stdin")
    ask.add_argument("question", nargs="?", default=None)
    ask.add_argument("--config", default=None)
    ask.set_defaults(func=cmd_ask)

    eval_cmd = commands.add_parser("eval", help="run a batch and print the metric report")
    eval_cmd.add_argument("--input", required=True, help='JSONL with {"id","question","golds","route"}')
    eval_cmd.add_argument("--output", default=None, help="where to write answer records JSONL")
    eval_cmd.add_argument("--config", default=None)
    strip = eval_cmd.add_mutually_exclusive_group()
    strip.add_argument("--strip-articles", dest="strip_articles", action="store_true", default=True)
    strip.add_argument("--no-strip-articles", dest="strip_articles", action="store_false")
    eval_cmd.set_defaults(func=cmd_eval)

    sql = commands.add_parser("sql", help="run a query against a CSV-backed database")
    sql.add_argument("--db", required=True, help="directory with schema.json and one CSV per table")
    sql.add_argument("--query", required=True)
    sql.add_argument("--header", action="store_true", help="print the header row too")
    sql.set_defaults(func=cmd_sql)

    spool_init = commands.add_parser("spool-init", help="create the spool directory tree")
    spool_init.add_argument("--root", required=True)
    spool_init.set_defaults(func=cmd_spool_init)

    stub = commands.add_parser("serve-stub", help="serve one backend role with canned responses")
    stub.add_argument("--spool", required=True)
    stub.add_argument("--role", required=True, choices=["classifier", "reader", "nl2sql"])
    stub.add_argument("--behavior", required=True, help="JSON behavior file")
    stub.add_argument("--poll", type=float, default=0.05)
    stub.add_argument("--max-requests", type=int, default=None)
    stub.add_argument("--stale-after", type=float, default=None)
    stub.add_argument("--consumer-id", default=f"stub-{os.getpid()}")
    stub.set_defaults(func=cmd_serve_stub)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QaRouterError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
