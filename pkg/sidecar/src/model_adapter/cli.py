"""Command line mirroring AdapterConfig."""

from __future__ import annotations

import argparse
import signal
import sys
import threading

from . import __version__
from .adapter import AdapterConfig, serve
from .models import BackendUnavailable, load_backend
from .protocol import ROLES, SpoolMissing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qa-model-adapter",
        description="Serve one backend role (classifier/reader/nl2sql) over a qa-router spool.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--spool", required=True, help="spool root (must already be initialized)")
    parser.add_argument("--role", required=True, choices=list(ROLES))
    parser.add_argument("--model", default="stub",
                        help='"stub" or "<scheme>:<spec>" for a registered model backend')
    parser.add_argument("--stub-behavior", default=None, help="JSON behavior file for stub mode")
    parser.add_argument("--poll", type=float, default=0.1, help="inbox poll interval in seconds")
    parser.add_argument("--stale-after", type=float, default=None,
                        help="sweep abandoned claims older than this many seconds")
    parser.add_argument("--consumer-id", default="")
    parser.add_argument("--max-requests", type=int, default=None)
    parser.add_argument("--max-seq-len", type=int, default=512,
                        help="informational: context window advertised to model wrappers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(
        spool_root=args.spool,
        role=args.role,
        model=args.model,
        stub_behavior=args.stub_behavior,
        poll_interval=args.poll,
        stale_after=args.stale_after,
        consumer_id=args.consumer_id,
        max_requests=args.max_requests,
        max_sequence_length=args.max_seq_len,
    )
    stop = threading.Event()

    def on_signal(signum, frame):
        stop.set()

    signal.signal(signal.SIGINT, on_signal)
    signal.signal(signal.SIGTERM, on_signal)

    try:
        handler = load_backend(config.role, config.model, config.stub_behavior)
        handled = serve(config, handler, stop_event=stop)
    except (BackendUnavailable, SpoolMissing, OSError, ValueError) as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    print(f"served {handled} requests", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
