"""Command line entry points: annotate, replay, serve.

Exit codes follow the usual scripting conventions: 0 success, 1 runtime
failure, 2 unparseable input (with line/column where available), 64 usage
error, 78 bad configuration. Data goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from pathlib import Path
from typing import Optional

import httpx

from . import __version__
from .catalog import default_catalog, load_catalog
from .config import ConfigError, ServiceConfig, load_config
from .gateway import ENV_BASE_URL, GatewayConfig
from .model import CatalogValidationError, FeedstackError, ValidationError
from .session import export_json, replay_transcript

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INPUT = 2
EXIT_USAGE = 64
EXIT_CONFIG = 78

SEED_TIMEOUT_S = 60.0


class _Parser(argparse.ArgumentParser):
    """argparse with the 64 exit code instead of the default 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="feedstack", description="Layered design-feedback sessions")
    parser.add_argument("--version", action="version", version=f"feedstack {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    annotate = sub.add_parser("annotate", parents=[], help="annotate a transcript offline")
    annotate.add_argument("--in", dest="infile", required=True, help="transcript JSON file")
    annotate.add_argument("--lexicon", dest="lexicon", default="", help="catalog/lexicon JSON file")
    annotate.add_argument("--out", dest="outfile", default="-", help="output path or - for stdout")
    annotate.add_argument("--session-id", dest="session_id", default="replay")

    replay = sub.add_parser("replay", help="replay a transcript; optionally seed a live service")
    replay.add_argument("--in", dest="infile", required=True, help="transcript JSON file")
    replay.add_argument("--export", dest="export", default="-", help="output path or - for stdout")
    replay.add_argument("--lexicon", dest="lexicon", default="", help="catalog/lexicon JSON file")
    replay.add_argument("--session-id", dest="session_id", default="replay")
    replay.add_argument(
        "--seed-session",
        dest="seed",
        default="",
        help="base URL of a running service to seed with the user turns",
    )

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument("--config", dest="config", default="", help="JSON config file")
    serve.add_argument("--llm", choices=["stub", "live"], default=None)
    return parser


def _fail(message: str, code: int) -> int:
    print(f"feedstack: {message}", file=sys.stderr)
    return code


def _load_transcript(path: str) -> list[tuple[str, str]]:
    """Read a {"messages": [{role, text}]} file into (role, text) turns."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _InputError(f"cannot read transcript: {exc}")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise _InputError(
            f"transcript is not valid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )
    if not isinstance(data, dict) or not isinstance(data.get("messages"), list):
        raise _InputError("transcript must be an object with a messages array")
    turns: list[tuple[str, str]] = []
    for i, item in enumerate(data["messages"]):
        if not isinstance(item, dict):
            raise _InputError(f"message {i} is not an object")
        role = item.get("role")
        text = item.get("text")
        if role not in ("user", "assistant"):
            raise _InputError(f"message {i} has bad role {role!r}")
        if not isinstance(text, str):
            raise _InputError(f"message {i} has no text")
        turns.append((role, text))
    return turns


class _InputError(Exception):
    pass


def _load_catalog_arg(path: str):
    if not path:
        return default_catalog()
    try:
        return load_catalog(path)
    except CatalogValidationError as exc:
        raise _InputError(f"bad catalog file: {exc}")
    except OSError as exc:
        raise _InputError(f"cannot read catalog: {exc}")


def _write_output(payload: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(payload)
    else:
        Path(path).write_text(payload, encoding="utf-8")


def _replay_to_export(args) -> int:
    """Shared body of annotate and local replay."""
    try:
        catalog = _load_catalog_arg(args.lexicon)
        turns = _load_transcript(args.infile)
        state = replay_transcript(catalog, turns, session_id=args.session_id)
    except _InputError as exc:
        return _fail(str(exc), EXIT_INPUT)
    except ValidationError as exc:
        return _fail(str(exc), EXIT_INPUT)
    outfile = args.outfile if hasattr(args, "outfile") else args.export
    _write_output(export_json(state), outfile)
    return EXIT_OK


def _poll_snapshot(client: httpx.Client, base: str, session_id: str, want_messages: int) -> dict:
    """Wait until the service settles: all messages in, no pending jobs."""
    deadline = time.monotonic() + SEED_TIMEOUT_S
    while True:
        snapshot = client.get(f"{base}/v1/sessions/{session_id}").json()
        if len(snapshot["messages"]) >= want_messages and snapshot["pending_jobs"] == 0:
            return snapshot
        if time.monotonic() > deadline:
            raise TimeoutError(
                f"service did not settle: {len(snapshot['messages'])}/{want_messages} messages,"
                f" {snapshot['pending_jobs']} pending jobs"
            )
        time.sleep(0.05)


def _seed_session(base: str, turns: list[tuple[str, str]]) -> tuple[str, bytes]:
    """Drive a live service through the transcript's user turns.

    The service generates the assistant turns itself, so the transcript must
    alternate user/assistant starting with a user turn for the file and the
    service to tell the same story.
    """
    for i, (role, _) in enumerate(turns):
        expected = "user" if i % 2 == 0 else "assistant"
        if role != expected:
            raise ValueError(
                f"--seed-session needs an alternating user-first transcript; "
                f"turn {i} is {role!r}"
            )
    base = base.rstrip("/")
    with httpx.Client(timeout=10.0) as client:
        created = client.post(f"{base}/v1/sessions", json={})
        created.raise_for_status()
        session_id = created.json()["session_id"]
        done = 0
        for role, text in turns:
            if role != "user":
                continue
            response = client.post(
                f"{base}/v1/sessions/{session_id}/messages", json={"text": text}
            )
            response.raise_for_status()
            done += 2  # the user turn plus the assistant reply it triggers
            _poll_snapshot(client, base, session_id, done)
        export = client.get(f"{base}/v1/sessions/{session_id}/export")
        export.raise_for_status()
        return session_id, export.content


def cmd_annotate(args) -> int:
    return _replay_to_export(args)


def cmd_replay(args) -> int:
    if not args.seed:
        return _replay_to_export(args)
    try:
        catalog = _load_catalog_arg(args.lexicon)
        turns = _load_transcript(args.infile)
    except _InputError as exc:
        return _fail(str(exc), EXIT_INPUT)
    try:
        session_id, service_export = _seed_session(args.seed, turns)
    except (httpx.HTTPError, TimeoutError, ValueError) as exc:
        return _fail(f"seeding failed: {exc}", EXIT_RUNTIME)
    try:
        state = replay_transcript(catalog, turns, session_id=session_id)
    except ValidationError as exc:
        return _fail(str(exc), EXIT_INPUT)
    local_export = export_json(state)
    if local_export.encode("utf-8") != service_export:
        return _fail(
            "service export differs from local replay (transcript assistant turns"
            " probably do not match the service's gateway output)",
            EXIT_RUNTIME,
        )
    _write_output(local_export, args.export)
    print(f"feedstack: seeded session {session_id}; exports match", file=sys.stderr)
    return EXIT_OK


def _port_free(port: int) -> bool:
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as probe:
        try:
            probe.bind(("127.0.0.1", port))
        except OSError:
            return False
    return True


def cmd_serve(args) -> int:
    import os

    import uvicorn

    from .service import create_app

    if args.config:
        try:
            config = load_config(args.config)
        except ConfigError as exc:
            return _fail(str(exc), EXIT_CONFIG)
    else:
        config = ServiceConfig()

    gateway = config.gateway
    if args.llm is not None and args.llm != gateway.mode:
        if args.llm == "live":
            endpoint = gateway.endpoint or os.environ.get(ENV_BASE_URL, "")
            if not endpoint:
                return _fail(
                    f"live gateway needs an endpoint (config or {ENV_BASE_URL})", EXIT_CONFIG
                )
            gateway = GatewayConfig(
                mode="live",
                endpoint=endpoint,
                api_key_ref=gateway.api_key_ref,
                timeout_ms=gateway.timeout_ms,
                max_retries=gateway.max_retries,
                backoff_base_ms=gateway.backoff_base_ms,
            )
        else:
            gateway = GatewayConfig(mode="stub")
    if gateway.mode == "live" and not gateway.resolve_api_key():
        return _fail(f"live gateway needs {gateway.api_key_ref} set", EXIT_CONFIG)

    port = args.port if args.port is not None else config.port
    config = ServiceConfig(
        port=port,
        storage_dir=config.storage_dir,
        catalog_path=config.catalog_path,
        gateway=gateway,
    )
    if not _port_free(config.port):
        return _fail(f"port {config.port} is already in use", EXIT_RUNTIME)

    try:
        app = create_app(config)
    except FeedstackError as exc:
        return _fail(str(exc), EXIT_CONFIG)
    uvicorn.run(app, host="127.0.0.1", port=config.port, log_level="warning")
    return EXIT_OK


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.command == "annotate":
        return cmd_annotate(args)
    if args.command == "replay":
        return cmd_replay(args)
    if args.command == "serve":
        return cmd_serve(args)
    return EXIT_USAGE  # pragma: no cover - argparse enforces the choices


if __name__ == "__main__":
    sys.exit(main())
