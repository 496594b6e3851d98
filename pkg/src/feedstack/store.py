"""Event-sourced persistence: one JSON-lines log file per session.

A session on disk is two files in the storage directory:

* ``<session_id>.meta.json``: catalog, artifact, creation time. Written once
  at creation (and rewritten if the artifact changes); its existence is what
  makes a session id known.
* ``<session_id>.events.jsonl``: the append-only frame log, one frame per
  line in seq order.

Loading folds the log over a fresh state. A crash between append and ack can
leave a duplicated trailing frame, so frames whose seq is not ahead of the
fold are skipped.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path
from typing import Optional, Union

from .model import (
    DesignArtifact,
    EventFrame,
    FeedstackError,
    NotFoundError,
    SessionState,
    artifact_from_wire,
    artifact_to_wire,
    catalog_from_wire,
    catalog_to_wire,
    frame_from_wire,
    frame_to_wire,
)
from .session import apply_frame, create_session

_SESSION_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")


class StorageError(FeedstackError):
    """I/O or corruption problem underneath the session store."""


def _check_session_id(session_id: str) -> None:
    # Session ids become file names; keep them out of path-traversal territory.
    if not _SESSION_ID_RE.match(session_id):
        raise StorageError(f"session id not storable: {session_id!r}")


class SessionStore:
    """File-backed store for session logs and metadata."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _meta_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.meta.json"

    def _events_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.events.jsonl"

    def exists(self, session_id: str) -> bool:
        return _SESSION_ID_RE.match(session_id) is not None and self._meta_path(
            session_id
        ).is_file()

    def list_sessions(self) -> list[str]:
        return sorted(p.name[: -len(".meta.json")] for p in self.root.glob("*.meta.json"))

    def create(self, state: SessionState) -> None:
        """Persist a fresh session's metadata; the log starts empty."""
        _check_session_id(state.session_id)
        if self._meta_path(state.session_id).exists():
            # Overwriting meta while an event log survives would splice two
            # sessions together.
            raise StorageError(f"session already exists: {state.session_id!r}")
        self.write_meta(state)
        self._events_path(state.session_id).touch()

    def write_meta(self, state: SessionState) -> None:
        _check_session_id(state.session_id)
        meta = {
            "session_id": state.session_id,
            "created_at": state.created_at,
            "catalog": catalog_to_wire(state.catalog),
            "artifact": artifact_to_wire(state.artifact) if state.artifact else None,
        }
        path = self._meta_path(state.session_id)
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(meta, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)

    def persist_event(self, frame: EventFrame) -> None:
        """Append one frame to its session's log, flushed to disk."""
        _check_session_id(frame.session_id)
        line = json.dumps(frame_to_wire(frame), ensure_ascii=False, separators=(",", ":"))
        try:
            with open(self._events_path(frame.session_id), "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise StorageError(f"could not append frame: {exc}") from exc

    def read_frames(self, session_id: str, from_seq: int = 0) -> list[EventFrame]:
        """All persisted frames with seq > from_seq, deduplicated, in order."""
        _check_session_id(session_id)
        path = self._events_path(session_id)
        if not path.is_file():
            return []
        frames: list[EventFrame] = []
        last = from_seq
        try:
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    frame = frame_from_wire(json.loads(line))
                    if frame.seq <= last:
                        continue  # duplicate from a crash between append and ack
                    frames.append(frame)
                    last = frame.seq
        except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
            raise StorageError(f"unreadable event log for {session_id!r}: {exc}") from exc
        return frames

    def load_session(self, session_id: str) -> SessionState:
        """Rebuild a session by folding its persisted log."""
        if not self.exists(session_id):
            raise NotFoundError(f"unknown session: {session_id!r}")
        try:
            meta = json.loads(self._meta_path(session_id).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StorageError(f"unreadable metadata for {session_id!r}: {exc}") from exc
        artifact: Optional[DesignArtifact] = None
        if meta.get("artifact"):
            artifact = artifact_from_wire(meta["artifact"])
        state = create_session(
            catalog_from_wire(meta["catalog"]),
            artifact,
            session_id=session_id,
            created_at=meta.get("created_at", ""),
        )
        for frame in self.read_frames(session_id):
            apply_frame(state, frame)
        return state
