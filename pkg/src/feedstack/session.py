"""Session state machine: every mutation is an event frame folded into state.

The pipeline functions here (append_message, set_toggle, the materials and
cue refresh steps) build frames and immediately fold them with
:func:`apply_frame`, so live state, persisted logs, and replays all go through
the exact same code path. Replay determinism falls out of that: fold the same
frames, get the same state.
"""

from __future__ import annotations

import json
import uuid
from typing import Any, Iterable, Optional

from . import gateway as gw
from .detection import Analyzer, analyze_message, lexicon_analyzer
from .model import (
    ChapterState,
    ChapterStatus,
    DesignArtifact,
    EventFrame,
    FrameType,
    Message,
    NotFoundError,
    PrincipleCatalog,
    Role,
    SessionState,
    Suggestion,
    ValidationError,
    bookmark_from_wire,
    bookmark_to_wire,
    catalog_from_wire,
    catalog_to_wire,
    chapter_from_wire,
    chapter_to_wire,
    materials_from_wire,
    materials_to_wire,
    message_from_wire,
    message_to_wire,
    span_from_wire,
    span_to_wire,
    suggestion_from_wire,
    suggestion_to_wire,
    validate_catalog,
)
from .scaffold import (
    compute_bookmarks,
    conversational_cues,
    emerging_topics,
    generate_materials,
    materials_variables,
    opacity_for_count,
    update_chapters,
)

EXPORT_SCHEMA_VERSION = "1"


def create_session(
    catalog: PrincipleCatalog,
    artifact: Optional[DesignArtifact] = None,
    *,
    session_id: Optional[str] = None,
    created_at: str = "",
) -> SessionState:
    """Seed a fresh session: one collapsed floor-opacity chapter per principle.

    This is the fold's starting point, not an event; the event log of a new
    session is empty.
    """
    validate_catalog(catalog)
    state = SessionState(
        session_id=session_id if session_id is not None else uuid.uuid4().hex,
        catalog=catalog,
        artifact=artifact,
        created_at=created_at,
    )
    for principle in catalog.principles:
        state.chapters[principle.id] = ChapterState(
            principle_id=principle.id,
            status=ChapterStatus.UNDISCOVERED,
            mention_count=0,
            opacity=opacity_for_count(0),
            collapsed=True,
            excerpt_refs=(),
            materials=None,
        )
    state.suggestions = emerging_topics(state)
    return state


def apply_frame(state: SessionState, frame: EventFrame) -> None:
    """Fold one frame into the state. The only place session state mutates."""
    if frame.seq != state.last_seq + 1:
        raise ValidationError(
            f"frame seq {frame.seq} does not follow last_seq {state.last_seq}"
        )
    payload = frame.payload
    if frame.type is FrameType.MESSAGE_ADDED:
        message = message_from_wire(payload["message"])
        if message.index != len(state.messages):
            raise ValidationError(
                f"message index {message.index} out of order at {len(state.messages)}"
            )
        state.messages.append(message)
    elif frame.type is FrameType.MENTIONS_ADDED:
        state.mentions.extend(span_from_wire(s) for s in payload["spans"])
    elif frame.type is FrameType.CHAPTER_UPDATED:
        chapter = chapter_from_wire(payload["chapter"])
        if chapter.principle_id not in state.chapters:
            raise ValidationError(f"chapter for unknown principle {chapter.principle_id!r}")
        state.chapters[chapter.principle_id] = chapter
    elif frame.type is FrameType.BOOKMARKS_UPDATED:
        state.bookmarks = [bookmark_from_wire(b) for b in payload["bookmarks"]]
    elif frame.type is FrameType.SUGGESTIONS_UPDATED:
        state.suggestions = [suggestion_from_wire(s) for s in payload["suggestions"]]
    elif frame.type is FrameType.MATERIALS_READY:
        principle_id = payload["principle_id"]
        current = state.chapters.get(principle_id)
        if current is None:
            raise ValidationError(f"materials for unknown principle {principle_id!r}")
        state.chapters[principle_id] = ChapterState(
            principle_id=current.principle_id,
            status=ChapterStatus.READY,
            mention_count=current.mention_count,
            opacity=current.opacity,
            collapsed=current.collapsed,
            excerpt_refs=current.excerpt_refs,
            materials=materials_from_wire(payload["materials"]),
        )
    elif frame.type is FrameType.TOGGLES_UPDATED:
        state.toggles = dict(payload["toggles"])
    elif frame.type is FrameType.ERROR:
        pass  # informational; no state change
    else:  # pragma: no cover - FrameType is closed
        raise ValidationError(f"unknown frame type {frame.type!r}")
    state.last_seq = frame.seq


def _emit(
    state: SessionState,
    frame_type: FrameType,
    payload: dict[str, Any],
    at: str,
) -> EventFrame:
    frame = EventFrame(
        seq=state.last_seq + 1,
        session_id=state.session_id,
        type=frame_type,
        payload=payload,
        at=at,
    )
    apply_frame(state, frame)
    return frame


def append_message(
    session: SessionState,
    role: Role,
    text: str,
    *,
    analyzers: Optional[Iterable[Analyzer]] = None,
    at: str = "",
) -> tuple[Message, list[EventFrame]]:
    """Run the per-message pipeline and fold its frames into the session.

    Frame order: message_added, mentions_added (when there are spans or
    warnings to carry), chapter_updated per changed chapter in catalog order,
    bookmarks_updated, suggestions_updated.
    """
    if not text.strip():
        raise ValidationError("message text is empty")
    index = len(session.messages)
    message = Message(id=f"m{index}", index=index, role=role, text=text, created_at=at)

    frames: list[EventFrame] = []
    frames.append(
        _emit(session, FrameType.MESSAGE_ADDED, {"message": message_to_wire(message)}, at)
    )

    warnings: list[str] = []
    spans = analyze_message(
        message,
        session.catalog,
        analyzers if analyzers is not None else (lexicon_analyzer,),
        warnings=warnings,
    )
    if spans or warnings:
        frames.append(
            _emit(
                session,
                FrameType.MENTIONS_ADDED,
                {
                    "message_id": message.id,
                    "spans": [span_to_wire(s) for s in spans],
                    "warnings": warnings,
                },
                at,
            )
        )

    for delta in update_chapters(session, spans):
        frames.append(
            _emit(
                session,
                FrameType.CHAPTER_UPDATED,
                {
                    "chapter": chapter_to_wire(delta.chapter),
                    "first_mention": delta.first_mention,
                },
                at,
            )
        )

    frames.append(
        _emit(
            session,
            FrameType.BOOKMARKS_UPDATED,
            {"bookmarks": [bookmark_to_wire(b) for b in compute_bookmarks(session)]},
            at,
        )
    )
    frames.append(
        _emit(
            session,
            FrameType.SUGGESTIONS_UPDATED,
            {"suggestions": [suggestion_to_wire(s) for s in _refreshed_suggestions(session)]},
            at,
        )
    )
    return message, frames


def _refreshed_suggestions(session: SessionState) -> list[Suggestion]:
    """Emerging topics recomputed now, existing cues carried over."""
    cues = [s for s in session.suggestions if s.kind.value == "conversational_cue"]
    return emerging_topics(session) + cues


def pending_material_principles(frames: Iterable[EventFrame]) -> list[str]:
    """Principles whose chapters were just discovered in these frames."""
    out: list[str] = []
    for frame in frames:
        if frame.type is FrameType.CHAPTER_UPDATED and frame.payload.get("first_mention"):
            out.append(frame.payload["chapter"]["principle_id"])
    return out


def materials_ready_frame(
    session: SessionState,
    principle_id: str,
    materials,
    *,
    at: str = "",
) -> EventFrame:
    """Fold a finished materials job into the session."""
    return _emit(
        session,
        FrameType.MATERIALS_READY,
        {"principle_id": principle_id, "materials": materials_to_wire(materials)},
        at,
    )


def suggestions_frame(
    session: SessionState,
    cues: Iterable[Suggestion],
    *,
    at: str = "",
) -> EventFrame:
    """Fold a suggestions frame: fresh emerging topics plus the given cues."""
    suggestions = emerging_topics(session) + list(cues)
    return _emit(
        session,
        FrameType.SUGGESTIONS_UPDATED,
        {"suggestions": [suggestion_to_wire(s) for s in suggestions]},
        at,
    )


def refresh_cues_frame(
    session: SessionState,
    config: gw.GatewayConfig,
    *,
    warnings: Optional[list[str]] = None,
    at: str = "",
    sleeper=None,
) -> EventFrame:
    """Recompute cues (and emerging topics) and fold a suggestions frame."""
    kwargs = {} if sleeper is None else {"sleeper": sleeper}
    cues = conversational_cues(session, config, warnings=warnings, **kwargs)
    return suggestions_frame(session, cues, at=at)


def error_frame(session: SessionState, code: str, detail: str, *, at: str = "") -> EventFrame:
    return _emit(session, FrameType.ERROR, {"code": code, "detail": detail}, at)


def set_toggle(session: SessionState, principle_id: str, enabled: bool) -> EventFrame:
    """Record a highlight toggle; emits (and folds) a toggles_updated frame."""
    if principle_id not in session.chapters:
        raise NotFoundError(f"unknown principle: {principle_id!r}")
    toggles = dict(session.toggles)
    toggles[principle_id] = bool(enabled)
    return _emit(session, FrameType.TOGGLES_UPDATED, {"toggles": toggles}, "")


def replay_transcript(
    catalog: PrincipleCatalog,
    transcript: list[tuple[str, str]],
    *,
    session_id: str = "replay",
    gateway_config: Optional[gw.GatewayConfig] = None,
    analyzers: Optional[Iterable[Analyzer]] = None,
) -> SessionState:
    """Deterministically rebuild a session from scripted (role, text) turns.

    Equivalent to create_session plus append_message per turn with the stub
    gateway, with materials generated synchronously at discovery and cues
    refreshed after each assistant turn. Timestamps stay empty so two replays
    of the same transcript are byte-identical after export.
    """
    config = gateway_config if gateway_config is not None else gw.GatewayConfig(mode="stub")
    state = create_session(catalog, session_id=session_id)
    for turn_index, turn in enumerate(transcript):
        try:
            role = Role(turn[0])
            _, frames = append_message(state, role, turn[1], analyzers=analyzers)
        except (ValidationError, ValueError) as exc:
            raise ValidationError(f"turn {turn_index}: {exc}") from exc
        for principle_id in pending_material_principles(frames):
            principle = catalog.get(principle_id)
            materials = generate_materials(
                principle,
                state,
                config,
                variables=materials_variables(principle, state),
            )
            materials_ready_frame(state, principle_id, materials)
        if role is Role.ASSISTANT:
            refresh_cues_frame(state, config)
    return state


# ---------------------------------------------------------------------------
# Canonical export
# ---------------------------------------------------------------------------

def export_session(session: SessionState) -> dict[str, Any]:
    """Canonical snapshot document.

    Key order is fixed, list orders are deterministic, chapters appear in
    catalog order, and timestamps are left out, so equal histories export to
    identical bytes.
    """
    messages = []
    for m in session.messages:
        wire = message_to_wire(m)
        del wire["created_at"]
        messages.append(wire)
    chapters = {
        p.id: chapter_to_wire(session.chapters[p.id]) for p in session.catalog.principles
    }
    return {
        "schema_version": EXPORT_SCHEMA_VERSION,
        "session_id": session.session_id,
        "catalog": catalog_to_wire(session.catalog),
        "messages": messages,
        "mentions": [span_to_wire(s) for s in session.mentions],
        "chapters": chapters,
        "bookmarks": [bookmark_to_wire(b) for b in session.bookmarks],
        "suggestions": [suggestion_to_wire(s) for s in session.suggestions],
    }


def export_json(session: SessionState) -> str:
    """The canonical serialization: compact, UTF-8, newline-terminated."""
    return json.dumps(export_session(session), ensure_ascii=False, separators=(",", ":")) + "\n"


def import_session(document: dict[str, Any]) -> SessionState:
    """Rebuild a state from an export document (test utility).

    The result compares equal to the exporting session on every exported
    field; timestamps and toggles are not part of the document and come back
    at their defaults.
    """
    if document.get("schema_version") != EXPORT_SCHEMA_VERSION:
        raise ValidationError(
            f"unsupported schema_version {document.get('schema_version')!r}"
        )
    catalog = catalog_from_wire(document["catalog"])
    state = create_session(catalog, session_id=document["session_id"])
    state.messages = [message_from_wire(m) for m in document["messages"]]
    state.mentions = [span_from_wire(s) for s in document["mentions"]]
    state.chapters = {
        pid: chapter_from_wire(c) for pid, c in document["chapters"].items()
    }
    state.bookmarks = [bookmark_from_wire(b) for b in document["bookmarks"]]
    state.suggestions = [suggestion_from_wire(s) for s in document["suggestions"]]
    return state
