"""Domain types for feedback sessions.

Everything here is plain data. Mutation happens only in :mod:`feedstack.session`,
which folds event frames over a :class:`SessionState`. Types that travel on the
wire carry ``to_wire`` / ``from_wire`` converters so frames, snapshots, and the
persistence log all share one JSON shape.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

# Principle ids double as wire keys and DOM hooks, so they stay slug-shaped.
_SLUG_RE = re.compile(r"^[a-z0-9]+(-[a-z0-9]+)*$")


class FeedstackError(Exception):
    """Base class for all library errors."""


class ValidationError(FeedstackError):
    """Input violates a documented precondition or invariant."""


class CatalogValidationError(ValidationError):
    """A principle catalog breaks one of its invariants."""


class NotFoundError(FeedstackError):
    """A referenced session, principle, or message does not exist."""


class NoTargetError(FeedstackError):
    """A navigation request has nothing to point at (zero mentions)."""


class Role(str, Enum):
    USER = "user"
    ASSISTANT = "assistant"


class ChapterStatus(str, Enum):
    UNDISCOVERED = "undiscovered"
    PENDING_MATERIALS = "pending_materials"
    READY = "ready"


class SuggestionKind(str, Enum):
    EMERGING_TOPIC = "emerging_topic"
    CONVERSATIONAL_CUE = "conversational_cue"


class FrameType(str, Enum):
    MESSAGE_ADDED = "message_added"
    MENTIONS_ADDED = "mentions_added"
    CHAPTER_UPDATED = "chapter_updated"
    BOOKMARKS_UPDATED = "bookmarks_updated"
    SUGGESTIONS_UPDATED = "suggestions_updated"
    MATERIALS_READY = "materials_ready"
    TOGGLES_UPDATED = "toggles_updated"
    ERROR = "error"


# Image types accepted for uploaded design artifacts.
ACCEPTED_IMAGE_TYPES = frozenset(
    {"image/png", "image/jpeg", "image/gif", "image/webp", "image/svg+xml"}
)


@dataclass(frozen=True)
class Principle:
    """One named design principle with its key-term vocabulary."""

    id: str
    name: str
    definition: str
    terms: tuple[str, ...]


@dataclass(frozen=True)
class PrincipleCatalog:
    """Ordered collection of principles; order is total and used for ranking."""

    version: str
    principles: tuple[Principle, ...]

    def ids(self) -> list[str]:
        return [p.id for p in self.principles]

    def get(self, principle_id: str) -> Principle:
        for p in self.principles:
            if p.id == principle_id:
                return p
        raise NotFoundError(f"unknown principle: {principle_id!r}")

    def order_of(self, principle_id: str) -> int:
        for i, p in enumerate(self.principles):
            if p.id == principle_id:
                return i
        raise NotFoundError(f"unknown principle: {principle_id!r}")


def validate_catalog(catalog: PrincipleCatalog) -> None:
    """Check catalog invariants, raising CatalogValidationError naming the offender.

    Term-to-principle conflicts are checked separately when the lexicon is
    built (see :func:`feedstack.detection.build_lexicon`).
    """
    if not catalog.principles:
        raise CatalogValidationError("catalog has no principles")
    seen: set[str] = set()
    for p in catalog.principles:
        if not _SLUG_RE.match(p.id):
            raise CatalogValidationError(f"principle id is not a slug: {p.id!r}")
        if p.id in seen:
            raise CatalogValidationError(f"duplicate principle id: {p.id!r}")
        seen.add(p.id)
        if not p.terms:
            raise CatalogValidationError(f"principle {p.id!r} has no terms")
        for term in p.terms:
            if not term.strip():
                raise CatalogValidationError(f"principle {p.id!r} has an empty term")


@dataclass(frozen=True)
class Message:
    id: str
    index: int
    role: Role
    text: str
    created_at: str  # ISO-8601; kept out of canonical exports


@dataclass(frozen=True)
class DesignArtifact:
    name: str
    media_type: str
    content_ref: str = ""


@dataclass(frozen=True)
class MentionSpan:
    """One key-term occurrence, addressed in code points, end-exclusive."""

    message_id: str
    principle_id: str
    start: int
    end: int
    matched_term: str


@dataclass(frozen=True)
class Materials:
    """The three learning sections attached to a discovered chapter.

    ``degraded`` marks content that came from the offline fallback after the
    model gateway failed; the sections themselves are still complete.
    """

    definition: str
    relation_to_design: str
    key_terms: tuple[tuple[str, str], ...]
    degraded: bool = False


@dataclass(frozen=True)
class ChapterState:
    principle_id: str
    status: ChapterStatus
    mention_count: int
    opacity: float
    collapsed: bool
    excerpt_refs: tuple[tuple[int, int], ...]  # (message_index, span index in message)
    materials: Optional[Materials] = None


@dataclass(frozen=True)
class Bookmark:
    principle_id: str
    message_index: int
    position: float


@dataclass(frozen=True)
class Suggestion:
    kind: SuggestionKind
    text: str
    principle_id: Optional[str]
    rank: int


@dataclass(frozen=True)
class EventFrame:
    """One ordered unit of the server-push protocol.

    ``payload`` is already wire-shaped JSON data, so frames serialize and fold
    without a second conversion layer.
    """

    seq: int
    session_id: str
    type: FrameType
    payload: dict[str, Any]
    at: str  # ISO-8601


@dataclass
class SessionState:
    """Materialized state of one feedback conversation.

    Mutated only by :func:`feedstack.session.apply_frame`; everything else
    treats it as read-only.
    """

    session_id: str
    catalog: PrincipleCatalog
    artifact: Optional[DesignArtifact]
    messages: list[Message] = field(default_factory=list)
    mentions: list[MentionSpan] = field(default_factory=list)
    chapters: dict[str, ChapterState] = field(default_factory=dict)
    bookmarks: list[Bookmark] = field(default_factory=list)
    suggestions: list[Suggestion] = field(default_factory=list)
    toggles: dict[str, bool] = field(default_factory=dict)
    last_seq: int = 0
    created_at: str = ""

    def toggle_enabled(self, principle_id: str) -> bool:
        # Untouched principles default to enabled.
        return self.toggles.get(principle_id, True)

    def message_by_id(self, message_id: str) -> Message:
        for m in self.messages:
            if m.id == message_id:
                return m
        raise NotFoundError(f"unknown message: {message_id!r}")

    def spans_for_message(self, message_id: str) -> list[MentionSpan]:
        return [s for s in self.mentions if s.message_id == message_id]


# ---------------------------------------------------------------------------
# Wire conversion
# ---------------------------------------------------------------------------

def principle_to_wire(p: Principle) -> dict[str, Any]:
    return {"id": p.id, "name": p.name, "definition": p.definition, "terms": list(p.terms)}


def principle_from_wire(d: dict[str, Any]) -> Principle:
    return Principle(
        id=d["id"],
        name=d["name"],
        definition=d["definition"],
        terms=tuple(d["terms"]),
    )


def catalog_to_wire(c: PrincipleCatalog) -> dict[str, Any]:
    return {"version": c.version, "principles": [principle_to_wire(p) for p in c.principles]}


def catalog_from_wire(d: dict[str, Any]) -> PrincipleCatalog:
    return PrincipleCatalog(
        version=d["version"],
        principles=tuple(principle_from_wire(p) for p in d["principles"]),
    )


def message_to_wire(m: Message) -> dict[str, Any]:
    return {
        "id": m.id,
        "index": m.index,
        "role": m.role.value,
        "text": m.text,
        "created_at": m.created_at,
    }


def message_from_wire(d: dict[str, Any]) -> Message:
    return Message(
        id=d["id"],
        index=d["index"],
        role=Role(d["role"]),
        text=d["text"],
        created_at=d.get("created_at", ""),
    )


def span_to_wire(s: MentionSpan) -> dict[str, Any]:
    return {
        "message_id": s.message_id,
        "principle_id": s.principle_id,
        "start": s.start,
        "end": s.end,
        "matched_term": s.matched_term,
    }


def span_from_wire(d: dict[str, Any]) -> MentionSpan:
    return MentionSpan(
        message_id=d["message_id"],
        principle_id=d["principle_id"],
        start=d["start"],
        end=d["end"],
        matched_term=d["matched_term"],
    )


def materials_to_wire(m: Materials) -> dict[str, Any]:
    return {
        "definition": m.definition,
        "relation_to_design": m.relation_to_design,
        "key_terms": [[t, g] for t, g in m.key_terms],
        "degraded": m.degraded,
    }


def materials_from_wire(d: dict[str, Any]) -> Materials:
    return Materials(
        definition=d["definition"],
        relation_to_design=d["relation_to_design"],
        key_terms=tuple((t, g) for t, g in d["key_terms"]),
        degraded=d.get("degraded", False),
    )


def chapter_to_wire(c: ChapterState) -> dict[str, Any]:
    return {
        "principle_id": c.principle_id,
        "status": c.status.value,
        "mention_count": c.mention_count,
        "opacity": round(c.opacity, 2),
        "collapsed": c.collapsed,
        "excerpt_refs": [[mi, si] for mi, si in c.excerpt_refs],
        "materials": materials_to_wire(c.materials) if c.materials else None,
    }


def chapter_from_wire(d: dict[str, Any]) -> ChapterState:
    mats = d.get("materials")
    return ChapterState(
        principle_id=d["principle_id"],
        status=ChapterStatus(d["status"]),
        mention_count=d["mention_count"],
        opacity=d["opacity"],
        collapsed=d["collapsed"],
        excerpt_refs=tuple((mi, si) for mi, si in d["excerpt_refs"]),
        materials=materials_from_wire(mats) if mats else None,
    )


def bookmark_to_wire(b: Bookmark) -> dict[str, Any]:
    return {"principle_id": b.principle_id, "message_index": b.message_index, "position": b.position}


def bookmark_from_wire(d: dict[str, Any]) -> Bookmark:
    return Bookmark(
        principle_id=d["principle_id"],
        message_index=d["message_index"],
        position=d["position"],
    )


def suggestion_to_wire(s: Suggestion) -> dict[str, Any]:
    return {"kind": s.kind.value, "text": s.text, "principle_id": s.principle_id, "rank": s.rank}


def suggestion_from_wire(d: dict[str, Any]) -> Suggestion:
    return Suggestion(
        kind=SuggestionKind(d["kind"]),
        text=d["text"],
        principle_id=d.get("principle_id"),
        rank=d["rank"],
    )


def artifact_to_wire(a: DesignArtifact) -> dict[str, Any]:
    return {"name": a.name, "media_type": a.media_type, "content_ref": a.content_ref}


def artifact_from_wire(d: dict[str, Any]) -> DesignArtifact:
    return DesignArtifact(
        name=d["name"],
        media_type=d["media_type"],
        content_ref=d.get("content_ref", ""),
    )


def frame_to_wire(f: EventFrame) -> dict[str, Any]:
    return {
        "seq": f.seq,
        "session_id": f.session_id,
        "type": f.type.value,
        "payload": f.payload,
        "at": f.at,
    }


def frame_from_wire(d: dict[str, Any]) -> EventFrame:
    return EventFrame(
        seq=d["seq"],
        session_id=d["session_id"],
        type=FrameType(d["type"]),
        payload=d["payload"],
        at=d["at"],
    )
