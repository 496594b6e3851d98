"""Scaffold engine: chapters, bookmarks, navigation, highlights, suggestions.

These functions compute the structured layers that sit on top of the raw
conversation. They are pure with respect to :class:`SessionState` (nothing
here mutates the state; the session pipeline turns the returned values into
event frames and folds them in).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Callable, Optional

from . import gateway as gw
from .model import (
    Bookmark,
    ChapterState,
    ChapterStatus,
    Materials,
    MentionSpan,
    NoTargetError,
    NotFoundError,
    Principle,
    Role,
    SessionState,
    Suggestion,
    SuggestionKind,
    ValidationError,
)

OPACITY_FLOOR = 0.30
OPACITY_STEP = 0.14
OPACITY_CAP = 1.0

CUE_LIMIT = 3


def opacity_for_count(mention_count: int) -> float:
    """Chapter opacity for a mention count: affine with a floor and a cap.

    Rounded to 2 decimal places, which is also the wire precision; the raw
    affine value never sits more than a hair from the 2-decimal grid, so the
    rounding is exact for practical purposes.
    """
    if mention_count < 0:
        raise ValidationError("mention_count must be non-negative")
    return round(min(OPACITY_CAP, OPACITY_FLOOR + OPACITY_STEP * mention_count), 2)


@dataclass(frozen=True)
class ChapterDelta:
    """One chapter's new state after a message, plus whether it was just found."""

    principle_id: str
    chapter: ChapterState
    first_mention: bool


def update_chapters(session: SessionState, new_spans: list[MentionSpan]) -> list[ChapterDelta]:
    """Fold a message's spans into the affected chapters.

    Returns one delta per affected principle, in catalog order. The spans must
    belong to the most recently appended message (excerpt references index into
    that message's span list).
    """
    if not new_spans:
        return []
    for span in new_spans:
        if span.principle_id not in session.chapters:
            raise ValidationError(f"span references unknown principle {span.principle_id!r}")

    message_id = new_spans[0].message_id
    message = session.message_by_id(message_id)
    per_principle: dict[str, list[int]] = {}
    for position, span in enumerate(new_spans):
        if span.message_id != message_id:
            raise ValidationError("spans passed to update_chapters span multiple messages")
        per_principle.setdefault(span.principle_id, []).append(position)

    deltas: list[ChapterDelta] = []
    for principle in session.catalog.principles:
        positions = per_principle.get(principle.id)
        if positions is None:
            continue
        current = session.chapters[principle.id]
        count = current.mention_count + len(positions)
        first = current.status is ChapterStatus.UNDISCOVERED
        status = ChapterStatus.PENDING_MATERIALS if first else current.status
        refs = current.excerpt_refs + tuple((message.index, p) for p in positions)
        deltas.append(
            ChapterDelta(
                principle_id=principle.id,
                chapter=ChapterState(
                    principle_id=principle.id,
                    status=status,
                    mention_count=count,
                    opacity=opacity_for_count(count),
                    collapsed=current.collapsed,
                    excerpt_refs=refs,
                    materials=current.materials,
                ),
                first_mention=first,
            )
        )
    return deltas


def _parse_materials(raw: str) -> Optional[Materials]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict):
        return None
    definition = data.get("definition")
    relation = data.get("relation_to_design")
    key_terms = data.get("key_terms")
    if not (isinstance(definition, str) and definition.strip()):
        return None
    if not (isinstance(relation, str) and relation.strip()):
        return None
    if not isinstance(key_terms, list) or not key_terms:
        return None
    pairs: list[tuple[str, str]] = []
    for item in key_terms:
        if not (isinstance(item, (list, tuple)) and len(item) == 2):
            return None
        term, gloss = item
        if not (isinstance(term, str) and isinstance(gloss, str)):
            return None
        pairs.append((term, gloss))
    return Materials(
        definition=definition,
        relation_to_design=relation,
        key_terms=tuple(pairs),
    )


def materials_variables(principle: Principle, session: SessionState) -> dict[str, str]:
    """Snapshot the template variables for a materials request.

    Taken at enqueue time so the generated content reflects the state at
    discovery, whatever happens while the job waits.
    """
    chapter = session.chapters[principle.id]
    first_index = chapter.excerpt_refs[0][0] if chapter.excerpt_refs else 0
    return {
        "name": principle.name,
        "definition": principle.definition,
        "mention_count": str(chapter.mention_count),
        "first_message_index": str(first_index),
        "terms": json.dumps(list(principle.terms), ensure_ascii=False),
    }


def materials_for_variables(
    variables: dict[str, str],
    config: gw.GatewayConfig,
    *,
    sleeper: Callable[[float], None] = time.sleep,
) -> Materials:
    """Run the materials completion for already-pinned variables.

    The gateway call retries internally; if it still fails, or returns
    something unusable, the stub content is used and the result is marked
    degraded. Always returns complete materials.
    """
    request = gw.CompletionRequest(
        template_id=gw.TemplateId.MATERIALS,
        variables=variables,
    )
    degraded = False
    try:
        raw = gw.complete(request, config, sleeper=sleeper)
    except gw.GatewayError:
        raw = gw.stub_completion(request)
        degraded = True
    materials = _parse_materials(raw)
    if materials is None:
        materials = _parse_materials(gw.stub_completion(request))
        degraded = True
    assert materials is not None  # the stub always emits the full shape
    if degraded:
        materials = Materials(
            definition=materials.definition,
            relation_to_design=materials.relation_to_design,
            key_terms=materials.key_terms,
            degraded=True,
        )
    return materials


def generate_materials(
    principle: Principle,
    session: SessionState,
    config: gw.GatewayConfig,
    *,
    variables: Optional[dict[str, str]] = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> Materials:
    """Produce the three chapter sections for a discovered principle."""
    chapter = session.chapters.get(principle.id)
    if chapter is None or chapter.mention_count < 1:
        raise ValidationError(f"principle {principle.id!r} has no mentions yet")
    return materials_for_variables(
        variables if variables is not None else materials_variables(principle, session),
        config,
        sleeper=sleeper,
    )


def compute_bookmarks(session: SessionState) -> list[Bookmark]:
    """One marker per (principle, message) pair that has at least one span.

    Positions are fractions of the scroll range and shift as the conversation
    grows, so the whole list is recomputed from scratch each time.
    """
    total = len(session.messages)
    if total == 0:
        return []
    index_by_id = {m.id: m.index for m in session.messages}
    pairs: set[tuple[str, int]] = set()
    for span in session.mentions:
        pairs.add((span.principle_id, index_by_id[span.message_id]))
    denominator = max(1, total - 1)
    order = {p.id: i for i, p in enumerate(session.catalog.principles)}
    return [
        Bookmark(
            principle_id=principle_id,
            message_index=message_index,
            position=message_index / denominator,
        )
        for principle_id, message_index in sorted(
            pairs, key=lambda pair: (pair[1], order.get(pair[0], len(order)))
        )
    ]


@dataclass(frozen=True)
class ExpandDirective:
    """Instruction to the UI: open this chapter's accordion."""

    action: str
    principle_id: str


@dataclass(frozen=True)
class JumpTarget:
    message_index: int
    directive: ExpandDirective


def jump_target(session: SessionState, principle_id: str) -> JumpTarget:
    """Where a bookmark click lands: the most recent mention, chapter opened."""
    if principle_id not in session.chapters:
        raise NotFoundError(f"unknown principle: {principle_id!r}")
    index_by_id = {m.id: m.index for m in session.messages}
    indices = [
        index_by_id[span.message_id]
        for span in session.mentions
        if span.principle_id == principle_id
    ]
    if not indices:
        raise NoTargetError(f"principle {principle_id!r} has no mentions to jump to")
    return JumpTarget(
        message_index=max(indices),
        directive=ExpandDirective(action="expand_chapter", principle_id=principle_id),
    )


def visible_spans(session: SessionState, message_id: str) -> list[MentionSpan]:
    """A message's spans filtered to principles whose highlight toggle is on."""
    session.message_by_id(message_id)  # not-found check
    return [
        span
        for span in session.mentions
        if span.message_id == message_id and session.toggle_enabled(span.principle_id)
    ]


def emerging_topics(session: SessionState) -> list[Suggestion]:
    """One nudge per still-undiscussed principle, in catalog order."""
    out: list[Suggestion] = []
    for principle in session.catalog.principles:
        chapter = session.chapters[principle.id]
        if chapter.mention_count == 0:
            out.append(
                Suggestion(
                    kind=SuggestionKind.EMERGING_TOPIC,
                    text=f"What about {principle.name}?",
                    principle_id=principle.id,
                    rank=len(out),
                )
            )
    return out


def _cue_texts_from_reply(raw: str) -> Optional[list[str]]:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, list):
        return None
    texts = [item for item in data if isinstance(item, str) and item.strip()]
    return texts or None


def cues_for_principle(
    principle: Principle,
    transcript: str,
    config: gw.GatewayConfig,
    *,
    warnings: Optional[list[str]] = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> list[Suggestion]:
    """Run the cue completion for an already-pinned principle and transcript.

    On gateway failure the deterministic stub texts are used and a warning is
    recorded; the cue count never exceeds the limit whatever the model says.
    """
    sink = warnings if warnings is not None else []
    request = gw.CompletionRequest(
        template_id=gw.TemplateId.CUES,
        variables={"name": principle.name, "transcript": transcript},
    )
    try:
        raw = gw.complete(request, config, sleeper=sleeper)
    except gw.GatewayError as exc:
        sink.append(f"cue generation degraded to stub: {exc}")
        raw = gw.stub_completion(request)
    texts = _cue_texts_from_reply(raw)
    if texts is None:
        sink.append("cue reply was unusable; degraded to stub")
        texts = _cue_texts_from_reply(gw.stub_completion(request)) or []
    return [
        Suggestion(
            kind=SuggestionKind.CONVERSATIONAL_CUE,
            text=text,
            principle_id=principle.id,
            rank=rank,
        )
        for rank, text in enumerate(texts[:CUE_LIMIT])
    ]


def cue_transcript_tail(session: SessionState) -> str:
    """The last few turns, flattened for the cue prompt."""
    tail = session.messages[-4:]
    return "\n".join(f"{m.role.value}: {m.text}" for m in tail)


def conversational_cues(
    session: SessionState,
    config: gw.GatewayConfig,
    *,
    warnings: Optional[list[str]] = None,
    sleeper: Callable[[float], None] = time.sleep,
) -> list[Suggestion]:
    """Up to three follow-up questions tied to the last-mentioned principle.

    Empty until there is an assistant message and at least one mention.
    """
    if not any(m.role is Role.ASSISTANT for m in session.messages):
        return []
    if not session.mentions:
        return []
    principle = session.catalog.get(session.mentions[-1].principle_id)
    return cues_for_principle(
        principle,
        cue_transcript_tail(session),
        config,
        warnings=warnings,
        sleeper=sleeper,
    )
