"""Key-term mention detection.

The lexicon route is deterministic: a case-insensitive, whole-word,
leftmost-longest scanner over the message text. Additional analyzers (a model
route) can propose more spans; :func:`merge_results` folds everything into one
non-overlapping list with the lexicon winning conflicts. Analyzer failures
degrade to the remaining analyzers and a recorded warning; they never fail the
message.

Offsets are code-point indices into the original text, end-exclusive. Case
folding happens per code point and only when the fold keeps length 1, so the
folded text lines up with the original character for character and offsets
transfer directly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, Iterable, Optional

from .model import MentionSpan, Message, PrincipleCatalog, ValidationError


def _fold1(ch: str) -> str:
    """Casefold one code point, keeping the original if the fold grows."""
    f = ch.casefold()
    return f if len(f) == 1 else ch


def fold_text(text: str) -> str:
    """Length-preserving casefold of a whole string."""
    return "".join(_fold1(ch) for ch in text)


@dataclass(frozen=True)
class LexiconEntry:
    folded: str
    term: str  # as authored in the catalog
    principle_id: str
    catalog_order: int


@dataclass(frozen=True)
class Lexicon:
    """Compiled term table for the scanner.

    ``by_first`` maps the first folded code point of each term to its entries,
    longest first so the scanner can take the first hit and be done.
    """

    entries: tuple[LexiconEntry, ...]
    by_first: dict[str, tuple[LexiconEntry, ...]]
    principle_ids: frozenset[str]
    catalog_order: dict[str, int]


@lru_cache(maxsize=8)
def build_lexicon(catalog: PrincipleCatalog) -> Lexicon:
    """Compile a catalog's terms into a scanner table.

    Terms are folded once here. A term that two principles both claim (after
    folding) is rejected because a span must name exactly one principle.
    """
    entries: list[LexiconEntry] = []
    claimed: dict[str, str] = {}
    order_map: dict[str, int] = {}
    for order, principle in enumerate(catalog.principles):
        order_map[principle.id] = order
        for term in principle.terms:
            folded = fold_text(term)
            if not folded:
                raise ValidationError(f"principle {principle.id!r} has an empty term")
            owner = claimed.get(folded)
            if owner is not None and owner != principle.id:
                raise ValidationError(
                    f"term {term!r} claimed by both {owner!r} and {principle.id!r}"
                )
            if owner is None:
                claimed[folded] = principle.id
                entries.append(
                    LexiconEntry(
                        folded=folded,
                        term=term,
                        principle_id=principle.id,
                        catalog_order=order,
                    )
                )
    # Longest first so the scanner's first substring hit is the longest one;
    # catalog order then term text break exact-length ties deterministically.
    by_first: dict[str, list[LexiconEntry]] = {}
    for entry in entries:
        by_first.setdefault(entry.folded[0], []).append(entry)
    frozen = {
        first: tuple(sorted(group, key=lambda e: (-len(e.folded), e.catalog_order, e.term)))
        for first, group in by_first.items()
    }
    return Lexicon(
        entries=tuple(entries),
        by_first=frozen,
        principle_ids=frozenset(claimed.values()),
        catalog_order=order_map,
    )


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def scan_text(text: str, lexicon: Lexicon, message_id: str = "") -> list[MentionSpan]:
    """Scan raw text for catalog terms.

    Whole-word only: the code points adjacent to a match must be absent
    (string edge) or non-alphanumeric, judged on the folded text. Matches are
    leftmost-longest and never overlap. Multi-word terms require the exact
    single-space form; other whitespace between the words does not match.
    """
    folded = fold_text(text)
    n = len(folded)
    spans: list[MentionSpan] = []
    i = 0
    while i < n:
        candidates = lexicon.by_first.get(folded[i])
        if candidates and (i == 0 or not _is_word_char(folded[i - 1])):
            matched = False
            for entry in candidates:
                end = i + len(entry.folded)
                if end > n or folded[i:end] != entry.folded:
                    continue
                if end < n and _is_word_char(folded[end]):
                    continue
                spans.append(
                    MentionSpan(
                        message_id=message_id,
                        principle_id=entry.principle_id,
                        start=i,
                        end=end,
                        matched_term=entry.term,
                    )
                )
                i = end
                matched = True
                break
            if matched:
                continue
        i += 1
    return spans


def detect_mentions_lexicon(message: Message, lexicon: Lexicon) -> list[MentionSpan]:
    """Lexicon route for one message; output sorted by start, non-overlapping."""
    return scan_text(message.text, lexicon, message.id)


class AnalyzerSource(str, Enum):
    LEXICON = "lexicon"
    LLM = "llm"


@dataclass(frozen=True)
class AnalyzerResult:
    """One analyzer's proposed spans."""

    spans: tuple[MentionSpan, ...]
    source: AnalyzerSource


# An analyzer maps one message (plus the catalog) to its proposed spans.
Analyzer = Callable[[Message, PrincipleCatalog], AnalyzerResult]

_SOURCE_PRIORITY = {AnalyzerSource.LEXICON: 0, AnalyzerSource.LLM: 1}


def lexicon_analyzer(message: Message, catalog: PrincipleCatalog) -> AnalyzerResult:
    """The always-on deterministic analyzer."""
    spans = detect_mentions_lexicon(message, build_lexicon(catalog))
    return AnalyzerResult(spans=tuple(spans), source=AnalyzerSource.LEXICON)


def parse_llm_spans(raw: str, message_id: str) -> tuple[list[MentionSpan], list[str]]:
    """Parse a model detection reply (JSON array of span objects)."""
    warnings: list[str] = []
    try:
        data = json.loads(raw)
    except json.JSONDecodeError:
        return [], ["model detection reply was not JSON"]
    if not isinstance(data, list):
        return [], ["model detection reply was not a JSON array"]
    out: list[MentionSpan] = []
    for item in data:
        if not isinstance(item, dict):
            warnings.append("dropped non-object entry in model detection reply")
            continue
        try:
            out.append(
                MentionSpan(
                    message_id=message_id,
                    principle_id=str(item["principle_id"]),
                    start=int(item["start"]),
                    end=int(item["end"]),
                    matched_term=str(item.get("matched_term", "")),
                )
            )
        except (KeyError, TypeError, ValueError):
            warnings.append("dropped malformed entry in model detection reply")
    return out, warnings


def make_llm_analyzer(call: Callable[[str], str]) -> Analyzer:
    """Wrap a plain text->reply callable as an analyzer.

    ``call`` receives the message text and returns the raw model reply; the
    caller wires it to the gateway. Parse problems surface when the spans are
    merged (bad offsets are dropped there with warnings).
    """

    def analyzer(message: Message, catalog: PrincipleCatalog) -> AnalyzerResult:
        raw = call(message.text)
        spans, _ = parse_llm_spans(raw, message.id)
        return AnalyzerResult(spans=tuple(spans), source=AnalyzerSource.LLM)

    return analyzer


def merge_results(
    results: Iterable[AnalyzerResult],
    *,
    text_length: Optional[int] = None,
    catalog_order: Optional[dict[str, int]] = None,
    warnings: Optional[list[str]] = None,
) -> list[MentionSpan]:
    """Fold analyzer outputs into one sorted, non-overlapping span list.

    Conflicts resolve by source priority (lexicon beats the model route), then
    leftmost, then longest, then catalog order of the principle. When
    ``text_length`` is known, out-of-bounds spans are dropped with a warning
    instead of failing the whole merge.
    """
    sink = warnings if warnings is not None else []
    order = catalog_order or {}
    candidates: list[tuple[int, MentionSpan]] = []
    seen: set[tuple[int, int, str]] = set()
    for result in results:
        priority = _SOURCE_PRIORITY[result.source]
        for span in result.spans:
            if span.start < 0 or span.end <= span.start:
                sink.append(f"rejected span with bad offsets [{span.start}, {span.end})")
                continue
            if text_length is not None and span.end > text_length:
                sink.append(
                    f"rejected span [{span.start}, {span.end}) beyond text length {text_length}"
                )
                continue
            if catalog_order is not None and span.principle_id not in catalog_order:
                sink.append(f"rejected span for unknown principle {span.principle_id!r}")
                continue
            key = (span.start, span.end, span.principle_id)
            if key in seen:
                continue
            seen.add(key)
            candidates.append((priority, span))

    candidates.sort(
        key=lambda item: (
            item[0],
            item[1].start,
            -(item[1].end - item[1].start),
            order.get(item[1].principle_id, len(order)),
            item[1].principle_id,
        )
    )
    accepted: list[MentionSpan] = []
    for _, span in candidates:
        if any(span.start < a.end and a.start < span.end for a in accepted):
            continue
        accepted.append(span)
    accepted.sort(key=lambda s: (s.start, s.end))
    return accepted


def analyze_message(
    message: Message,
    catalog: PrincipleCatalog,
    analyzers: Iterable[Analyzer] = (lexicon_analyzer,),
    *,
    warnings: Optional[list[str]] = None,
) -> list[MentionSpan]:
    """Run every analyzer over one message and merge the outcomes.

    An analyzer that raises degrades to the others: the failure lands in
    ``warnings`` and processing continues. With only the lexicon analyzer this
    equals :func:`detect_mentions_lexicon`.
    """
    sink = warnings if warnings is not None else []
    results: list[AnalyzerResult] = []
    for analyzer in analyzers:
        try:
            results.append(analyzer(message, catalog))
        except Exception as exc:
            name = getattr(analyzer, "__name__", analyzer.__class__.__name__)
            sink.append(f"analyzer {name} failed: {exc}")
    lexicon = build_lexicon(catalog)
    return merge_results(
        results,
        text_length=len(message.text),
        catalog_order=lexicon.catalog_order,
        warnings=sink,
    )
