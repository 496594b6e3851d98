/**
 * Client-side session model: the service snapshot mirrored field for field,
 * plus the purely local view state (expanded chapters, composer draft,
 * scroll and emphasis targets, connection status).
 *
 * Every change funnels through the reducers in this module. Server frames
 * go through reduceFrame in seq order; pointer and keyboard interactions go
 * through the click* functions. All of them return a fresh state object, so
 * rendering the same inputs always produces the same model.
 */

import type {
  Bookmark,
  Catalog,
  Chapter,
  DesignArtifact,
  EventFrame,
  Materials,
  MentionSpan,
  Message,
  Snapshot,
  Suggestion,
} from "./types.js";

export type ConnectionState = "connecting" | "open" | "reconnecting";

export interface ScrollTarget {
  /** Message index the chat panel should bring into view. */
  index: number;
  /** Bumped on every navigation so repeat clicks re-scroll. */
  nonce: number;
}

export interface Emphasis {
  index: number;
  start: number;
  nonce: number;
}

export interface UiState {
  sessionId: string;
  artifact: DesignArtifact | null;
  catalog: Catalog;
  messages: Message[];
  mentions: MentionSpan[];
  chapters: Record<string, Chapter>;
  bookmarks: Bookmark[];
  suggestions: Suggestion[];
  toggles: Record<string, boolean>;
  lastSeq: number;
  lastError: string | null;
  connection: ConnectionState;
  /** Local accordion overrides; absent key means "follow the chapter". */
  expanded: Record<string, boolean>;
  composer: string;
  pendingSend: boolean;
  scrollTarget: ScrollTarget | null;
  emphasis: Emphasis | null;
  /** Bookmark jumps requested while the stream was down. */
  queuedJumps: string[];
}

export function snapshotToState(snap: Snapshot): UiState {
  return {
    sessionId: snap.session_id,
    artifact: snap.artifact,
    catalog: snap.catalog,
    messages: [...snap.messages],
    mentions: [...snap.mentions],
    chapters: { ...snap.chapters },
    bookmarks: [...snap.bookmarks],
    suggestions: [...snap.suggestions],
    toggles: { ...snap.toggles },
    lastSeq: snap.last_seq,
    lastError: null,
    connection: "connecting",
    expanded: {},
    composer: "",
    pendingSend: false,
    scrollTarget: null,
    emphasis: null,
    queuedJumps: [],
  };
}

/** A principle with no entry in the toggle map counts as enabled. */
export function toggleOn(state: UiState, principleId: string): boolean {
  return state.toggles[principleId] ?? true;
}

/**
 * Fold one event frame into the state. Frames at or below lastSeq were
 * already applied (history replay overlaps live delivery by design) and
 * are dropped, which is what keeps reconnects idempotent.
 */
export function reduceFrame(state: UiState, frame: EventFrame): UiState {
  if (frame.seq <= state.lastSeq) return state;
  const next: UiState = { ...state, lastSeq: frame.seq };
  const payload = frame.payload;
  switch (frame.type) {
    case "message_added":
      next.messages = [...state.messages, payload["message"] as Message];
      break;
    case "mentions_added":
      next.mentions = [
        ...state.mentions,
        ...(payload["spans"] as MentionSpan[]),
      ];
      break;
    case "chapter_updated": {
      const chapter = payload["chapter"] as Chapter;
      next.chapters = { ...state.chapters, [chapter.principle_id]: chapter };
      break;
    }
    case "bookmarks_updated":
      next.bookmarks = payload["bookmarks"] as Bookmark[];
      break;
    case "suggestions_updated":
      next.suggestions = payload["suggestions"] as Suggestion[];
      break;
    case "materials_ready": {
      const principleId = payload["principle_id"] as string;
      const current = state.chapters[principleId];
      if (!current) break;
      next.chapters = {
        ...state.chapters,
        [principleId]: {
          ...current,
          status: "ready",
          materials: payload["materials"] as Materials,
        },
      };
      break;
    }
    case "toggles_updated":
      next.toggles = { ...(payload["toggles"] as Record<string, boolean>) };
      break;
    case "error":
      next.lastError = (payload["detail"] as string) ?? "unknown error";
      break;
  }
  return next;
}

/** Mention spans to render for one message, honoring toggles, by start. */
export function visibleSpansFor(
  state: UiState,
  messageId: string,
): MentionSpan[] {
  return state.mentions
    .filter(
      (s) => s.message_id === messageId && toggleOn(state, s.principle_id),
    )
    .sort((a, b) => a.start - b.start);
}

/**
 * Index of the most recent message mentioning the principle, or null when
 * it has not come up yet (in which case no bookmark is rendered for it).
 */
export function jumpIndexFor(
  state: UiState,
  principleId: string,
): number | null {
  const byId = new Map(state.messages.map((m) => [m.id, m.index]));
  let best: number | null = null;
  for (const span of state.mentions) {
    if (span.principle_id !== principleId) continue;
    const index = byId.get(span.message_id);
    if (index === undefined) continue;
    if (best === null || index > best) best = index;
  }
  return best;
}

/** Accordion state for a chapter: local override wins over the stored flag. */
export function isExpanded(state: UiState, principleId: string): boolean {
  const override = state.expanded[principleId];
  if (override !== undefined) return override;
  const chapter = state.chapters[principleId];
  return chapter ? !chapter.collapsed : false;
}

export function setConnection(
  state: UiState,
  connection: ConnectionState,
): UiState {
  if (state.connection === connection) return state;
  return { ...state, connection };
}

/**
 * Bookmark click: scroll the chat to the most recent mention of the
 * principle and expand exactly that chapter. While the stream is down the
 * jump is queued instead; drainQueuedJumps replays it after the snapshot
 * refresh that follows a reconnect.
 */
export function clickBookmark(state: UiState, principleId: string): UiState {
  if (state.connection !== "open") {
    return { ...state, queuedJumps: [...state.queuedJumps, principleId] };
  }
  const index = jumpIndexFor(state, principleId);
  if (index === null) return state;
  const nonce = (state.scrollTarget?.nonce ?? 0) + 1;
  return {
    ...state,
    scrollTarget: { index, nonce },
    expanded: { ...state.expanded, [principleId]: true },
  };
}

export function drainQueuedJumps(state: UiState): UiState {
  let next: UiState = { ...state, queuedJumps: [] };
  for (const principleId of state.queuedJumps) {
    next = clickBookmark(next, principleId);
  }
  return next;
}

export function toggleChapter(state: UiState, principleId: string): UiState {
  return {
    ...state,
    expanded: { ...state.expanded, [principleId]: !isExpanded(state, principleId) },
  };
}

/** Suggested query click: fill the composer, leave sending to the user. */
export function clickSuggestion(state: UiState, text: string): UiState {
  return { ...state, composer: text };
}

/**
 * Excerpt reference click: scroll to the cited message and emphasize the
 * cited span. The emphasis is momentary; the caller clears it after two
 * seconds via clearEmphasis with the matching nonce.
 */
export function clickExcerptRef(
  state: UiState,
  index: number,
  start: number,
): UiState {
  if (index < 0 || index >= state.messages.length) return state;
  const nonce = (state.emphasis?.nonce ?? 0) + 1;
  return {
    ...state,
    scrollTarget: { index, nonce: (state.scrollTarget?.nonce ?? 0) + 1 },
    emphasis: { index, start, nonce },
  };
}

export function clearEmphasis(state: UiState, nonce: number): UiState {
  if (!state.emphasis || state.emphasis.nonce !== nonce) return state;
  return { ...state, emphasis: null };
}

export function setComposer(state: UiState, text: string): UiState {
  return { ...state, composer: text };
}

export function setPendingSend(state: UiState, pending: boolean): UiState {
  return { ...state, pendingSend: pending };
}

/**
 * Replace the mirrored fields with a fresh snapshot while keeping the local
 * view state (expanded set, composer draft, queued jumps). Used after a
 * reconnect, and when an excerpt ref points past the local message list.
 */
export function refreshFromSnapshot(state: UiState, snap: Snapshot): UiState {
  return {
    ...state,
    artifact: snap.artifact,
    catalog: snap.catalog,
    messages: [...snap.messages],
    mentions: [...snap.mentions],
    chapters: { ...snap.chapters },
    bookmarks: [...snap.bookmarks],
    suggestions: [...snap.suggestions],
    toggles: { ...snap.toggles },
    lastSeq: snap.last_seq,
  };
}
