/** Shared builders for frontend tests. */

import { snapshotToState, type UiState } from "../src/state.js";
import type {
  Catalog,
  Chapter,
  EventFrame,
  FrameType,
  Message,
  MentionSpan,
  Snapshot,
} from "../src/types.js";

/** Trimmed copy of the default catalog, same ids and ordering. */
export function testCatalog(): Catalog {
  return {
    version: "1",
    principles: [
      {
        id: "accessibility",
        name: "Accessibility",
        definition: "Everyone can perceive and operate the interface.",
        terms: ["accessibility", "screen reader", "legibility"],
      },
      {
        id: "consistency",
        name: "Consistency",
        definition: "Same conventions for the same kinds of elements.",
        terms: ["consistency", "consistent", "pattern"],
      },
      {
        id: "contrast",
        name: "Contrast",
        definition: "Differences that separate elements and direct attention.",
        terms: ["contrast", "contrasting"],
      },
      {
        id: "balance",
        name: "Balance",
        definition: "Visual weight distributed across the composition.",
        terms: ["balance", "balanced", "visual weight"],
      },
      {
        id: "alignment-and-spacing",
        name: "Alignment and Spacing",
        definition: "Shared edges and deliberate room between elements.",
        terms: ["alignment", "spacing", "margin"],
      },
    ],
  };
}

export function blankChapter(principleId: string): Chapter {
  return {
    principle_id: principleId,
    status: "undiscovered",
    mention_count: 0,
    opacity: 0.3,
    collapsed: true,
    excerpt_refs: [],
    materials: null,
  };
}

export function message(index: number, role: "user" | "assistant", text: string): Message {
  return { id: `m${index}`, index, role, text, created_at: "" };
}

export function span(
  messageId: string,
  principleId: string,
  start: number,
  end: number,
  term: string,
): MentionSpan {
  return {
    message_id: messageId,
    principle_id: principleId,
    start,
    end,
    matched_term: term,
  };
}

export function makeSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  const catalog = overrides.catalog ?? testCatalog();
  const chapters: Record<string, Chapter> = {};
  for (const p of catalog.principles) chapters[p.id] = blankChapter(p.id);
  return {
    session_id: "s-test",
    created_at: "2026-01-01T00:00:00Z",
    artifact: null,
    catalog,
    messages: [],
    mentions: [],
    chapters,
    bookmarks: [],
    suggestions: [],
    toggles: {},
    last_seq: 0,
    pending_jobs: 0,
    ...overrides,
  };
}

export function makeState(overrides: Partial<Snapshot> = {}): UiState {
  return snapshotToState(makeSnapshot(overrides));
}

let frameClock = 0;

export function frame(
  seq: number,
  type: FrameType,
  payload: Record<string, unknown>,
): EventFrame {
  frameClock += 1;
  return {
    seq,
    session_id: "s-test",
    type,
    payload,
    at: `2026-01-01T00:00:${String(frameClock % 60).padStart(2, "0")}Z`,
  };
}
