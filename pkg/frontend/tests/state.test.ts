import { describe, expect, it } from "vitest";

import {
  clearEmphasis,
  clickBookmark,
  clickExcerptRef,
  clickSuggestion,
  drainQueuedJumps,
  isExpanded,
  jumpIndexFor,
  reduceFrame,
  refreshFromSnapshot,
  setConnection,
  snapshotToState,
  toggleChapter,
  toggleOn,
  visibleSpansFor,
  type UiState,
} from "../src/state.js";
import type { Chapter, EventFrame } from "../src/types.js";
import { frame, makeSnapshot, makeState, message, span } from "./helpers.js";

function deepFreeze<T>(value: T): T {
  if (value && typeof value === "object") {
    Object.freeze(value);
    for (const key of Object.keys(value as object)) {
      deepFreeze((value as Record<string, unknown>)[key]);
    }
  }
  return value;
}

describe("snapshotToState", () => {
  it("mirrors the wire fields and starts with clean view state", () => {
    const snap = makeSnapshot({
      messages: [message(0, "user", "hello")],
      last_seq: 5,
      toggles: { balance: false },
    });
    const state = snapshotToState(snap);
    expect(state.sessionId).toBe("s-test");
    expect(state.messages).toHaveLength(1);
    expect(state.lastSeq).toBe(5);
    expect(state.toggles).toEqual({ balance: false });
    expect(state.connection).toBe("connecting");
    expect(state.expanded).toEqual({});
    expect(state.composer).toBe("");
    expect(state.queuedJumps).toEqual([]);
    expect(state.scrollTarget).toBeNull();
  });
});

describe("toggleOn", () => {
  it("treats a missing key as enabled", () => {
    const state = makeState();
    expect(state.toggles).toEqual({});
    expect(toggleOn(state, "balance")).toBe(true);
  });

  it("respects an explicit false", () => {
    const state = makeState({ toggles: { balance: false } });
    expect(toggleOn(state, "balance")).toBe(false);
    expect(toggleOn(state, "contrast")).toBe(true);
  });
});

describe("reduceFrame", () => {
  it("appends messages and mentions in order", () => {
    let state = makeState();
    state = reduceFrame(
      state,
      frame(1, "message_added", { message: message(0, "user", "fix the contrast") }),
    );
    state = reduceFrame(
      state,
      frame(2, "mentions_added", {
        spans: [span("m0", "contrast", 8, 16, "contrast")],
      }),
    );
    expect(state.messages.map((m) => m.id)).toEqual(["m0"]);
    expect(state.mentions).toHaveLength(1);
    expect(state.lastSeq).toBe(2);
  });

  it("replaces the touched chapter and leaves the rest alone", () => {
    let state = makeState();
    const updated: Chapter = {
      principle_id: "contrast",
      status: "pending_materials",
      mention_count: 1,
      opacity: 0.44,
      collapsed: true,
      excerpt_refs: [[0, 8]],
      materials: null,
    };
    state = reduceFrame(
      state,
      frame(1, "chapter_updated", { chapter: updated, first_mention: true }),
    );
    expect(state.chapters["contrast"]).toEqual(updated);
    expect(state.chapters["balance"]?.status).toBe("undiscovered");
  });

  it("folds materials into the chapter and marks it ready", () => {
    let state = makeState();
    state = reduceFrame(
      state,
      frame(1, "materials_ready", {
        principle_id: "contrast",
        materials: {
          definition: "d",
          relation_to_design: "r",
          key_terms: [["contrast", "d"]],
          degraded: false,
        },
      }),
    );
    const chapter = state.chapters["contrast"];
    expect(chapter?.status).toBe("ready");
    expect(chapter?.materials?.definition).toBe("d");
  });

  it("replaces bookmark, suggestion, and toggle collections wholesale", () => {
    let state = makeState();
    state = reduceFrame(
      state,
      frame(1, "bookmarks_updated", {
        bookmarks: [{ principle_id: "balance", message_index: 2, position: 0.5 }],
      }),
    );
    state = reduceFrame(
      state,
      frame(2, "suggestions_updated", {
        suggestions: [
          { kind: "emerging_topic", text: "What about Balance?", principle_id: "balance", rank: 0 },
        ],
      }),
    );
    state = reduceFrame(state, frame(3, "toggles_updated", { toggles: { balance: false } }));
    expect(state.bookmarks).toHaveLength(1);
    expect(state.suggestions[0]?.text).toBe("What about Balance?");
    expect(state.toggles).toEqual({ balance: false });
  });

  it("records error frames without touching the mirror", () => {
    const state = makeState();
    const next = reduceFrame(
      state,
      frame(1, "error", { code: "gateway_degraded", detail: "model took too long" }),
    );
    expect(next.lastError).toBe("model took too long");
    expect(next.messages).toEqual(state.messages);
    expect(next.lastSeq).toBe(1);
  });

  it("drops frames at or below the cursor, so replays are idempotent", () => {
    let state = makeState();
    const first = frame(1, "message_added", { message: message(0, "user", "hi") });
    state = reduceFrame(state, first);
    const replayed = reduceFrame(state, first);
    expect(replayed).toBe(state);
    expect(replayed.messages).toHaveLength(1);
  });

  it("never mutates its input", () => {
    const state = deepFreeze(makeState());
    const next = reduceFrame(
      state,
      frame(1, "message_added", { message: message(0, "user", "hi") }),
    );
    expect(next.messages).toHaveLength(1);
    expect(state.messages).toHaveLength(0);
  });

  it("yields the same model for the same frame sequence", () => {
    const frames: EventFrame[] = [
      frame(1, "message_added", { message: message(0, "user", "check balance") }),
      frame(2, "mentions_added", { spans: [span("m0", "balance", 6, 13, "balance")] }),
      frame(3, "toggles_updated", { toggles: { balance: false } }),
    ];
    const a = frames.reduce(reduceFrame, makeState());
    const b = frames.reduce(reduceFrame, makeState());
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });
});

describe("visibleSpansFor", () => {
  it("filters by message and toggle, sorted by start", () => {
    const state = makeState({
      messages: [message(0, "user", "balance and contrast")],
      mentions: [
        span("m0", "contrast", 12, 20, "contrast"),
        span("m0", "balance", 0, 7, "balance"),
        span("m9", "balance", 0, 7, "balance"),
      ],
      toggles: { contrast: false },
    });
    const visible = visibleSpansFor(state, "m0");
    expect(visible.map((s) => s.principle_id)).toEqual(["balance"]);
  });
});

describe("jumpIndexFor", () => {
  const state = makeState({
    messages: [
      message(0, "user", "balance here"),
      message(1, "assistant", "about balance"),
      message(2, "user", "nothing"),
    ],
    mentions: [
      span("m0", "balance", 0, 7, "balance"),
      span("m1", "balance", 6, 13, "balance"),
    ],
  });

  it("returns the most recent mentioning message", () => {
    expect(jumpIndexFor(state, "balance")).toBe(1);
  });

  it("returns null for an undiscussed principle", () => {
    expect(jumpIndexFor(state, "contrast")).toBeNull();
  });
});

describe("clickBookmark", () => {
  const base = (): UiState =>
    setConnection(
      makeState({
        messages: [
          message(0, "user", "balance please"),
          message(1, "assistant", "balance is off"),
        ],
        mentions: [
          span("m0", "balance", 0, 7, "balance"),
          span("m1", "balance", 0, 7, "balance"),
        ],
      }),
      "open",
    );

  it("targets the most recent mention and expands only that chapter", () => {
    const state = clickBookmark(base(), "balance");
    expect(state.scrollTarget?.index).toBe(1);
    expect(state.expanded).toEqual({ balance: true });
    expect(isExpanded(state, "balance")).toBe(true);
    expect(isExpanded(state, "contrast")).toBe(false);
  });

  it("does nothing for a principle with no mentions", () => {
    const state = base();
    expect(clickBookmark(state, "contrast")).toBe(state);
  });

  it("bumps the nonce so a repeat click re-scrolls", () => {
    let state = clickBookmark(base(), "balance");
    const first = state.scrollTarget?.nonce;
    state = clickBookmark(state, "balance");
    expect(state.scrollTarget?.nonce).not.toBe(first);
  });

  it("queues the jump while reconnecting and replays it on drain", () => {
    let state = setConnection(base(), "reconnecting");
    state = clickBookmark(state, "balance");
    expect(state.scrollTarget).toBeNull();
    expect(state.queuedJumps).toEqual(["balance"]);

    state = setConnection(state, "open");
    state = drainQueuedJumps(state);
    expect(state.queuedJumps).toEqual([]);
    expect(state.scrollTarget?.index).toBe(1);
    expect(state.expanded).toEqual({ balance: true });
  });
});

describe("excerpt refs and emphasis", () => {
  const base = makeState({
    messages: [message(0, "user", "contrast is low"), message(1, "assistant", "yes")],
  });

  it("scrolls to the cited message and emphasizes the span", () => {
    const state = clickExcerptRef(base, 0, 0);
    expect(state.scrollTarget?.index).toBe(0);
    expect(state.emphasis).toMatchObject({ index: 0, start: 0 });
  });

  it("ignores a ref past the end of the mirror", () => {
    expect(clickExcerptRef(base, 99, 0)).toBe(base);
  });

  it("clears emphasis only for the matching nonce", () => {
    const state = clickExcerptRef(base, 0, 0);
    const nonce = state.emphasis?.nonce ?? 0;
    const rebumped = clickExcerptRef(state, 1, 0);
    expect(clearEmphasis(rebumped, nonce).emphasis).not.toBeNull();
    const newNonce = rebumped.emphasis?.nonce ?? 0;
    expect(clearEmphasis(rebumped, newNonce).emphasis).toBeNull();
  });
});

describe("local view helpers", () => {
  it("toggleChapter flips the accordion override", () => {
    let state = makeState();
    expect(isExpanded(state, "balance")).toBe(false);
    state = toggleChapter(state, "balance");
    expect(isExpanded(state, "balance")).toBe(true);
    state = toggleChapter(state, "balance");
    expect(isExpanded(state, "balance")).toBe(false);
  });

  it("clickSuggestion fills the composer without sending", () => {
    const state = clickSuggestion(makeState(), "What about Balance?");
    expect(state.composer).toBe("What about Balance?");
    expect(state.pendingSend).toBe(false);
  });
});

describe("refreshFromSnapshot", () => {
  it("replaces the mirror but keeps local view state", () => {
    let state = makeState();
    state = { ...state, composer: "draft", expanded: { balance: true } };
    const fresh = makeSnapshot({
      messages: [message(0, "user", "hi")],
      last_seq: 9,
    });
    const next = refreshFromSnapshot(state, fresh);
    expect(next.messages).toHaveLength(1);
    expect(next.lastSeq).toBe(9);
    expect(next.composer).toBe("draft");
    expect(next.expanded).toEqual({ balance: true });
  });
});
