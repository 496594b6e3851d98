/**
 * Wires the pieces together: boots a session, folds stream frames into the
 * state, and maps DOM interactions onto state transitions plus /v1 calls.
 */

import { createSession, fetchSnapshot, sendMessage, setToggle } from "./api.js";
import { render, type Handlers } from "./render.js";
import {
  clearEmphasis,
  clickBookmark,
  clickExcerptRef,
  clickSuggestion,
  drainQueuedJumps,
  reduceFrame,
  refreshFromSnapshot,
  setComposer,
  setConnection,
  setPendingSend,
  snapshotToState,
  toggleChapter,
  type UiState,
} from "./state.js";
import { streamEvents, type StreamHandle } from "./stream.js";

export interface BootOptions {
  fetchImpl?: typeof fetch;
  retryDelayMs?: number;
  /** Join an existing session instead of creating one. */
  sessionId?: string;
}

export interface AppHandle {
  stop(): void;
  getState(): UiState;
}

const EMPHASIS_MS = 2000;

/** Start the client against a running service and keep root in sync. */
export async function boot(
  root: HTMLElement,
  baseUrl: string,
  options: BootOptions = {},
): Promise<AppHandle> {
  const fetchImpl = options.fetchImpl ?? fetch;
  const sessionId =
    options.sessionId ?? (await createSession(baseUrl, fetchImpl));
  const snapshot = await fetchSnapshot(baseUrl, sessionId, fetchImpl);

  let state = snapshotToState(snapshot);
  let stream: StreamHandle | null = null;

  function update(next: UiState): void {
    if (next === state) return;
    state = next;
    render(root, state, handlers);
  }

  function beginEmphasisTimer(): void {
    const emphasis = state.emphasis;
    if (!emphasis) return;
    const nonce = emphasis.nonce;
    setTimeout(() => update(clearEmphasis(state, nonce)), EMPHASIS_MS);
  }

  async function refreshAfterReconnect(): Promise<void> {
    try {
      const fresh = await fetchSnapshot(baseUrl, sessionId, fetchImpl);
      update(drainQueuedJumps(refreshFromSnapshot(state, fresh)));
    } catch {
      // the stream is back; frames will catch the mirror up regardless
      update(drainQueuedJumps(state));
    }
  }

  const handlers: Handlers = {
    onToggle(principleId, enabled) {
      void setToggle(baseUrl, sessionId, principleId, enabled, fetchImpl).catch(
        (err: Error) => update({ ...state, lastError: err.message }),
      );
    },
    onBookmarkClick(principleId) {
      update(clickBookmark(state, principleId));
    },
    onChapterHeaderClick(principleId) {
      update(toggleChapter(state, principleId));
    },
    onSuggestionClick(text) {
      update(clickSuggestion(state, text));
    },
    onExcerptRefClick(index, start) {
      if (index >= state.messages.length) {
        void fetchSnapshot(baseUrl, sessionId, fetchImpl).then((fresh) => {
          update(clickExcerptRef(refreshFromSnapshot(state, fresh), index, start));
          beginEmphasisTimer();
        });
        return;
      }
      update(clickExcerptRef(state, index, start));
      beginEmphasisTimer();
    },
    onComposerInput(text) {
      update(setComposer(state, text));
    },
    onSend(text) {
      if (state.pendingSend || !text.trim()) return;
      update(setPendingSend(state, true));
      void sendMessage(baseUrl, sessionId, text, fetchImpl)
        .then(() => update(setComposer(setPendingSend(state, false), "")))
        .catch((err: Error) =>
          update({ ...setPendingSend(state, false), lastError: err.message }),
        );
    },
  };

  render(root, state, handlers);

  stream = streamEvents({
    baseUrl,
    sessionId,
    fromSeq: state.lastSeq,
    fetchImpl,
    retryDelayMs: options.retryDelayMs,
    onFrame(frame) {
      update(reduceFrame(state, frame));
    },
    onStatus(status) {
      const wasDown = state.connection === "reconnecting";
      update(setConnection(state, status));
      if (status === "open" && wasDown) {
        void refreshAfterReconnect();
      }
    },
  });

  return {
    stop() {
      stream?.stop();
    },
    getState() {
      return state;
    },
  };
}

declare global {
  interface Window {
    feedstackBaseUrl?: string;
  }
}

const mount =
  typeof document !== "undefined" ? document.getElementById("app") : null;
if (mount) {
  const base = window.feedstackBaseUrl ?? "";
  const params = new URLSearchParams(window.location.search);
  void boot(mount, base, { sessionId: params.get("session") ?? undefined });
}
