/**
 * Reader for the newline-delimited JSON event stream.
 *
 * Frames arrive one per line; blank lines are keepalives and carry nothing.
 * The reader remembers the last seq it handed out and reconnects with
 * from_seq set to that cursor, so a dropped connection never skips or
 * repeats a frame for the caller.
 */

import type { EventFrame } from "./types.js";

export type StreamStatus = "open" | "reconnecting";

export interface StreamOptions {
  baseUrl: string;
  sessionId: string;
  /** Resume point: frames with seq greater than this are delivered. */
  fromSeq: number;
  onFrame: (frame: EventFrame) => void;
  onStatus?: (status: StreamStatus) => void;
  fetchImpl?: typeof fetch;
  /** Pause before a reconnect attempt, in milliseconds. */
  retryDelayMs?: number;
}

export interface StreamHandle {
  stop(): void;
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/**
 * Start consuming the event stream. Runs until stop() is called, riding out
 * disconnects by reopening the request from the last delivered seq.
 */
export function streamEvents(options: StreamOptions): StreamHandle {
  const fetchImpl = options.fetchImpl ?? fetch;
  const retryDelayMs = options.retryDelayMs ?? 500;
  let cursor = options.fromSeq;
  let stopped = false;
  let controller: AbortController | null = null;

  async function readOnce(): Promise<void> {
    controller = new AbortController();
    const url =
      `${options.baseUrl}/v1/sessions/${options.sessionId}/events` +
      `?from_seq=${cursor}`;
    const res = await fetchImpl(url, { signal: controller.signal });
    if (!res.ok || !res.body) {
      throw new Error(`event stream failed: ${res.status}`);
    }
    options.onStatus?.("open");
    const reader = res.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      while (true) {
        const { done, value } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const lines = buffer.split("\n");
        buffer = lines.pop() ?? "";
        for (const line of lines) {
          const trimmed = line.trim();
          if (!trimmed) continue;
          const frame = JSON.parse(trimmed) as EventFrame;
          cursor = frame.seq;
          options.onFrame(frame);
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  async function run(): Promise<void> {
    while (!stopped) {
      try {
        await readOnce();
      } catch {
        // fall through to the retry path below
      }
      if (stopped) return;
      options.onStatus?.("reconnecting");
      await delay(retryDelayMs);
    }
  }

  void run();

  return {
    stop() {
      stopped = true;
      controller?.abort();
    },
  };
}
