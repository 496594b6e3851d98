/**
 * Thin wrappers over the /v1 HTTP endpoints. Everything the client knows
 * about a session comes through these calls or the event stream; nothing
 * mutates state behind the service's back.
 */

import type { Snapshot } from "./types.js";

export class ApiError extends Error {
  status: number;
  code: string;

  constructor(status: number, code: string, detail: string) {
    super(detail);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

type Fetch = typeof fetch;

async function requestJson<T>(
  fetchImpl: Fetch,
  url: string,
  init?: RequestInit,
): Promise<T> {
  const res = await fetchImpl(url, init);
  if (!res.ok) {
    let code = "error";
    let detail = `${res.status} ${res.statusText}`;
    try {
      const body = (await res.json()) as { code?: string; detail?: string };
      if (body.code) code = body.code;
      if (body.detail) detail = body.detail;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ApiError(res.status, code, detail);
  }
  return (await res.json()) as T;
}

export async function createSession(
  baseUrl: string,
  fetchImpl: Fetch = fetch,
): Promise<string> {
  const body = await requestJson<{ session_id: string }>(
    fetchImpl,
    `${baseUrl}/v1/sessions`,
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({}),
    },
  );
  return body.session_id;
}

export async function fetchSnapshot(
  baseUrl: string,
  sessionId: string,
  fetchImpl: Fetch = fetch,
): Promise<Snapshot> {
  return requestJson<Snapshot>(fetchImpl, `${baseUrl}/v1/sessions/${sessionId}`);
}

export async function sendMessage(
  baseUrl: string,
  sessionId: string,
  text: string,
  fetchImpl: Fetch = fetch,
): Promise<string> {
  const body = await requestJson<{ message_id: string }>(
    fetchImpl,
    `${baseUrl}/v1/sessions/${sessionId}/messages`,
    {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ text }),
    },
  );
  return body.message_id;
}

export async function setToggle(
  baseUrl: string,
  sessionId: string,
  principleId: string,
  enabled: boolean,
  fetchImpl: Fetch = fetch,
): Promise<void> {
  await requestJson(fetchImpl, `${baseUrl}/v1/sessions/${sessionId}/toggles`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ principle_id: principleId, enabled }),
  });
}

export async function fetchExport(
  baseUrl: string,
  sessionId: string,
  fetchImpl: Fetch = fetch,
): Promise<string> {
  const res = await fetchImpl(`${baseUrl}/v1/sessions/${sessionId}/export`);
  if (!res.ok) {
    throw new ApiError(res.status, "error", `export failed: ${res.status}`);
  }
  return res.text();
}
