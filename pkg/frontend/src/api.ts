// Gateway client: plain fetch for REST, a streaming parser for the
// server-sent event feed (works in both the browser and node).

import type { ConsoleEvent } from "./types.js";

export interface AttachmentUpload {
  b64: string;
  modality: string;
  format: string;
}

export async function createSession(
  base: string,
  tier?: string,
): Promise<{ session_id: string; tier_override: string | null }> {
  const response = await fetch(`${base}/v1/sessions`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(tier ? { tier } : {}),
  });
  if (!response.ok) throw new Error(`session create failed: ${response.status}`);
  return response.json();
}

export async function sendMessage(
  base: string,
  sessionId: string,
  text: string,
  attachments: AttachmentUpload[] = [],
): Promise<{ turn_id: string; plan_id: string }> {
  const response = await fetch(`${base}/v1/sessions/${sessionId}/messages`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ text, attachments }),
  });
  if (!response.ok) {
    const detail = await response.text();
    throw new Error(`message rejected (${response.status}): ${detail}`);
  }
  return response.json();
}

export function artifactUrl(base: string, artifactId: string): string {
  return `${base}/v1/artifacts/${artifactId}`;
}

export async function health(base: string): Promise<{ status: string; mode: string; tier: string }> {
  const response = await fetch(`${base}/v1/health`);
  if (!response.ok) throw new Error(`health failed: ${response.status}`);
  return response.json();
}

/**
 * Consume the SSE feed as parsed ConsoleEvents. With follow=false the
 * stream (and the generator) ends after the active plan completes.
 */
export async function* streamEvents(
  base: string,
  sessionId: string,
  options: { follow?: boolean; signal?: AbortSignal } = {},
): AsyncGenerator<ConsoleEvent> {
  const follow = options.follow ?? true;
  const url = `${base}/v1/sessions/${sessionId}/events${follow ? "" : "?follow=false"}`;
  const response = await fetch(url, { signal: options.signal });
  if (!response.ok || !response.body) {
    throw new Error(`event stream failed: ${response.status}`);
  }
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    while (true) {
      const { value, done } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let cut;
      while ((cut = buffer.indexOf("\n\n")) !== -1) {
        const block = buffer.slice(0, cut);
        buffer = buffer.slice(cut + 2);
        const parsed = parseEventBlock(block);
        if (parsed) yield parsed;
      }
    }
  } finally {
    reader.releaseLock();
  }
}

function parseEventBlock(block: string): ConsoleEvent | null {
  let eventName = "";
  let data = "";
  for (const line of block.split("\n")) {
    if (line.startsWith(":")) continue; // protocol comment / keepalive
    if (line.startsWith("event: ")) eventName = line.slice(7).trim();
    else if (line.startsWith("data: ")) data += line.slice(6);
  }
  if (!eventName || !data) return null;
  const body = JSON.parse(data) as { plan_id: string; payload: unknown };
  return { event: eventName as ConsoleEvent["event"], plan_id: body.plan_id, payload: body.payload };
}
