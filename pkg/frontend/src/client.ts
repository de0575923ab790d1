/** HTTP/SSE client for the session service. */

import type { SessionEvent, SessionInfo } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Split raw SSE text into parsed event objects ("data: {...}" lines). */
export function parseSseChunk(text: string): SessionEvent[] {
  const events: SessionEvent[] = [];
  for (const line of text.split("\n")) {
    if (line.startsWith("data: ")) {
      events.push(JSON.parse(line.slice(6)));
    }
  }
  return events;
}

export class ConsoleClient {
  private answerInFlight = false;

  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
  }

  private async request(method: string, path: string, body?: unknown): Promise<any> {
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      throw new ServiceError(response.status, await response.text());
    }
    return response.json();
  }

  createSession(scene: string | object, options: { profile?: string; variant?: string } = {}) {
    return this.request("POST", "/sessions", { scene, ...options }) as Promise<{ id: string }>;
  }

  getSession(id: string): Promise<SessionInfo> {
    return this.request("GET", `/sessions/${id}`);
  }

  detect(id: string, query: string, responses?: string[]) {
    return this.request("POST", `/sessions/${id}/detect`, { query, responses });
  }

  /**
   * Submit the operator's answer to a pending ask. Guards against double
   * submission: while one answer is in flight, further calls resolve to false
   * without hitting the service.
   */
  async submitAnswer(id: string, text: string): Promise<boolean> {
    if (this.answerInFlight) return false;
    this.answerInFlight = true;
    try {
      await this.request("POST", `/sessions/${id}/answer`, { text });
      return true;
    } finally {
      this.answerInFlight = false;
    }
  }

  recover(id: string, plan: string) {
    return this.request("POST", `/sessions/${id}/recover`, { plan });
  }

  mutate(id: string, mutation: { kind: string; [key: string]: unknown }) {
    return this.request("POST", `/sessions/${id}/mutate`, mutation);
  }

  /** Fetch the recorded event history (non-following stream). */
  async fetchEvents(id: string, fromSeq = 1): Promise<SessionEvent[]> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${id}/events?from_seq=${fromSeq}&follow=false`,
    );
    if (!response.ok) {
      throw new ServiceError(response.status, await response.text());
    }
    return parseSseChunk(await response.text());
  }

  /**
   * Follow the live stream, invoking onEvent per event. Returns when the
   * stream closes. Resume after a disconnect by passing lastSeq + 1.
   */
  async followEvents(
    id: string,
    fromSeq: number,
    onEvent: (event: SessionEvent) => void,
  ): Promise<void> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${id}/events?from_seq=${fromSeq}&follow=true`,
    );
    if (!response.ok || !response.body) {
      throw new ServiceError(response.status, "event stream unavailable");
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      const cut = buffer.lastIndexOf("\n");
      if (cut < 0) continue;
      for (const event of parseSseChunk(buffer.slice(0, cut + 1))) {
        onEvent(event);
      }
      buffer = buffer.slice(cut + 1);
    }
  }
}
