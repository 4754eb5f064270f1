// Live event subscriber: one persistent ndjson stream, resumed with
// ?since=<last seq> so delivery is at-least-once. Duplicate records from
// a resume are dropped by seq; a jump in seq is surfaced as a gap.

import type { StreamEvent } from "./types.js";
import type { FetchLike } from "./api.js";

export interface StreamHandlers {
  onEvent: (event: StreamEvent) => void;
  /** A hole in the sequence numbers: [lastSeen, received]. */
  onGap?: (lastSeen: number, received: number) => void;
  onStatus?: (status: "connecting" | "live" | "retrying") => void;
}

export interface StreamOptions {
  fetchImpl?: FetchLike;
  delay?: (ms: number) => Promise<void>;
  /** Reconnect backoff schedule in ms; the last entry repeats. */
  backoffMs?: number[];
}

export const DEFAULT_BACKOFF_MS = [500, 1000, 2000, 4000, 8000];

const sleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class EventStreamClient {
  lastSeq = 0;
  private readonly fetchImpl: FetchLike;
  private readonly delay: (ms: number) => Promise<void>;
  private readonly backoff: number[];
  private attempt = 0;
  private stopped = false;
  private abort: AbortController | null = null;
  private runPromise: Promise<void> | null = null;

  constructor(
    private readonly base: string,
    private readonly handlers: StreamHandlers,
    options: StreamOptions = {},
  ) {
    this.fetchImpl =
      options.fetchImpl ?? ((url, init) => fetch(url, init));
    this.delay = options.delay ?? sleep;
    this.backoff = options.backoffMs ?? DEFAULT_BACKOFF_MS;
  }

  /** Current backoff delay for the n-th consecutive failure (1-based). */
  backoffFor(attempt: number): number {
    const idx = Math.min(attempt, this.backoff.length) - 1;
    return this.backoff[Math.max(idx, 0)] ?? 0;
  }

  start(): void {
    if (this.runPromise) return;
    this.stopped = false;
    this.runPromise = this.run();
  }

  async stop(): Promise<void> {
    this.stopped = true;
    this.abort?.abort();
    try {
      await this.runPromise;
    } catch {
      // stream teardown errors are expected on abort
    }
    this.runPromise = null;
  }

  private async run(): Promise<void> {
    while (!this.stopped) {
      this.handlers.onStatus?.(this.attempt ? "retrying" : "connecting");
      try {
        await this.consumeOnce();
      } catch {
        // fall through to the backoff below
      }
      if (this.stopped) return;
      this.attempt += 1;
      await this.delay(this.backoffFor(this.attempt));
    }
  }

  private async consumeOnce(): Promise<void> {
    this.abort = new AbortController();
    const resp = await this.fetchImpl(
      `${this.base}/events?since=${this.lastSeq}`,
      { signal: this.abort.signal },
    );
    if (!resp.ok || !resp.body) {
      throw new Error(`stream request failed: ${resp.status}`);
    }
    this.handlers.onStatus?.("live");
    this.attempt = 0;
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) return; // server closed; reconnect with backoff
      buffer += decoder.decode(value, { stream: true });
      let newline;
      while ((newline = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) this.dispatch(JSON.parse(line) as StreamEvent);
      }
    }
  }

  private dispatch(event: StreamEvent): void {
    if (event.seq <= this.lastSeq) return; // replay overlap after a resume
    if (this.lastSeq > 0 && event.seq > this.lastSeq + 1) {
      this.handlers.onGap?.(this.lastSeq, event.seq);
    }
    this.lastSeq = event.seq;
    this.handlers.onEvent(event);
  }
}
