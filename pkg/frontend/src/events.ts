/**
 * Client for the mission event stream.
 *
 * The service exposes server-sent events at GET /events?since=N where N is
 * the last sequence number already seen (exclusive). Resume is a query
 * parameter rather than a Last-Event-ID header, so this client drives the
 * stream through fetch instead of the native EventSource.
 */

import type { MissionEvent } from "./types.js";

export type StreamStatus = "connecting" | "open" | "retrying" | "ended" | "stopped";

export interface EventStreamOptions {
  baseUrl: string;
  /** Last sequence number already applied; the stream resumes after it. */
  since: number;
  onEvent: (event: MissionEvent) => void;
  onStatus?: (status: StreamStatus, detail?: string) => void;
  /** Return false to stop reconnecting (e.g. the mission is Done). */
  shouldReconnect?: () => boolean;
  retryDelayMs?: number;
  maxRetryDelayMs?: number;
  fetchImpl?: typeof fetch;
}

interface SseFrame {
  id: number | null;
  data: string;
}

/** Incremental parser for `id:`/`data:` frames separated by blank lines. */
export class SseParser {
  private buffer = "";

  /** Feed a chunk of text; returns the frames completed by it. */
  push(chunk: string): SseFrame[] {
    this.buffer += chunk;
    const frames: SseFrame[] = [];
    for (;;) {
      const cut = this.buffer.indexOf("\n\n");
      if (cut < 0) {
        break;
      }
      const raw = this.buffer.slice(0, cut);
      this.buffer = this.buffer.slice(cut + 2);
      const frame = parseFrame(raw);
      if (frame !== null) {
        frames.push(frame);
      }
    }
    return frames;
  }
}

function parseFrame(raw: string): SseFrame | null {
  let id: number | null = null;
  const data: string[] = [];
  for (const line of raw.split("\n")) {
    if (line.startsWith("id:")) {
      const n = Number(line.slice(3).trim());
      if (Number.isInteger(n)) {
        id = n;
      }
    } else if (line.startsWith("data:")) {
      data.push(line.slice(5).trimStart());
    }
    // Comment lines (":") and unknown fields are ignored per SSE rules.
  }
  if (data.length === 0) {
    return null;
  }
  return { id, data: data.join("\n") };
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export class EventStream {
  /** Highest sequence number delivered to onEvent so far. */
  lastSeq: number;

  private readonly opts: EventStreamOptions;
  private stopped = false;
  private controller: AbortController | null = null;
  private runPromise: Promise<void> | null = null;

  constructor(opts: EventStreamOptions) {
    this.opts = opts;
    this.lastSeq = opts.since;
  }

  start(): void {
    if (this.runPromise !== null) {
      return;
    }
    this.stopped = false;
    this.runPromise = this.run();
  }

  /** Abort the connection and stop reconnecting. Safe to call twice. */
  stop(): void {
    this.stopped = true;
    this.controller?.abort();
    this.opts.onStatus?.("stopped");
  }

  /** Resolves when the stream has ended or been stopped. */
  async wait(): Promise<void> {
    await this.runPromise;
  }

  private status(s: StreamStatus, detail?: string): void {
    if (!this.stopped || s === "stopped") {
      this.opts.onStatus?.(s, detail);
    }
  }

  private async run(): Promise<void> {
    const fetchImpl = this.opts.fetchImpl ?? fetch;
    const baseDelay = this.opts.retryDelayMs ?? 500;
    const maxDelay = this.opts.maxRetryDelayMs ?? 8000;
    let delay = baseDelay;

    while (!this.stopped) {
      this.status("connecting");
      this.controller = new AbortController();
      let cleanEnd = false;
      try {
        const url = `${this.opts.baseUrl}/events?since=${this.lastSeq}`;
        const resp = await fetchImpl(url, {
          signal: this.controller.signal,
          headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || resp.body === null) {
          throw new Error(`event stream HTTP ${resp.status}`);
        }
        this.status("open");
        delay = baseDelay;
        await this.consume(resp.body);
        cleanEnd = true;
      } catch (err) {
        if (this.stopped) {
          return;
        }
        this.status("retrying", String(err));
      }

      if (this.stopped) {
        return;
      }
      if (cleanEnd) {
        // The server closes the stream once the mission is finished; only
        // reconnect when the caller says the mission may still be running.
        if (this.opts.shouldReconnect?.() === false) {
          this.status("ended");
          return;
        }
        this.status("retrying", "stream closed");
      }
      await sleep(delay);
      delay = Math.min(maxDelay, delay * 2);
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    const parser = new SseParser();
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          return;
        }
        for (const frame of parser.push(decoder.decode(value, { stream: true }))) {
          this.dispatch(frame);
        }
      }
    } finally {
      reader.releaseLock();
    }
  }

  private dispatch(frame: SseFrame): void {
    let event: MissionEvent;
    try {
      event = JSON.parse(frame.data) as MissionEvent;
    } catch {
      return;
    }
    if (typeof event.seq !== "number" || typeof event.kind !== "string") {
      return;
    }
    // A reconnect replays nothing when since=lastSeq, but guard against
    // duplicates anyway: the reducer must never see a stale sequence.
    if (event.seq <= this.lastSeq) {
      return;
    }
    this.lastSeq = event.seq;
    this.opts.onEvent(event);
  }
}
