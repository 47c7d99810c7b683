import { describe, expect, it } from "vitest";
import { EventStream, SseParser } from "../src/events.js";
import type { MissionEvent } from "../src/types.js";

function mev(seq: number, kind = "pose_update"): MissionEvent {
  return { seq, clock: seq * 0.5, kind: kind as MissionEvent["kind"], payload: {} };
}

function frame(e: MissionEvent): string {
  return `id: ${e.seq}\ndata: ${JSON.stringify(e)}\n\n`;
}

function streamResponse(chunks: string[], failAfter?: number): Response {
  const enc = new TextEncoder();
  let sent = 0;
  const body = new ReadableStream<Uint8Array>({
    pull(controller) {
      if (failAfter !== undefined && sent === failAfter) {
        controller.error(new Error("connection reset"));
        return;
      }
      if (sent >= chunks.length) {
        controller.close();
        return;
      }
      controller.enqueue(enc.encode(chunks[sent]!));
      sent++;
    },
  });
  return new Response(body, {
    status: 200,
    headers: { "Content-Type": "text/event-stream" },
  });
}

/** fetch stub: pops one scripted response per call and records the URLs. */
function scriptedFetch(script: Array<() => Response>): {
  fetchImpl: typeof fetch;
  urls: string[];
} {
  const urls: string[] = [];
  const fetchImpl = ((input: RequestInfo | URL) => {
    urls.push(String(input));
    const next = script.shift();
    if (next === undefined) {
      return new Promise<Response>(() => {});
    }
    return Promise.resolve(next());
  }) as typeof fetch;
  return { fetchImpl, urls };
}

describe("SseParser", () => {
  it("parses a complete frame", () => {
    const parser = new SseParser();
    const frames = parser.push('id: 7\ndata: {"seq": 7}\n\n');
    expect(frames).toEqual([{ id: 7, data: '{"seq": 7}' }]);
  });

  it("handles frames split across arbitrary chunk boundaries", () => {
    const parser = new SseParser();
    const text = frame(mev(1)) + frame(mev(2)) + frame(mev(3));
    const out: Array<number | null> = [];
    // Re-feed the same text one character at a time.
    for (const ch of text) {
      for (const f of parser.push(ch)) {
        out.push(f.id);
      }
    }
    expect(out).toEqual([1, 2, 3]);
  });

  it("handles several frames in one chunk", () => {
    const parser = new SseParser();
    const frames = parser.push(frame(mev(1)) + frame(mev(2)));
    expect(frames.map((f) => f.id)).toEqual([1, 2]);
  });

  it("ignores comments and frames without data", () => {
    const parser = new SseParser();
    expect(parser.push(": keepalive\n\n")).toEqual([]);
    expect(parser.push("id: 9\n\n")).toEqual([]);
  });
});

describe("EventStream", () => {
  it("delivers events in order and tracks lastSeq", async () => {
    const events = [mev(1), mev(2), mev(3)];
    const { fetchImpl, urls } = scriptedFetch([
      () => streamResponse(events.map(frame)),
    ]);
    const seen: number[] = [];
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 0,
      fetchImpl,
      retryDelayMs: 5,
      shouldReconnect: () => false,
      onEvent: (e) => seen.push(e.seq),
    });
    stream.start();
    await stream.wait();
    expect(seen).toEqual([1, 2, 3]);
    expect(stream.lastSeq).toBe(3);
    expect(urls).toEqual(["http://test/events?since=0"]);
  });

  it("asks for the resume point in the since parameter", async () => {
    const { fetchImpl, urls } = scriptedFetch([
      () => streamResponse([frame(mev(42))]),
    ]);
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 41,
      fetchImpl,
      shouldReconnect: () => false,
      onEvent: () => {},
    });
    stream.start();
    await stream.wait();
    expect(urls[0]).toBe("http://test/events?since=41");
  });

  it("reconnects after a drop and resumes from the last delivered seq", async () => {
    const first = [frame(mev(1)), frame(mev(2))];
    const rest = [frame(mev(3)), frame(mev(4))];
    let finished = false;
    const { fetchImpl, urls } = scriptedFetch([
      () => streamResponse(first, first.length),
      () => {
        finished = true;
        return streamResponse(rest);
      },
    ]);
    const seen: number[] = [];
    const statuses: string[] = [];
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 0,
      fetchImpl,
      retryDelayMs: 5,
      shouldReconnect: () => !finished,
      onStatus: (s) => statuses.push(s),
      onEvent: (e) => seen.push(e.seq),
    });
    stream.start();
    await stream.wait();
    expect(seen).toEqual([1, 2, 3, 4]);
    expect(urls).toEqual([
      "http://test/events?since=0",
      "http://test/events?since=2",
    ]);
    expect(statuses).toContain("retrying");
    expect(statuses.at(-1)).toBe("ended");
  });

  it("filters duplicate events when a replay overlaps", async () => {
    // Server resends 1..4 but the client already saw 1..2.
    const replay = [mev(1), mev(2), mev(3), mev(4)].map(frame);
    const { fetchImpl } = scriptedFetch([() => streamResponse(replay)]);
    const seen: number[] = [];
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 2,
      fetchImpl,
      shouldReconnect: () => false,
      onEvent: (e) => seen.push(e.seq),
    });
    stream.start();
    await stream.wait();
    expect(seen).toEqual([3, 4]);
  });

  it("retries on a non-200 response", async () => {
    let attempts = 0;
    const { fetchImpl } = scriptedFetch([
      () => {
        attempts++;
        return new Response("busy", { status: 503 });
      },
      () => {
        attempts++;
        return streamResponse([frame(mev(1))]);
      },
    ]);
    const seen: number[] = [];
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 0,
      fetchImpl,
      retryDelayMs: 5,
      shouldReconnect: () => false,
      onEvent: (e) => seen.push(e.seq),
    });
    stream.start();
    await stream.wait();
    expect(attempts).toBe(2);
    expect(seen).toEqual([1]);
  });

  it("stops cleanly when asked", async () => {
    const { fetchImpl } = scriptedFetch([]);
    const statuses: string[] = [];
    const stream = new EventStream({
      baseUrl: "http://test",
      since: 0,
      fetchImpl,
      onStatus: (s) => statuses.push(s),
      onEvent: () => {},
    });
    stream.start();
    stream.stop();
    stream.stop();
    expect(statuses.filter((s) => s === "stopped").length).toBe(2);
  });
});
