/** Event-stream client with sequence-cursor resumption.
 *
 * The gateway guarantees a gapless stream from any acknowledged sequence
 * number, so after a disconnect the client reopens from its cursor and the
 * combined stream carries no gaps and no duplicates. Transports are
 * injectable: the browser uses the fetch/SSE transport, tests replay a
 * recorded log with forced drops.
 */
import type { ApiEvent } from "./types.js";

export interface EventTransport {
  /** Yield events with seq > fromSeq until the connection ends. */
  open(fromSeq: number): AsyncIterable<ApiEvent>;
}

export class GapError extends Error {}

export interface StreamOptions {
  /** Stop after this many reconnect attempts that yielded nothing (test aid). */
  maxIdleReconnects?: number;
  /** Delay between reconnects, ms. */
  reconnectDelayMs?: number;
}

export class EventStreamClient {
  cursor = 0;
  private stopped = false;

  constructor(private transport: EventTransport, private options: StreamOptions = {}) {}

  stop(): void {
    this.stopped = true;
  }

  /** Ordered, gapless, duplicate-free event sequence across reconnects. */
  async *events(): AsyncGenerator<ApiEvent> {
    const delay = this.options.reconnectDelayMs ?? 500;
    let idleReconnects = 0;
    while (!this.stopped) {
      let sawEvent = false;
      try {
        for await (const event of this.transport.open(this.cursor)) {
          if (event.seq <= this.cursor) {
            continue; // replayed duplicate after resume
          }
          if (event.seq !== this.cursor + 1) {
            throw new GapError(`gap: got seq ${event.seq} after ${this.cursor}`);
          }
          this.cursor = event.seq;
          sawEvent = true;
          yield event;
          if (this.stopped) {
            return;
          }
        }
      } catch (err) {
        if (err instanceof GapError) {
          throw err;
        }
        // transport failure: fall through to reconnect
      }
      if (this.stopped) {
        return;
      }
      idleReconnects = sawEvent ? 0 : idleReconnects + 1;
      const limit = this.options.maxIdleReconnects;
      if (limit !== undefined && idleReconnects >= limit) {
        return;
      }
      if (delay > 0) {
        await new Promise((resolve) => setTimeout(resolve, delay));
      }
    }
  }
}

/** Parse one SSE frame body (the lines between blank separators). */
export function parseSseFrame(lines: string[]): ApiEvent | null {
  let data = "";
  for (const line of lines) {
    if (line.startsWith("data:")) {
      data += line.slice(5).trim();
    }
  }
  if (!data) {
    return null; // keepalive comment frame
  }
  return JSON.parse(data) as ApiEvent;
}

/** fetch()-based SSE transport against the documented events endpoint. */
export class HttpSseTransport implements EventTransport {
  constructor(private baseUrl: string, private sessionId: string) {}

  async *open(fromSeq: number): AsyncIterable<ApiEvent> {
    const url = `${this.baseUrl}/sessions/${this.sessionId}/events?from_seq=${fromSeq}`;
    const response = await fetch(url, { headers: { Accept: "text/event-stream" } });
    if (!response.ok || response.body === null) {
      throw new Error(`event stream failed: ${response.status}`);
    }
    const reader = response.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    try {
      for (;;) {
        const { done, value } = await reader.read();
        if (done) {
          return;
        }
        buffer += decoder.decode(value, { stream: true });
        let boundary = buffer.indexOf("\n\n");
        while (boundary >= 0) {
          const frame = buffer.slice(0, boundary);
          buffer = buffer.slice(boundary + 2);
          const event = parseSseFrame(frame.split("\n"));
          if (event !== null) {
            yield event;
          }
          boundary = buffer.indexOf("\n\n");
        }
      }
    } finally {
      reader.releaseLock();
    }
  }
}
