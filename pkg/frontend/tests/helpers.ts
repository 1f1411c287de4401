import { readFileSync } from "node:fs";
import type { ApiEvent } from "../src/types.js";
import type { EventTransport } from "../src/events.js";

export function loadReplayFixture(): ApiEvent[] {
  const url = new URL("./fixtures/replay_50.jsonl", import.meta.url);
  return readFileSync(url, "utf-8")
    .trim()
    .split("\n")
    .map((line) => JSON.parse(line) as ApiEvent);
}

/** Replays a recorded log like the gateway would: everything after from_seq,
 * in order. Optionally drops the connection after N events (per connection)
 * and can resend `overlap` already-acknowledged events on each connect, the
 * way an at-least-once server might. */
export class FakeTransport implements EventTransport {
  connections = 0;

  constructor(
    private log: ApiEvent[],
    private dropAfter: number[] = [],
    private overlap = 0,
  ) {}

  async *open(fromSeq: number): AsyncIterable<ApiEvent> {
    const connection = this.connections++;
    const limit = this.dropAfter[connection] ?? Infinity;
    const start = Math.max(fromSeq - this.overlap, 0);
    let sent = 0;
    for (const event of this.log) {
      if (event.seq <= start) {
        continue;
      }
      if (sent >= limit) {
        return; // simulated disconnect mid-stream
      }
      yield event;
      sent += 1;
    }
  }
}
