/** Pure projection from a session event log to the rendered transcript:
 * subtitle lines (narration text) and response lines (spoken text), in
 * event order. The rendered view must match this projection exactly. */
import type { ApiEvent, NarrationSegmentData, ResponseDeliveryData } from "./types.js";

export interface TranscriptLine {
  seq: number;
  kind: "narration" | "response";
  text: string;
}

export function projectTranscript(events: Iterable<ApiEvent>): TranscriptLine[] {
  const lines: TranscriptLine[] = [];
  for (const event of events) {
    if (event.type === "narration_segment") {
      const data = event.data as NarrationSegmentData;
      lines.push({ seq: event.seq, kind: "narration", text: data.text });
    } else if (event.type === "response_delivery") {
      const data = event.data as ResponseDeliveryData;
      lines.push({ seq: event.seq, kind: "response", text: data.response.spoken });
    }
  }
  return lines;
}
