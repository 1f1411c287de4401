/** Session view state: a pure reducer over the gateway event stream.
 *
 * The stage always equals the latest stage_change; the sequence cursor never
 * decreases (duplicate deliveries after a resume are dropped here, so a
 * reconnecting client cannot double-render). A response_delivery missing any
 * of its four fields throws: that is a rendering bug, never skipped quietly.
 */
import type {
  ApiEvent,
  CommentDroppedData,
  CommentReceivedData,
  NarrationSegmentData,
  ProductFocusData,
  ResponseDeliveryData,
  ResponseFields,
  StageChangeData,
} from "./types.js";
import type { TranscriptLine } from "./transcript.js";

export interface ScrollbackEntry {
  seq: number;
  kind: "comment" | "response" | "dropped";
  text: string;
  author?: string;
  commentId?: string;
}

export interface SubtitleState {
  text: string;
  durationMs: number;
  source: "narration" | "response";
  at: number;
}

export interface UiSessionView {
  stage: string;
  cursor: number;
  product: { routingId: number; name: string } | null;
  subtitle: SubtitleState | null;
  sloganOverlay: string | null;
  hookBubble: string | null;
  ctaLabel: string | null;
  audioAssetId: string | null;
  transcript: TranscriptLine[];
  scrollback: ScrollbackEntry[];
}

export class RenderError extends Error {}

export function initialView(): UiSessionView {
  return {
    stage: "idle_narration",
    cursor: 0,
    product: null,
    subtitle: null,
    sloganOverlay: null,
    hookBubble: null,
    ctaLabel: null,
    audioAssetId: null,
    transcript: [],
    scrollback: [],
  };
}

function requireFields(fields: ResponseFields): ResponseFields {
  for (const key of ["spoken", "slogan", "hook_question", "cta"] as const) {
    if (!fields[key] || !fields[key].trim()) {
      throw new RenderError(`response delivery missing field ${key}`);
    }
  }
  return fields;
}

/** Apply one event in place; returns true when the event changed the view
 * (stale or duplicate sequence numbers are ignored). */
export function applyEvent(view: UiSessionView, event: ApiEvent): boolean {
  if (event.seq <= view.cursor) {
    return false;
  }
  view.cursor = event.seq;
  switch (event.type) {
    case "stage_change": {
      const data = event.data as StageChangeData;
      view.stage = data.to;
      break;
    }
    case "narration_segment": {
      const data = event.data as NarrationSegmentData;
      view.subtitle = {
        text: data.text,
        durationMs: data.duration_ms,
        source: "narration",
        at: event.at,
      };
      view.audioAssetId = data.asset_id;
      view.transcript.push({ seq: event.seq, kind: "narration", text: data.text });
      break;
    }
    case "response_delivery": {
      const data = event.data as ResponseDeliveryData;
      const fields = requireFields(data.response);
      view.subtitle = {
        text: fields.spoken,
        durationMs: data.duration_ms,
        source: "response",
        at: event.at,
      };
      view.sloganOverlay = fields.slogan;
      view.hookBubble = fields.hook_question;
      view.ctaLabel = fields.cta;
      view.audioAssetId = data.asset_id;
      view.transcript.push({ seq: event.seq, kind: "response", text: fields.spoken });
      view.scrollback.push({
        seq: event.seq,
        kind: "response",
        text: fields.spoken,
        commentId: data.comment_id,
      });
      break;
    }
    case "product_focus": {
      const data = event.data as ProductFocusData;
      view.product = { routingId: data.routing_id, name: data.product_name };
      break;
    }
    case "comment_received": {
      const data = event.data as CommentReceivedData;
      view.scrollback.push({
        seq: event.seq,
        kind: "comment",
        text: data.text,
        author: data.author,
        commentId: data.comment_id,
      });
      break;
    }
    case "comment_dropped": {
      const data = event.data as CommentDroppedData;
      view.scrollback.push({
        seq: event.seq,
        kind: "dropped",
        text: `comment ${data.comment_id} dropped (queue full)`,
        commentId: data.comment_id,
      });
      break;
    }
  }
  return true;
}
