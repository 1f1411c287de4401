/** Wire types mirroring the dialogue gateway's documented event schema. */

export interface StageChangeData {
  from: string;
  to: string;
}

export interface NarrationSegmentData {
  text: string;
  script_index: number;
  sentence_index: number;
  duration_ms: number;
  asset_id: string | null;
}

export interface ResponseFields {
  spoken: string;
  slogan: string;
  hook_question: string;
  cta: string;
}

export interface ResponseDeliveryData {
  response: ResponseFields;
  comment_id: string;
  duration_ms: number;
  asset_id: string | null;
}

export interface ProductFocusData {
  routing_id: number;
  product_name: string;
}

export interface CommentReceivedData {
  comment_id: string;
  text: string;
  author: string;
}

export interface CommentDroppedData {
  comment_id: string;
}

export type EventData =
  | StageChangeData
  | NarrationSegmentData
  | ResponseDeliveryData
  | ProductFocusData
  | CommentReceivedData
  | CommentDroppedData;

/** One sequence-numbered event as emitted on the SSE wire. */
export interface ApiEvent {
  seq: number;
  server_ts: number;
  at: number;
  type:
    | "stage_change"
    | "narration_segment"
    | "response_delivery"
    | "product_focus"
    | "comment_received"
    | "comment_dropped";
  data: EventData;
}

export interface AblationFlags {
  tt_disabled: boolean;
  pci_disabled: boolean;
  rr_disabled: boolean;
}

export interface SessionSnapshot {
  session_id: string;
  stage: string;
  lease_holder: string;
  clock: number;
  queue_length: number;
  last_seq: number;
  focus: { routing_id: number; product_name: string } | null;
  ablation: AblationFlags;
}

export interface ProductSummary {
  routing_id: number;
  name: string;
  category: string;
}

export interface ProductDetail extends ProductSummary {
  ingredients: { name: string; role: string }[];
  texture: string;
  skin_types: string[];
  usage: string;
  talking_points: string[];
  disclaimer: string;
  image_url: string;
}
