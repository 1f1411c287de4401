import { describe, expect, it } from "vitest";

import { applyEvent, initialView, RenderError } from "../src/view.js";
import type { ApiEvent, ResponseDeliveryData, StageChangeData } from "../src/types.js";
import { loadReplayFixture } from "./helpers.js";

const LOG = loadReplayFixture();

describe("four-field rendering", () => {
  it("every response delivery populates subtitle, slogan, hook and cta", () => {
    const view = initialView();
    for (const event of LOG) {
      applyEvent(view, event);
      if (event.type !== "response_delivery") {
        continue;
      }
      const fields = (event.data as ResponseDeliveryData).response;
      expect(view.subtitle?.text).toBe(fields.spoken);
      expect(view.subtitle?.source).toBe("response");
      expect(view.sloganOverlay).toBe(fields.slogan);
      expect(view.hookBubble).toBe(fields.hook_question);
      expect(view.ctaLabel).toBe(fields.cta);
      const tail = view.scrollback[view.scrollback.length - 1];
      expect(tail.kind).toBe("response");
      expect(tail.text).toBe(fields.spoken);
    }
  });

  it("a missing field is a loud rendering error, never skipped", () => {
    const delivery = LOG.find((e) => e.type === "response_delivery") as ApiEvent;
    const crippled: ApiEvent = {
      ...delivery,
      seq: 1,
      data: {
        ...(delivery.data as ResponseDeliveryData),
        response: { ...(delivery.data as ResponseDeliveryData).response, cta: "  " },
      },
    };
    expect(() => applyEvent(initialView(), crippled)).toThrow(RenderError);
  });
});

describe("view state", () => {
  it("stage always equals the latest stage change", () => {
    const view = initialView();
    let expected = "idle_narration";
    for (const event of LOG) {
      applyEvent(view, event);
      if (event.type === "stage_change") {
        expected = (event.data as StageChangeData).to;
      }
      expect(view.stage).toBe(expected);
    }
  });

  it("sequence cursor never decreases and duplicates are ignored", () => {
    const view = initialView();
    for (const event of LOG.slice(0, 10)) {
      expect(applyEvent(view, event)).toBe(true);
    }
    const before = JSON.parse(JSON.stringify(view));
    expect(applyEvent(view, LOG[4])).toBe(false); // stale duplicate
    expect(view).toEqual(before);
    expect(view.cursor).toBe(10);
  });

  it("product focus drives the product card", () => {
    const view = initialView();
    for (const event of LOG) {
      applyEvent(view, event);
    }
    expect(view.product).not.toBeNull();
    const lastFocus = [...LOG].reverse().find((e) => e.type === "product_focus");
    expect(view.product?.name).toBe(
      (lastFocus?.data as { product_name: string }).product_name,
    );
  });

  it("comment arrivals and drops land in the scrollback", () => {
    const view = initialView();
    for (const event of LOG) {
      applyEvent(view, event);
    }
    const comments = view.scrollback.filter((e) => e.kind === "comment");
    expect(comments.length).toBe(LOG.filter((e) => e.type === "comment_received").length);
    expect(comments[0].author).toMatch(/^viewer-/);
  });
});
