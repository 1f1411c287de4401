/** Live-room entry point: joins (or creates) a session, follows its event
 * stream with gapless resumption, and wires the viewer and operator controls. */
import { GatewayClient } from "./api.js";
import { EventStreamClient, HttpSseTransport } from "./events.js";
import { animateProgress, lookupRegions, renderView } from "./dom.js";
import { applyEvent, initialView } from "./view.js";
import type { AblationFlags, ProductDetail } from "./types.js";

const params = new URLSearchParams(window.location.search);
const gatewayUrl = params.get("gateway") ?? "http://127.0.0.1:8700";
const mediaUrl = params.get("media");

async function start(): Promise<void> {
  const api = new GatewayClient(gatewayUrl);
  const regions = lookupRegions(document);
  const view = initialView();
  let productDetail: ProductDetail | null = null;

  let sessionId = params.get("session");
  if (!sessionId) {
    sessionId = (await api.createSession()).session_id;
    const url = new URL(window.location.href);
    url.searchParams.set("session", sessionId);
    window.history.replaceState(null, "", url.toString());
  }

  const form = document.querySelector<HTMLFormElement>("#comment-form")!;
  const input = document.querySelector<HTMLInputElement>("#comment-input")!;
  const author = document.querySelector<HTMLInputElement>("#author-input")!;
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    const text = input.value.trim();
    if (!text) {
      return;
    }
    input.value = "";
    // optimistic append; the authoritative entry arrives on the stream
    const optimistic = document.createElement("div");
    optimistic.className = "line comment pending";
    optimistic.textContent = `${author.value || "我"}: ${text}`;
    regions.scrollback.appendChild(optimistic);
    api.postComment(sessionId!, text, author.value || "viewer").then(
      () => optimistic.remove(),
      (err) => {
        optimistic.classList.add("failed");
        optimistic.title = String(err);
      },
    );
  });

  for (const flag of ["tt_disabled", "pci_disabled", "rr_disabled"] as const) {
    const box = document.querySelector<HTMLInputElement>(`#flag-${flag}`)!;
    box.addEventListener("change", async () => {
      const patch: Partial<AblationFlags> = { [flag]: box.checked };
      const reply = await api.setAblation(sessionId!, patch);
      box.checked = reply.ablation[flag]; // reflect server-confirmed state
    });
  }

  const audio = document.querySelector<HTMLAudioElement>("#audio")!;
  const client = new EventStreamClient(new HttpSseTransport(gatewayUrl, sessionId));
  for await (const event of client.events()) {
    applyEvent(view, event);
    if (event.type === "product_focus" && view.product) {
      productDetail = await api.productDetail(view.product.routingId).catch(() => null);
    }
    renderView(view, regions, productDetail);
    if (event.type === "narration_segment" || event.type === "response_delivery") {
      const duration = (event.data as { duration_ms: number }).duration_ms;
      if (mediaUrl && view.audioAssetId) {
        audio.src = `${mediaUrl}/assets/${view.audioAssetId}`;
        audio.play().catch(() => animateProgress(regions, duration));
      } else {
        animateProgress(regions, duration);
      }
    }
  }
}

start().catch((err) => {
  const banner = document.querySelector("#error-banner");
  if (banner) {
    banner.textContent = String(err);
  }
  console.error(err);
});
