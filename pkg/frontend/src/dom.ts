/** DOM rendering: one UiSessionView snapshot into the fixed page regions.
 * Every region re-renders from the view, so the page is always the view. */
import type { UiSessionView } from "./view.js";
import type { ProductDetail } from "./types.js";

export interface Regions {
  stage: HTMLElement;
  avatar: HTMLElement;
  subtitle: HTMLElement;
  slogan: HTMLElement;
  productCard: HTMLElement;
  hook: HTMLElement;
  cta: HTMLButtonElement;
  scrollback: HTMLElement;
  progress: HTMLElement;
}

export function lookupRegions(root: Document | HTMLElement): Regions {
  const find = <T extends HTMLElement>(id: string): T => {
    const node = root.querySelector(`#${id}`);
    if (!node) {
      throw new Error(`missing region #${id}`);
    }
    return node as T;
  };
  return {
    stage: find("stage-inspector"),
    avatar: find("avatar"),
    subtitle: find("subtitle"),
    slogan: find("slogan-overlay"),
    productCard: find("product-card"),
    hook: find("hook-bubble"),
    cta: find<HTMLButtonElement>("cta-button"),
    scrollback: find("scrollback"),
    progress: find("progress-bar"),
  };
}

export function renderView(view: UiSessionView, regions: Regions,
                           productDetail: ProductDetail | null): void {
  regions.stage.textContent = view.stage;
  regions.stage.dataset.stage = view.stage;
  regions.avatar.classList.toggle("speaking",
    view.stage === "idle_narration" || view.stage === "responding");

  regions.subtitle.textContent = view.subtitle?.text ?? "";
  regions.subtitle.dataset.source = view.subtitle?.source ?? "";
  regions.slogan.textContent = view.sloganOverlay ?? "";
  regions.slogan.style.visibility = view.sloganOverlay ? "visible" : "hidden";
  regions.hook.textContent = view.hookBubble ?? "";
  regions.hook.style.visibility = view.hookBubble ? "visible" : "hidden";
  regions.cta.textContent = view.ctaLabel ?? "";
  regions.cta.disabled = !view.ctaLabel;

  if (view.product) {
    const detailBits = productDetail && productDetail.routing_id === view.product.routingId
      ? `<img src="${productDetail.image_url}" alt="" class="product-image">
         <ul>${productDetail.talking_points.map((p) => `<li>${p}</li>`).join("")}</ul>`
      : "";
    regions.productCard.innerHTML = `<h3>${view.product.name}</h3>${detailBits}`;
  } else {
    regions.productCard.innerHTML = "";
  }

  regions.scrollback.innerHTML = view.scrollback
    .map((entry) => {
      if (entry.kind === "comment") {
        return `<div class="line comment"><b>${entry.author}</b> ${entry.text}</div>`;
      }
      if (entry.kind === "response") {
        return `<div class="line response">${entry.text}</div>`;
      }
      return `<div class="line dropped">${entry.text}</div>`;
    })
    .join("");
  regions.scrollback.scrollTop = regions.scrollback.scrollHeight;
}

/** Visual progress bar timed by duration_ms; used when no audio asset URL is
 * reachable (media service optional). */
export function animateProgress(regions: Regions, durationMs: number): void {
  regions.progress.style.transition = "none";
  regions.progress.style.width = "0%";
  void regions.progress.offsetWidth; // reflow so the next transition restarts
  regions.progress.style.transition = `width ${durationMs}ms linear`;
  regions.progress.style.width = "100%";
}
