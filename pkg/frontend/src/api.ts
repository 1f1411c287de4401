/** REST client for the dialogue gateway's documented endpoints. */
import type { AblationFlags, ProductDetail, ProductSummary, SessionSnapshot } from "./types.js";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const response = await fetch(url, init);
  if (!response.ok) {
    const body = await response.text();
    throw new ApiError(`${init?.method ?? "GET"} ${url}: ${body}`, response.status);
  }
  return (await response.json()) as T;
}

export class GatewayClient {
  constructor(readonly baseUrl: string) {}

  createSession(): Promise<{ session_id: string; stage: string }> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({}),
    });
  }

  snapshot(sessionId: string): Promise<SessionSnapshot> {
    return request(`${this.baseUrl}/sessions/${sessionId}`);
  }

  postComment(sessionId: string, text: string, author: string): Promise<{ comment_id: string }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/comments`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, author }),
    });
  }

  setAblation(sessionId: string, flags: Partial<AblationFlags>): Promise<{ ablation: AblationFlags }> {
    return request(`${this.baseUrl}/sessions/${sessionId}/ablation`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(flags),
    });
  }

  listProducts(): Promise<{ products: ProductSummary[] }> {
    return request(`${this.baseUrl}/products`);
  }

  productDetail(routingId: number): Promise<ProductDetail> {
    return request(`${this.baseUrl}/products/${routingId}`);
  }
}
