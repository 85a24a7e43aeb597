/** Thin typed client over the review-service endpoints.
 *
 * The UI mutates server state through postDecision only; every displayed
 * number comes from these reads, never from client-side recomputation.
 */

import type { DecisionBody, ItemDetail, ItemSummary, StatsSnapshot } from "./types.js";

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly errorCode: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiRequestError";
  }
}

async function parseError(response: Response): Promise<ApiRequestError> {
  let code = "unknown_error";
  let message = `HTTP ${response.status}`;
  try {
    const body = (await response.json()) as { error_code?: string; message?: string };
    if (body.error_code) code = body.error_code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiRequestError(response.status, code, message);
}

/** What the session needs from the transport; Api is the real one. */
export interface ApiClient {
  queue(status?: string): Promise<ItemSummary[]>;
  item(itemId: string): Promise<ItemDetail>;
  taxonomy(): Promise<string[]>;
  stats(): Promise<StatsSnapshot>;
  postDecision(itemId: string, body: DecisionBody): Promise<ItemDetail>;
}

export class Api implements ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  async queue(status = "pending"): Promise<ItemSummary[]> {
    const body = await this.get<{ items: ItemSummary[] }>(
      `/api/queue?status=${encodeURIComponent(status)}`,
    );
    return body.items;
  }

  async item(itemId: string): Promise<ItemDetail> {
    return this.get<ItemDetail>(`/api/items/${encodeURIComponent(itemId)}`);
  }

  async taxonomy(): Promise<string[]> {
    const body = await this.get<{ categories: string[] }>("/api/taxonomy");
    return body.categories;
  }

  async stats(): Promise<StatsSnapshot> {
    return this.get<StatsSnapshot>("/api/stats");
  }

  async postDecision(itemId: string, body: DecisionBody): Promise<ItemDetail> {
    const response = await this.fetchFn(
      `${this.baseUrl}/api/items/${encodeURIComponent(itemId)}/decisions`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as ItemDetail;
  }
}
