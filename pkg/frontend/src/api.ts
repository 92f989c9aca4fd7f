import type { DecisionAck, Progress, ReviewAction, ReviewItem } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

/** Typed client for the review service; `fetchImpl` is injectable for tests. */
export class ApiClient {
  constructor(
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
    private base = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    if (!resp.ok) {
      throw new ApiError(resp.status, `${init?.method ?? "GET"} ${path}: ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  fetchQueue(count: number): Promise<ReviewItem[]> {
    return this.request<ReviewItem[]>(`/api/items?status=pending&count=${count}`);
  }

  fetchItem(faceId: string): Promise<ReviewItem> {
    return this.request<ReviewItem>(`/api/items/${encodeURIComponent(faceId)}`);
  }

  submitDecision(faceId: string, action: ReviewAction, reviewer: string): Promise<DecisionAck> {
    return this.request<DecisionAck>(`/api/items/${encodeURIComponent(faceId)}/decision`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ action, reviewer }),
    });
  }

  fetchProgress(): Promise<Progress> {
    return this.request<Progress>("/api/progress");
  }

  async fetchExport(): Promise<string> {
    const resp = await this.fetchImpl(this.base + "/api/export");
    if (!resp.ok) throw new ApiError(resp.status, `GET /api/export: ${resp.status}`);
    return await resp.text();
  }

  exportUrl(): string {
    return this.base + "/api/export";
  }
}
