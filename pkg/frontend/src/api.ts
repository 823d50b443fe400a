/** Thin JSON client for the service. The fetch implementation is
 * injectable so tests can run against an in-memory stub. */

import type {
  AskResponse,
  FeedbackResponse,
  JobStatus,
  RatingLabel,
  Stats,
} from "./types.js";

export interface FetchResponseLike {
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<FetchResponseLike>;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export interface FeedbackBody {
  request_id: string;
  passage_id: string;
  rating: RatingLabel;
  explanation: string;
  client_session_id: string;
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (...args) =>
      fetch(...(args as Parameters<typeof fetch>)),
  ) {}

  private async request<T>(
    path: string,
    method: "GET" | "POST" = "GET",
    body?: unknown,
  ): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body ? { "Content-Type": "application/json" } : undefined,
      body: body ? JSON.stringify(body) : undefined,
    });
    const payload = (await res.json()) as Record<string, unknown>;
    if (res.status >= 400) {
      throw new ApiError(res.status, String(payload?.detail ?? "request failed"));
    }
    return payload as T;
  }

  health(): Promise<{ status: string; reranker_loaded: boolean }> {
    return this.request("/health");
  }

  domains(): Promise<{ domains: string[] }> {
    return this.request("/domains");
  }

  stats(): Promise<Stats> {
    return this.request("/stats");
  }

  ask(question: string, domain: string): Promise<AskResponse> {
    return this.request("/ask", "POST", { question, domain });
  }

  feedback(body: FeedbackBody): Promise<FeedbackResponse> {
    return this.request("/feedback", "POST", body);
  }

  retrain(provenance: string): Promise<{ job_id: string }> {
    return this.request("/admin/retrain", "POST", { provenance });
  }

  job(jobId: string): Promise<JobStatus> {
    return this.request(`/admin/jobs/${jobId}`);
  }
}
