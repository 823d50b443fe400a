/** In-memory stand-in for the qaloop service, exposed through the client's
 * injectable fetch. Mirrors the HTTP contract: served-card validation,
 * duplicate detection, stats, and the retrain job lifecycle (the job
 * advances one state per poll: queued → running → done). */

import type { FetchLike, FetchResponseLike } from "../src/api.js";
import type { AnswerCard } from "../src/types.js";

interface StoredRecord {
  question: string;
  passage_id: string;
  domain: string;
  rating: string;
  explanation: string;
  session: string;
}

const RATINGS = new Set(["bad", "could_be_improved", "good", "excellent"]);

function response(status: number, body: unknown): FetchResponseLike {
  return { status, json: () => Promise.resolve(body) };
}

export class StubService {
  records: StoredRecord[] = [];
  private served = new Map<string, { question: string; domain: string; ids: Set<string> }>();
  private seen = new Set<string>();
  private nextRequest = 0;
  private nextJob = 0;
  private jobs = new Map<string, { status: string; provenance: string; mode: string }>();
  private activeJob: string | null = null;

  constructor(private cardsByDomain: Record<string, AnswerCard[]>) {}

  /** fetch-compatible entry point bound to this stub. */
  fetch: FetchLike = (url, init) => {
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body ? JSON.parse(init.body) : {};
    return Promise.resolve(this.route(path, init?.method ?? "GET", body));
  };

  private route(path: string, method: string, body: any): FetchResponseLike {
    if (path === "/health") {
      return response(200, { status: "ok", reranker_loaded: true });
    }
    if (path === "/domains") {
      return response(200, { domains: Object.keys(this.cardsByDomain).sort() });
    }
    if (path === "/stats") {
      const perDomain: Record<string, number> = {};
      for (const domain of Object.keys(this.cardsByDomain)) {
        perDomain[domain] = this.records.filter((r) => r.domain === domain).length;
      }
      return response(200, {
        total_feedback: this.records.length,
        per_domain: perDomain,
      });
    }
    if (path === "/ask" && method === "POST") {
      return this.ask(body);
    }
    if (path === "/feedback" && method === "POST") {
      return this.feedback(body);
    }
    if (path === "/admin/retrain" && method === "POST") {
      return this.retrain(body);
    }
    const jobMatch = path.match(/^\/admin\/jobs\/(.+)$/);
    if (jobMatch) {
      return this.jobStatus(jobMatch[1]);
    }
    return response(404, { detail: "not found" });
  }

  private ask(body: any): FetchResponseLike {
    if (!body.question || !body.question.trim()) {
      return response(400, { detail: "EmptyQuestion" });
    }
    const cards = this.cardsByDomain[body.domain];
    if (!cards) {
      return response(400, { detail: `UnknownDomain: ${body.domain}` });
    }
    const requestId = `req-${this.nextRequest++}`;
    this.served.set(requestId, {
      question: body.question,
      domain: body.domain,
      ids: new Set(cards.map((c) => c.passage_id)),
    });
    return response(200, { request_id: requestId, answers: cards });
  }

  private feedback(body: any): FetchResponseLike {
    const req = this.served.get(body.request_id);
    if (!req) {
      return response(404, { detail: "UnknownRequest" });
    }
    if (!body.rating) {
      return response(422, { detail: "MissingRating" });
    }
    if (!RATINGS.has(body.rating)) {
      return response(422, { detail: `unknown rating '${body.rating}'` });
    }
    if (!req.ids.has(body.passage_id)) {
      return response(422, { detail: "passage was not served for this request" });
    }
    if (!body.explanation || !body.explanation.trim()) {
      return response(422, { detail: "explanation required" });
    }
    const key = `${body.request_id}|${body.passage_id}|${body.client_session_id}`;
    if (this.seen.has(key)) {
      return response(409, { detail: "DuplicateSubmission" });
    }
    this.seen.add(key);
    this.records.push({
      question: req.question,
      passage_id: body.passage_id,
      domain: req.domain,
      rating: body.rating,
      explanation: body.explanation,
      session: body.client_session_id,
    });
    return response(200, { accepted: true, feedback_count: this.records.length });
  }

  private retrain(body: any): FetchResponseLike {
    const provenance = body.provenance ?? "feedback";
    if (!["feedback", "vanilla", "combined"].includes(provenance)) {
      return response(422, { detail: `unknown provenance '${provenance}'` });
    }
    if (provenance !== "vanilla" && this.records.length === 0) {
      return response(422, { detail: "NoFeedbackYet" });
    }
    if (this.activeJob !== null) {
      return response(409, { detail: "JobAlreadyRunning" });
    }
    const jobId = `job-${this.nextJob++}`;
    this.jobs.set(jobId, { status: "queued", provenance, mode: "rating_only" });
    this.activeJob = jobId;
    return response(202, { job_id: jobId });
  }

  private jobStatus(jobId: string): FetchResponseLike {
    const job = this.jobs.get(jobId);
    if (!job) {
      return response(404, { detail: "unknown job" });
    }
    const snapshot = { job_id: jobId, ...job };
    if (job.status === "queued") {
      job.status = "running";
    } else if (job.status === "running") {
      job.status = "done";
      this.activeJob = null;
    }
    return response(200, snapshot);
  }
}

export function makeCards(domain: string, n = 2): AnswerCard[] {
  return Array.from({ length: n }, (_, i) => ({
    passage_id: `${domain}-p${i}`,
    passage_text: `${domain} passage ${i}`,
    retriever_prob: 0.5 - 0.1 * i,
    fused_score: 1.4 - 0.2 * i,
    rating_dist: [0.1, 0.1, 0.2, 0.6],
    explanation: i === 0 ? `covers the ${domain} question` : null,
  }));
}
