/** Ask/feedback view-model: holds the served cards and per-card drafts.
 * All displayed content originates from service responses; nothing is
 * fabricated client-side. */

import { ApiError, ServiceClient } from "./api.js";
import {
  canSubmitCard,
  type CardState,
  type RatingLabel,
} from "./types.js";

export class FeedbackSession {
  question = "";
  domain = "";
  requestId: string | null = null;
  cards: CardState[] = [];
  /** Inline, non-blocking error from the last ask; cards stay as they were. */
  askError: string | null = null;
  asking = false;

  constructor(
    private readonly client: ServiceClient,
    private readonly sessionId: string = "console",
  ) {}

  async ask(question: string, domain: string): Promise<void> {
    this.asking = true;
    this.askError = null;
    try {
      const res = await this.client.ask(question, domain);
      this.question = question;
      this.domain = domain;
      this.requestId = res.request_id;
      this.cards = res.answers.map((card) => ({
        card,
        draftRating: null,
        draftExplanation: "",
        state: "draft",
        error: null,
      }));
    } catch (err) {
      this.askError =
        err instanceof ApiError ? err.detail : "service unreachable — retry";
    } finally {
      this.asking = false;
    }
  }

  setRating(index: number, rating: RatingLabel): void {
    this.cards[index].draftRating = rating;
  }

  setExplanation(index: number, text: string): void {
    this.cards[index].draftExplanation = text;
  }

  canSubmit(index: number): boolean {
    return this.requestId !== null && canSubmitCard(this.cards[index]);
  }

  /** Submit one card's feedback. The state change to "submitting" is the
   * per-card lock: a second call while one is in flight is a no-op. Returns
   * whether a request was sent. */
  async submit(index: number): Promise<boolean> {
    if (!this.canSubmit(index)) {
      return false;
    }
    const cs = this.cards[index];
    cs.state = "submitting";
    cs.error = null;
    try {
      await this.client.feedback({
        request_id: this.requestId as string,
        passage_id: cs.card.passage_id,
        rating: cs.draftRating as RatingLabel,
        explanation: cs.draftExplanation,
        client_session_id: this.sessionId,
      });
      cs.state = "accepted";
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        cs.state = "duplicate"; // already stored server-side
      } else {
        cs.state = "draft"; // validation or transport error: allow retry
        cs.error = err instanceof ApiError ? err.detail : "submission failed — retry";
      }
    }
    return true;
  }
}
