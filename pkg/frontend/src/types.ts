/** Wire types for the qaloop service and shared UI state. */

/** The four labels, in the fixed display order. */
export const RATING_LABELS = [
  "bad",
  "could_be_improved",
  "good",
  "excellent",
] as const;

export type RatingLabel = (typeof RATING_LABELS)[number];

export const RATING_DISPLAY: Record<RatingLabel, string> = {
  bad: "Bad",
  could_be_improved: "Could be improved",
  good: "Good",
  excellent: "Excellent",
};

export interface AnswerCard {
  passage_id: string;
  passage_text: string;
  retriever_prob: number;
  fused_score: number;
  rating_dist: number[] | null;
  explanation: string | null;
}

export interface AskResponse {
  request_id: string;
  answers: AnswerCard[];
}

export interface FeedbackResponse {
  accepted: boolean;
  feedback_count: number;
}

export interface Stats {
  total_feedback: number;
  per_domain: Record<string, number>;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  job_id: string;
  status: JobState;
  provenance: string;
  mode: string;
  error?: string;
}

export type SubmissionState = "draft" | "submitting" | "accepted" | "duplicate";

/** One served answer card plus the user's in-progress feedback for it. */
export interface CardState {
  card: AnswerCard;
  draftRating: RatingLabel | null;
  draftExplanation: string;
  state: SubmissionState;
  error: string | null;
}

/** Submit is allowed only with a rating, a non-empty explanation, and no
 * completed or in-flight submission for the card. */
export function canSubmitCard(cs: CardState): boolean {
  return (
    cs.state === "draft" &&
    cs.draftRating !== null &&
    cs.draftExplanation.trim().length > 0
  );
}
