/** Pure HTML renderers. Keeping these free of DOM access lets the test
 * suite assert on the exact rendered output in node. */

import {
  canSubmitCard,
  RATING_DISPLAY,
  RATING_LABELS,
  type CardState,
  type JobStatus,
  type Stats,
} from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function renderRatingControls(cs: CardState, index: number): string {
  const buttons = RATING_LABELS.map((label) => {
    const pressed = cs.draftRating === label ? ' aria-pressed="true"' : "";
    return (
      `<button class="rating" data-card="${index}" data-rating="${label}"${pressed}>` +
      `${RATING_DISPLAY[label]}</button>`
    );
  });
  return `<div class="rating-controls">${buttons.join("")}</div>`;
}

export function renderCard(cs: CardState, index: number): string {
  const parts = [
    `<article class="card" data-passage-id="${escapeHtml(cs.card.passage_id)}">`,
    `<p class="passage">${escapeHtml(cs.card.passage_text)}</p>`,
    `<span class="score">retriever ${cs.card.retriever_prob.toFixed(3)}</span>`,
  ];
  // explanation panel only when the service produced one
  if (cs.card.explanation && cs.card.explanation.trim().length > 0) {
    parts.push(
      `<blockquote class="explanation">${escapeHtml(cs.card.explanation)}</blockquote>`,
    );
  }
  parts.push(renderRatingControls(cs, index));
  parts.push(
    `<textarea class="feedback-text" data-card="${index}">` +
      `${escapeHtml(cs.draftExplanation)}</textarea>`,
  );
  const disabled = canSubmitCard(cs) ? "" : " disabled";
  parts.push(
    `<button class="submit" data-card="${index}"${disabled}>Submit feedback</button>`,
  );
  if (cs.state === "accepted") {
    parts.push('<span class="status">Feedback stored</span>');
  } else if (cs.state === "duplicate") {
    parts.push('<span class="status">Already submitted</span>');
  } else if (cs.error) {
    parts.push(`<span class="status error">${escapeHtml(cs.error)}</span>`);
  }
  parts.push("</article>");
  return parts.join("");
}

export function renderCards(cards: CardState[]): string {
  return cards.map(renderCard).join("");
}

export function renderAskError(message: string | null): string {
  if (!message) {
    return "";
  }
  return (
    `<div class="ask-error">${escapeHtml(message)} ` +
    '<button class="retry">Retry</button></div>'
  );
}

export function renderStats(stats: Stats | null): string {
  if (!stats) {
    return '<div class="stats">no data</div>';
  }
  const rows = Object.entries(stats.per_domain)
    .map(([domain, count]) => `<tr><td>${escapeHtml(domain)}</td><td>${count}</td></tr>`)
    .join("");
  return (
    `<table class="stats"><tbody>${rows}` +
    `<tr class="total"><td>Total</td><td>${stats.total_feedback}</td></tr>` +
    "</tbody></table>"
  );
}

export function renderJob(job: JobStatus | null): string {
  if (!job) {
    return '<div class="job">no job</div>';
  }
  const error = job.error ? ` — ${escapeHtml(job.error)}` : "";
  return `<div class="job" data-status="${job.status}">${job.status}${error}</div>`;
}
