/** Browser bootstrap: wires the view-models to the page. The logic lives
 * in session.ts / admin.ts / render.ts, which the test suite covers. */

import { AdminPanel } from "./admin.js";
import { ServiceClient } from "./api.js";
import { renderAskError, renderCards, renderJob, renderStats } from "./render.js";
import { FeedbackSession } from "./session.js";
import type { RatingLabel } from "./types.js";

const baseUrl =
  new URLSearchParams(window.location.search).get("service") ??
  "http://127.0.0.1:8000";

const client = new ServiceClient(baseUrl);
const session = new FeedbackSession(client);
const admin = new AdminPanel(client);

const $ = (id: string) => document.getElementById(id) as HTMLElement;

function paint(): void {
  $("cards").innerHTML = renderCards(session.cards);
  $("ask-error").innerHTML = renderAskError(session.askError);
  $("stats").innerHTML = renderStats(admin.stats);
  $("job").innerHTML = renderJob(admin.job);
}

async function askFromForm(): Promise<void> {
  const question = ($("question") as HTMLInputElement).value;
  const domain = ($("domain") as HTMLSelectElement).value;
  await session.ask(question, domain);
  paint();
}

async function init(): Promise<void> {
  const { domains } = await client.domains();
  ($("domain") as HTMLSelectElement).innerHTML = domains
    .map((d) => `<option value="${d}">${d}</option>`)
    .join("");
  await admin.refreshStats();
  paint();

  $("ask-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void askFromForm();
  });

  $("cards").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const index = Number(target.dataset.card);
    if (Number.isNaN(index)) {
      return;
    }
    if (target.classList.contains("rating")) {
      session.setRating(index, target.dataset.rating as RatingLabel);
      paint();
    } else if (target.classList.contains("submit")) {
      void session.submit(index).then(async () => {
        await admin.refreshStats();
        paint();
      });
    }
  });

  $("cards").addEventListener("input", (ev) => {
    const target = ev.target as HTMLTextAreaElement;
    if (target.classList.contains("feedback-text")) {
      session.setExplanation(Number(target.dataset.card), target.value);
      paint();
    }
  });

  $("ask-error").addEventListener("click", (ev) => {
    if ((ev.target as HTMLElement).classList.contains("retry")) {
      void askFromForm();
    }
  });

  $("retrain").addEventListener("click", () => {
    void admin
      .triggerRetrain(($("provenance") as HTMLSelectElement).value)
      .then(async (started) => {
        paint();
        if (started) {
          await admin.pollUntilDone(1000, () => paint());
        }
      });
  });
}

void init();
