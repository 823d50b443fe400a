import { describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { renderAskError, renderCards } from "../src/render.js";
import { FeedbackSession } from "../src/session.js";
import { RATING_DISPLAY, RATING_LABELS } from "../src/types.js";
import { makeCards, StubService } from "./stubService.js";

function setup() {
  const stub = new StubService({ alpha: makeCards("alpha"), beta: makeCards("beta") });
  const client = new ServiceClient("http://svc", stub.fetch);
  return { stub, client, session: new FeedbackSession(client) };
}

describe("ask flow", () => {
  it("renders exactly the served cards, in order", async () => {
    const { session } = setup();
    await session.ask("what alpha", "alpha");
    expect(session.cards.map((c) => c.card.passage_id)).toEqual([
      "alpha-p0",
      "alpha-p1",
    ]);
    const html = renderCards(session.cards);
    const first = html.indexOf('data-passage-id="alpha-p0"');
    const second = html.indexOf('data-passage-id="alpha-p1"');
    expect(first).toBeGreaterThanOrEqual(0);
    expect(second).toBeGreaterThan(first);
    // nothing beyond the served cards
    expect(html.match(/<article/g)).toHaveLength(2);
    expect(html).toContain("alpha passage 0");
    expect(html).toContain("alpha passage 1");
  });

  it("shows the service explanation verbatim and hides the panel when absent", async () => {
    const { session } = setup();
    await session.ask("what alpha", "alpha");
    const [withExplanation, withoutExplanation] = session.cards.map((cs, i) =>
      renderCards([session.cards[i]]),
    );
    expect(withExplanation).toContain("covers the alpha question");
    expect(withoutExplanation).not.toContain('class="explanation"');
    // rating controls are still shown either way
    expect(withoutExplanation).toContain('class="rating-controls"');
  });

  it("always presents all four rating labels in the fixed order", async () => {
    const { session } = setup();
    await session.ask("what beta", "beta");
    const html = renderCards([session.cards[0]]);
    let cursor = -1;
    for (const label of RATING_LABELS) {
      const at = html.indexOf(`data-rating="${label}"`);
      expect(at).toBeGreaterThan(cursor);
      cursor = at;
    }
    expect(RATING_LABELS).toEqual([
      "bad",
      "could_be_improved",
      "good",
      "excellent",
    ]);
    expect(html).toContain(RATING_DISPLAY.could_be_improved);
  });

  it("surfaces 4xx as an inline message without crashing", async () => {
    const { session } = setup();
    await session.ask("what", "Mars");
    expect(session.askError).toContain("UnknownDomain");
    expect(session.cards).toEqual([]);
    expect(renderAskError(session.askError)).toContain("Retry");
  });

  it("offers retry when the service is down, then recovers", async () => {
    const stub = new StubService({ alpha: makeCards("alpha") });
    let down = true;
    const flaky: typeof stub.fetch = (url, init) =>
      down ? Promise.reject(new Error("ECONNREFUSED")) : stub.fetch(url, init);
    const session = new FeedbackSession(new ServiceClient("http://svc", flaky));

    await session.ask("what alpha", "alpha");
    expect(session.askError).toContain("retry");
    expect(session.cards).toEqual([]);

    down = false;
    await session.ask("what alpha", "alpha"); // the retry affordance
    expect(session.askError).toBeNull();
    expect(session.cards).toHaveLength(2);
  });
});
