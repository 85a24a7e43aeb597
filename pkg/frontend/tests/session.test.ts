import { beforeEach, describe, expect, it } from "vitest";

import { ApiRequestError } from "../src/api.js";
import { ReviewSession } from "../src/session.js";
import { CATEGORIES, FakeApi, makeItem } from "./fakes.js";

describe("queue loading", () => {
  let api: FakeApi;

  beforeEach(() => {
    api = new FakeApi();
  });

  it("shows an empty queue on an empty store", async () => {
    const session = new ReviewSession(api, "alice");
    expect(await session.loadQueue()).toEqual([]);
    expect(session.current).toBeNull();
  });

  it("hides items this reviewer already decided", async () => {
    api.seed([makeItem("i1"), makeItem("i2", ["alice"]), makeItem("i3")]);
    const session = new ReviewSession(api, "alice");
    const queue = await session.loadQueue();
    expect(queue.map((i) => i.item_id)).toEqual(["i1", "i3"]);
  });

  it("keeps other reviewers' items visible", async () => {
    api.seed([makeItem("i1", ["bob"])]);
    const session = new ReviewSession(api, "alice");
    expect((await session.loadQueue()).length).toBe(1);
  });

  it("focuses the first undecided item", async () => {
    api.seed([makeItem("i1", ["alice"]), makeItem("i2")]);
    const session = new ReviewSession(api, "alice");
    await session.loadQueue();
    expect(session.current?.item_id).toBe("i2");
  });

  it("rejects an empty reviewer id", () => {
    expect(() => new ReviewSession(api, "  ")).toThrow();
  });
});

describe("decisions", () => {
  let api: FakeApi;
  let session: ReviewSession;

  beforeEach(async () => {
    api = new FakeApi();
    api.seed([makeItem("i1"), makeItem("i2")]);
    session = new ReviewSession(api, "alice");
    await session.loadQueue();
  });

  it("accept posts and advances optimistically", async () => {
    await session.accept();
    expect(api.posts).toEqual([
      { itemId: "i1", body: { reviewer_id: "alice", verdict: "accept" } },
    ]);
    expect(session.current?.item_id).toBe("i2");
    expect(session.queue.map((i) => i.item_id)).toEqual(["i2"]);
  });

  it("reject requires a category before submit", async () => {
    await session.openRejectModal();
    expect(session.canSubmitReject()).toBe(false);
    await session.submitReject(); // no-op while blocked
    expect(api.posts).toEqual([]);
    session.selectCategory(2);
    expect(session.canSubmitReject()).toBe(true);
    await session.submitReject();
    expect(api.posts[0].body.reason_category).toBe(CATEGORIES[2]);
    expect(session.modal.open).toBe(false);
  });

  it("duplicate-decision race reconciles by refreshing the queue", async () => {
    api.failNextPostWith = new ApiRequestError(409, "duplicate_decision", "already decided");
    await session.accept();
    expect(session.lastError).toContain("duplicate_decision");
    // the queue was re-fetched from the server and i1 is still pending there
    expect(session.queue.map((i) => i.item_id)).toEqual(["i1", "i2"]);
  });

  it("next rotates without posting", async () => {
    await session.next();
    expect(api.posts).toEqual([]);
    expect(session.current?.item_id).toBe("i2");
    expect(session.queue.map((i) => i.item_id)).toEqual(["i2", "i1"]);
  });

  it("empties cleanly after the last decision", async () => {
    await session.accept();
    await session.accept();
    expect(session.current).toBeNull();
    expect(session.queue).toEqual([]);
  });
});

describe("dashboard", () => {
  it("serves numbers straight from the API", async () => {
    const api = new FakeApi();
    api.seed([makeItem("i1")]);
    api.attempts = 4;
    const session = new ReviewSession(api, "alice");
    const stats = await session.loadStats();
    expect(stats.attempts).toBe(4);
    expect(session.stats).not.toBeNull();
  });
});
