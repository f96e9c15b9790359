import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatStore } from "../src/store.js";
import {
  DONE_STAGE,
  EVENT_STAGE,
  FEEDBACK_STAGE,
  FakeServer,
  GREETING_STAGE,
  cuePayload,
} from "./helpers.js";

async function makeStartedStore(server: FakeServer): Promise<ChatStore> {
  server.on("POST", "/sessions", 201, {
    session_id: "s1",
    stage: GREETING_STAGE,
    greeting: "Hello! Ready?",
  });
  const store = new ChatStore(new ApiClient("", server.fetch), () => "t0");
  await store.start();
  return store;
}

describe("ChatStore.start", () => {
  it("creates a session and renders the greeting bubble", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    const view = store.getView();
    expect(view.session_id).toBe("s1");
    expect(view.messages).toHaveLength(1);
    expect(view.messages[0]).toMatchObject({ sender: "assistant", text: "Hello! Ready?" });
    expect(view.pending).toBe(false);
  });
});

describe("ChatStore.send", () => {
  it("appends the user bubble immediately and the reply on response", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "Great! What event?",
      stage: EVENT_STAGE,
      blocked: false,
      cue: null,
    });

    const pendingStates: boolean[] = [];
    store.subscribe(() => pendingStates.push(store.getView().pending));
    await store.send("hi");

    const view = store.getView();
    expect(view.messages.map((m) => m.sender)).toEqual(["assistant", "user", "assistant"]);
    expect(view.messages[2]?.text).toBe("Great! What event?");
    expect(view.stage).toEqual(EVENT_STAGE);
    // Pending toggled on while awaiting the reply, then off.
    expect(pendingStates[0]).toBe(true);
    expect(pendingStates[pendingStates.length - 1]).toBe(false);
  });

  it("ignores sends while a turn is pending", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "reply",
      stage: EVENT_STAGE,
      blocked: false,
      cue: null,
    });
    const first = store.send("hello");
    await store.send("second while pending");
    await first;
    const turnCalls = server.calls.filter((c) => c.path === "/sessions/s1/messages");
    expect(turnCalls).toHaveLength(1);
  });

  it("shows a still-thinking notice on 409 without duplicating the turn", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 409, {
      code: "conflict",
      message: "a turn is already in flight for this session",
      retriable: true,
    });
    await store.send("hi");
    const view = store.getView();
    expect(view.notice).toMatch(/still thinking/i);
    expect(view.messages).toHaveLength(1); // optimistic bubble rolled back
    expect(view.pending).toBe(false);
  });

  it("marks blocked replies so they can be styled distinctly", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "I can't help with that message.",
      stage: GREETING_STAGE,
      blocked: true,
      cue: null,
    });
    await store.send("something off");
    const last = store.getView().messages.at(-1);
    expect(last?.blocked).toBe(true);
  });

  it("records the cue card when a turn emits a cue", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "Here is your cue",
      stage: FEEDBACK_STAGE,
      blocked: false,
      cue: cuePayload("1 month", true, false),
    });
    await store.send("very happy");
    const cues = store.getView().cues;
    expect(cues).toHaveLength(1);
    expect(cues[0]).toMatchObject({ frame: "1 month", format_ok: true, tense_ok: false });
  });

  it("surfaces network failures with a retry hint and rolls back", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    // No scripted response → fetch throws.
    await store.send("hi");
    const view = store.getView();
    expect(view.error).toMatch(/retry/i);
    expect(view.messages).toHaveLength(1);
    expect(view.pending).toBe(false);
  });
});

describe("ChatStore.submitRating", () => {
  async function storeAtFeedback(server: FakeServer): Promise<ChatStore> {
    const store = await makeStartedStore(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "cue text",
      stage: FEEDBACK_STAGE,
      blocked: false,
      cue: cuePayload("1 month"),
    });
    await store.send("feeling great");
    return store;
  }

  it("posts the rating digit as a normal message turn", async () => {
    const server = new FakeServer();
    const store = await storeAtFeedback(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "Thanks!",
      stage: { ...FEEDBACK_STAGE, next_question: 1 },
      blocked: false,
      cue: null,
    });
    await store.submitRating(4);
    const last = server.calls.at(-1);
    expect(last?.body).toEqual({ text: "4" });
  });

  it("highlights the chosen value until the server advances", async () => {
    const server = new FakeServer();
    const store = await storeAtFeedback(server);
    server.on("POST", "/sessions/s1/messages", 200, {
      reply: "Thanks!",
      stage: { ...FEEDBACK_STAGE, next_question: 1 },
      blocked: false,
      cue: null,
    });
    let sawHighlightWhilePending = false;
    store.subscribe(() => {
      const v = store.getView();
      if (v.pending && v.lastRating === 3) sawHighlightWhilePending = true;
    });
    await store.submitRating(3);
    expect(sawHighlightWhilePending).toBe(true);
    expect(store.getView().lastRating).toBeNull();
  });

  it("only accepts integers one through five", async () => {
    const server = new FakeServer();
    const store = await storeAtFeedback(server);
    const before = server.calls.length;
    await store.submitRating(0);
    await store.submitRating(6);
    await store.submitRating(2.5);
    expect(server.calls.length).toBe(before);
  });

  it("does nothing outside the feedback stage", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server); // greeting stage
    const before = server.calls.length;
    await store.submitRating(3);
    expect(server.calls.length).toBe(before);
    expect(store.ratingVisible).toBe(false);
  });
});

describe("ChatStore.loadResults", () => {
  it("shows a placeholder before extraction exists", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("GET", "/sessions/s1", 200, {
      session_id: "s1",
      stage: GREETING_STAGE,
      frames: [],
      cues: [],
      transcript: [],
      extraction: null,
    });
    server.on("GET", "/sessions/s1/cues", 404, {
      code: "not_found",
      message: "extraction not available yet",
      retriable: false,
    });
    await store.loadResults();
    const view = store.getView();
    expect(view.results).toBeNull();
    expect(view.resultsPlaceholder).toMatch(/in progress/i);
  });

  it("loads cue cards and scores once the interview is done", async () => {
    const server = new FakeServer();
    const store = await makeStartedStore(server);
    server.on("GET", "/sessions/s1", 200, {
      session_id: "s1",
      stage: DONE_STAGE,
      frames: [{ label: "1 month", approximate_days: 30 }],
      cues: [cuePayload("1 month")],
      transcript: [],
      extraction: null,
    });
    server.on("GET", "/sessions/s1/cues", 200, {
      generated_efts: { "1 month": "In about 1 month, I am walking." },
      scores: { "How vivid? (1 month)": 5 },
    });
    await store.loadResults();
    const view = store.getView();
    expect(view.resultsPlaceholder).toBeNull();
    expect(view.results?.scores["How vivid? (1 month)"]).toBe(5);
    expect(view.cues).toHaveLength(1);
  });
});
