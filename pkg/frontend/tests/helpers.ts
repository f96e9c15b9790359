/** A scripted fetch stub: queue responses per "METHOD path" key. */

import type { FetchLike } from "../src/api.js";

interface Scripted {
  status: number;
  body: unknown;
}

export class FakeServer {
  private queues = new Map<string, Scripted[]>();
  readonly calls: { method: string; path: string; body: unknown }[] = [];

  on(method: string, path: string, status: number, body: unknown): this {
    const key = `${method} ${path}`;
    const queue = this.queues.get(key) ?? [];
    queue.push({ status, body });
    this.queues.set(key, queue);
    return this;
  }

  fetch: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const path = input.toString();
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.calls.push({ method, path, body });
    const queue = this.queues.get(`${method} ${path}`);
    const scripted = queue?.shift();
    if (!scripted) {
      throw new Error(`no scripted response for ${method} ${path}`);
    }
    return new Response(JSON.stringify(scripted.body), {
      status: scripted.status,
      headers: { "Content-Type": "application/json" },
    });
  };
}

export const GREETING_STAGE = {
  kind: "greeting",
  frame_index: null,
  next_slot: null,
  next_question: null,
};

export const EVENT_STAGE = {
  kind: "event_elicitation",
  frame_index: 0,
  next_slot: null,
  next_question: null,
};

export const FEEDBACK_STAGE = {
  kind: "feedback",
  frame_index: 0,
  next_slot: null,
  next_question: 0,
};

export const DONE_STAGE = {
  kind: "done",
  frame_index: null,
  next_slot: null,
  next_question: null,
};

export function cuePayload(label: string, formatOk = true, tenseOk = true) {
  return {
    time_frame: { label, approximate_days: 30 },
    event_summary: "an outing",
    slots: { companions: "a friend", activity: "walking", location: "park", feeling: "happy" },
    narrative: `In about ${label}, I am walking in the park with a friend. I am happy.`,
    format_ok: formatOk,
    tense_ok: tenseOk,
  };
}
