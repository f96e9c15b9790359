/**
 * ChatStore: framework-free state machine behind the chat UI.
 *
 * Owns every state change; the DOM layer only renders snapshots and relays
 * clicks. All interview logic stays on the server: each mutation here is a
 * projection of one server response, and the pending flag simply mirrors the
 * server's one-turn-in-flight rule.
 */

import { ApiClient, ApiError } from "./api.js";
import { STRINGS } from "./strings.js";
import type { CuePayload, UiCue, UiMessage, UiSessionView } from "./types.js";

type Listener = () => void;

function toUiCue(cue: CuePayload): UiCue {
  return {
    frame: cue.time_frame.label,
    narrative: cue.narrative,
    format_ok: cue.format_ok,
    tense_ok: cue.tense_ok,
  };
}

export class ChatStore {
  private readonly api: ApiClient;
  private readonly now: () => string;
  private listeners = new Set<Listener>();
  private view: UiSessionView = {
    session_id: null,
    stage: null,
    messages: [],
    pending: false,
    cues: [],
    notice: null,
    error: null,
    results: null,
    resultsPlaceholder: null,
    lastRating: null,
  };

  constructor(api: ApiClient, now: () => string = () => new Date().toISOString()) {
    this.api = api;
    this.now = now;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  getView(): UiSessionView {
    return this.view;
  }

  private update(patch: Partial<UiSessionView>): void {
    this.view = { ...this.view, ...patch };
    for (const listener of this.listeners) listener();
  }

  private bubble(sender: UiMessage["sender"], text: string, blocked = false): UiMessage {
    return { sender, text, timestamp: this.now(), blocked };
  }

  get canSend(): boolean {
    return this.view.session_id !== null && !this.view.pending && this.view.stage?.kind !== "done";
  }

  get ratingVisible(): boolean {
    return this.view.stage?.kind === "feedback" && !this.view.pending;
  }

  async start(frames?: string[]): Promise<void> {
    this.update({ pending: true, error: null, notice: null });
    try {
      const created = await this.api.createSession(frames);
      this.update({
        session_id: created.session_id,
        stage: created.stage,
        messages: [this.bubble("assistant", created.greeting)],
        cues: [],
        results: null,
        resultsPlaceholder: null,
        pending: false,
      });
    } catch (err) {
      this.update({ pending: false, error: describe(err) });
    }
  }

  async send(text: string): Promise<void> {
    const trimmed = text.trim();
    if (!trimmed || !this.canSend || this.view.session_id === null) return;
    const optimistic = this.bubble("user", trimmed);
    this.update({
      pending: true,
      notice: null,
      error: null,
      messages: [...this.view.messages, optimistic],
    });
    try {
      const turn = await this.api.sendMessage(this.view.session_id, trimmed);
      const messages = [
        ...this.view.messages,
        this.bubble("assistant", turn.reply, turn.blocked),
      ];
      const cues = turn.cue
        ? upsertCue(this.view.cues, toUiCue(turn.cue))
        : this.view.cues;
      this.update({ pending: false, messages, stage: turn.stage, cues, lastRating: null });
      if (turn.stage.kind === "done") {
        await this.loadResults();
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // Another turn is in flight: drop the optimistic bubble so the turn
        // is not duplicated, and tell the user to wait.
        this.update({
          pending: false,
          notice: STRINGS.stillThinking,
          messages: this.view.messages.filter((m) => m !== optimistic),
        });
        return;
      }
      this.update({
        pending: false,
        error: describe(err),
        messages: this.view.messages.filter((m) => m !== optimistic),
      });
    }
  }

  async submitRating(value: number): Promise<void> {
    if (!this.ratingVisible) return;
    if (!Number.isInteger(value) || value < 1 || value > 5) return;
    this.update({ lastRating: value });
    await this.send(String(value));
  }

  async loadResults(): Promise<void> {
    if (this.view.session_id === null) {
      this.update({ resultsPlaceholder: STRINGS.resultsInProgress });
      return;
    }
    try {
      const [session, extraction] = [
        await this.api.getSession(this.view.session_id),
        await this.api.getCues(this.view.session_id),
      ];
      this.update({
        results: extraction,
        cues: session.cues.filter((c) => c.narrative).map(toUiCue),
        resultsPlaceholder: null,
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        this.update({ results: null, resultsPlaceholder: STRINGS.resultsInProgress });
        return;
      }
      this.update({ error: describe(err) });
    }
  }
}

function upsertCue(cues: UiCue[], cue: UiCue): UiCue[] {
  const index = cues.findIndex((c) => c.frame === cue.frame);
  if (index === -1) return [...cues, cue];
  return cues.map((c, i) => (i === index ? cue : c));
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return err.message;
  if (err instanceof Error) return STRINGS.networkProblem(err.message);
  return STRINGS.genericProblem;
}
