/** Server payload shapes, mirrored from the service's JSON contract. */

export interface StagePayload {
  kind: string;
  frame_index: number | null;
  next_slot: string | null;
  next_question: number | null;
}

export interface CuePayload {
  time_frame: { label: string; approximate_days: number };
  event_summary: string;
  slots: Record<string, string | null>;
  narrative: string;
  format_ok: boolean;
  tense_ok: boolean;
}

export interface SessionPayload {
  session_id: string;
  stage: StagePayload;
  frames: { label: string; approximate_days: number }[];
  cues: CuePayload[];
  transcript: { role: string; content: string }[];
  extraction: ExtractionPayload | null;
}

export interface CreateSessionResponse {
  session_id: string;
  stage: StagePayload;
  greeting: string;
}

export interface TurnResponse {
  reply: string;
  stage: StagePayload;
  blocked: boolean;
  cue: CuePayload | null;
}

export interface ExtractionPayload {
  generated_efts: Record<string, string>;
  scores: Record<string, number>;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  retriable: boolean;
}

/** One chat bubble. */
export interface UiMessage {
  sender: "user" | "assistant";
  text: string;
  timestamp: string;
  blocked: boolean;
}

/** One cue card. */
export interface UiCue {
  frame: string;
  narrative: string;
  format_ok: boolean;
  tense_ok: boolean;
}

/** Everything the view needs to render. */
export interface UiSessionView {
  session_id: string | null;
  stage: StagePayload | null;
  messages: UiMessage[];
  pending: boolean;
  cues: UiCue[];
  notice: string | null;
  error: string | null;
  results: ExtractionPayload | null;
  resultsPlaceholder: string | null;
  /** Rating just clicked, highlighted until the server advances the question. */
  lastRating: number | null;
}

import { STRINGS } from "./strings.js";

export function stageLabel(stage: StagePayload | null): string {
  if (!stage) return STRINGS.stageNotStarted;
  return STRINGS.stages[stage.kind] ?? stage.kind;
}
