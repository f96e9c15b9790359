/** The single table of client-side user-visible strings. Everything else the
 * user reads comes from server payloads. */

export const STRINGS = {
  appTitle: "Future Moments",
  newInterview: "New interview",
  send: "Send",
  inputPlaceholder: "Type your answer…",
  inputPlaceholderNoSession: "Start a new interview first",
  ratingLabel: "Your rating:",
  viewResults: "View results",
  resultsTitle: "Your cue texts",
  scoresTitle: "Your ratings",
  tabChat: "Chat",
  tabResults: "Results",
  typing: "…",
  stillThinking: "Still thinking about your last message, one moment.",
  resultsInProgress: "Interview in progress. Results appear once it finishes.",
  networkProblem: (detail: string) => `Network problem: ${detail}. Please retry.`,
  genericProblem: "Something went wrong. Please retry.",
  framePrefix: (frame: string) => `In about ${frame}`,
  badgeFormat: (ok: boolean) => (ok ? "format ✓" : "format ✗"),
  badgeTense: (ok: boolean) => (ok ? "tense ✓" : "tense ✗"),
  stageNotStarted: "Not started",
  stages: {
    greeting: "Welcome",
    event_elicitation: "Choosing an event",
    detail_elicitation: "Adding details",
    cue_generation: "Writing your cue",
    feedback: "Rating the cue",
    extraction: "Wrapping up",
    done: "Complete",
  } as Record<string, string>,
};
