/**
 * DOM rendering. Pure projection of a UiSessionView snapshot; every state
 * change goes through the store's handlers.
 */

import { STRINGS } from "./strings.js";
import type { UiSessionView } from "./types.js";
import { stageLabel } from "./types.js";

export interface ViewHandlers {
  onSend: (text: string) => void;
  onRate: (value: number) => void;
  onNewSession: () => void;
  onShowResults: () => void;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderChat(root: HTMLElement, view: UiSessionView, handlers: ViewHandlers): void {
  root.textContent = "";

  const header = el("header", "topbar");
  header.append(el("h1", "title", STRINGS.appTitle));
  const stage = el("span", "stage-indicator", stageLabel(view.stage));
  stage.dataset.stage = view.stage?.kind ?? "none";
  header.append(stage);
  const newButton = el("button", "new-session", STRINGS.newInterview);
  newButton.addEventListener("click", () => handlers.onNewSession());
  header.append(newButton);
  root.append(header);

  const messages = el("div", "messages");
  for (const message of view.messages) {
    const bubble = el("div", `bubble ${message.sender}`, message.text);
    if (message.blocked) bubble.classList.add("blocked");
    bubble.dataset.sender = message.sender;
    messages.append(bubble);
  }
  if (view.pending) {
    messages.append(el("div", "bubble assistant typing", STRINGS.typing));
  }
  root.append(messages);

  if (view.notice) root.append(el("div", "notice", view.notice));
  if (view.error) root.append(el("div", "error", view.error));

  if (view.stage?.kind === "feedback") {
    const widget = el("div", "rating-widget");
    widget.append(el("span", "rating-label", STRINGS.ratingLabel));
    for (let value = 1; value <= 5; value++) {
      const button = el("button", "rating-button", String(value));
      button.dataset.value = String(value);
      button.disabled = view.pending;
      if (view.lastRating === value) button.classList.add("selected");
      button.addEventListener("click", () => handlers.onRate(value));
      widget.append(button);
    }
    root.append(widget);
  }

  const form = el("form", "composer");
  const input = el("input", "composer-input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = view.session_id ? STRINGS.inputPlaceholder : STRINGS.inputPlaceholderNoSession;
  input.disabled = view.pending || view.session_id === null || view.stage?.kind === "done";
  const send = el("button", "composer-send", STRINGS.send) as HTMLButtonElement;
  send.type = "submit";
  send.disabled = input.disabled;
  form.append(input, send);
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    if (input.value.trim() && !input.disabled) {
      handlers.onSend(input.value);
      input.value = "";
    }
  });
  root.append(form);

  if (view.stage?.kind === "done") {
    const resultsButton = el("button", "show-results", STRINGS.viewResults);
    resultsButton.addEventListener("click", () => handlers.onShowResults());
    root.append(resultsButton);
  }
}

export function renderResults(root: HTMLElement, view: UiSessionView): void {
  root.textContent = "";
  root.append(el("h2", "results-title", STRINGS.resultsTitle));

  if (view.resultsPlaceholder) {
    root.append(el("div", "results-placeholder", view.resultsPlaceholder));
    return;
  }

  const cards = el("div", "cue-cards");
  for (const cue of view.cues) {
    const card = el("article", "cue-card");
    card.dataset.frame = cue.frame;
    card.append(el("h3", "cue-frame", STRINGS.framePrefix(cue.frame)));
    card.append(el("p", "cue-narrative", cue.narrative));
    const badges = el("div", "badges");
    const format = el("span", `badge ${cue.format_ok ? "ok" : "bad"}`, STRINGS.badgeFormat(cue.format_ok));
    format.dataset.check = "format";
    format.dataset.ok = String(cue.format_ok);
    const tense = el("span", `badge ${cue.tense_ok ? "ok" : "bad"}`, STRINGS.badgeTense(cue.tense_ok));
    tense.dataset.check = "tense";
    tense.dataset.ok = String(cue.tense_ok);
    badges.append(format, tense);
    card.append(badges);
    cards.append(card);
  }
  root.append(cards);

  if (view.results) {
    const scores = el("div", "scores");
    scores.append(el("h3", "scores-title", STRINGS.scoresTitle));
    const list = el("ul", "score-list");
    for (const [question, score] of Object.entries(view.results.scores)) {
      list.append(el("li", "score-item", `${question}: ${score}`));
    }
    scores.append(list);
    root.append(scores);
  }
}
