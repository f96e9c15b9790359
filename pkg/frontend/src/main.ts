import { ApiClient } from "./api.js";
import { STRINGS } from "./strings.js";
import { ChatStore } from "./store.js";
import { renderChat, renderResults } from "./view.js";

function bootstrap(): void {
  const chatRoot = document.getElementById("chat-root");
  const resultsRoot = document.getElementById("results-root");
  const chatTab = document.getElementById("tab-chat");
  const resultsTab = document.getElementById("tab-results");
  if (!chatRoot || !resultsRoot || !chatTab || !resultsTab) {
    throw new Error("missing mount points in index.html");
  }

  const store = new ChatStore(new ApiClient(""));

  const handlers = {
    onSend: (text: string) => void store.send(text),
    onRate: (value: number) => void store.submitRating(value),
    onNewSession: () => void store.start(),
    onShowResults: () => {
      void store.loadResults().then(() => showTab("results"));
    },
  };

  function showTab(which: "chat" | "results"): void {
    chatRoot!.hidden = which !== "chat";
    resultsRoot!.hidden = which !== "results";
  }

  chatTab.textContent = STRINGS.tabChat;
  resultsTab.textContent = STRINGS.tabResults;

  chatTab.addEventListener("click", () => showTab("chat"));
  resultsTab.addEventListener("click", () => {
    void store.loadResults().then(() => showTab("results"));
  });

  function render(): void {
    renderChat(chatRoot!, store.getView(), handlers);
    renderResults(resultsRoot!, store.getView());
  }

  store.subscribe(render);
  render();
  void store.start();
}

bootstrap();
