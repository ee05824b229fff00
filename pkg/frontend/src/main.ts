/**
 * Browser entry point. Reads ?session= and optional ?base= from the URL,
 * mounts the review screen into #app, and wires clicks by data-action.
 * All logic lives in the controller; this file only touches the DOM.
 */

import { ServiceClient } from "./api.js";
import { ReviewApp } from "./app.js";
import { renderHtml } from "./render.js";
import { headClip } from "./state.js";

function mount(): void {
  const container = document.getElementById("app");
  if (!container) throw new Error("missing #app container");

  const params = new URLSearchParams(window.location.search);
  const sessionId = params.get("session") ?? "s0001";
  const base = params.get("base") ?? window.location.origin;

  const client = new ServiceClient(base);
  const app = new ReviewApp(client, {
    onRender: (state) => {
      container.innerHTML = renderHtml(state, (clipId) => client.mediaUrl(clipId));
    },
  });

  container.addEventListener("click", (event) => {
    const target = event.target as HTMLElement | null;
    const button = target?.closest<HTMLElement>("[data-action]");
    if (!button) return;
    const action = button.dataset["action"];
    const head = headClip(app.state);
    if (action === "label-pos" && head !== null) {
      void app.submitAndAdvance({ clipId: head, label: "pos", submittedAt: Date.now() });
    } else if (action === "label-neg" && head !== null) {
      void app.submitAndAdvance({ clipId: head, label: "neg", submittedAt: Date.now() });
    } else if (action === "dismiss") {
      app.dismissBanner();
    } else if (action === "retry-load") {
      void app.loadSession(sessionId);
    } else if (action === "retry-label") {
      app.dismissBanner();
    }
  });

  void app.loadSession(sessionId).then((ok) => {
    if (ok) app.startPolling();
  });
}

if (typeof document !== "undefined") {
  mount();
}
