// Hash router and page shell. Routes: #/ submit form, #/jobs/<id> job
// page, #/rate rating dashboard. The active job page returns a teardown
// callback so its poller dies on navigation.

import { renderJobView } from "./views/job.js";
import { renderRateView } from "./views/rate.js";
import { renderSubmitView } from "./views/submit.js";

let teardown: (() => void) | null = null;

export function route(root: HTMLElement, hash: string): void {
  if (teardown) {
    teardown();
    teardown = null;
  }
  const jobMatch = /^#\/jobs\/([^/]+)$/.exec(hash);
  if (jobMatch) {
    teardown = renderJobView(root, decodeURIComponent(jobMatch[1]));
    return;
  }
  if (hash === "#/rate") {
    renderRateView(root);
    return;
  }
  renderSubmitView(root, (next) => {
    window.location.hash = next;
  });
}

export function boot(): void {
  const root = document.getElementById("app");
  if (!root) return;
  const shell = () => route(root, window.location.hash);
  window.addEventListener("hashchange", shell);
  shell();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot();
}
