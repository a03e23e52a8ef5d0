// Rating dashboard: finished jobs each get a five-dimension form (1-5,
// submit disabled until every dimension is chosen) plus an aggregate
// summary panel across all stored ratings.

import { ApiError, JobSummary, listJobs, postRating, ratingsSummary } from "../api.js";
import { clear, el, errorBox } from "../dom.js";

export const DIMENSION_LABELS: [string, string][] = [
  ["accuracy_depth", "Accuracy and depth"],
  ["visual_relevance", "Visual relevance"],
  ["logical_flow", "Logical flow"],
  ["element_layout", "Element layout"],
  ["visual_consistency", "Visual consistency"],
];

export function renderRateView(root: HTMLElement): void {
  clear(root);
  const summaryPanel = el("div", { id: "ratings-summary", class: "card" });
  const jobsPanel = el("div", { id: "ratable-jobs" });
  root.append(
    el("h2", {}, ["Rate finished animations"]),
    summaryPanel,
    jobsPanel,
  );

  void refreshSummary(summaryPanel);
  listJobs("done")
    .then((jobs) => {
      if (jobs.length === 0) {
        jobsPanel.append(el("p", { class: "muted" }, ["No finished jobs to rate yet."]));
        return;
      }
      for (const job of jobs) {
        jobsPanel.append(ratingCard(job, () => void refreshSummary(summaryPanel)));
      }
    })
    .catch(() => jobsPanel.append(errorBox("Could not list finished jobs.")));
}

async function refreshSummary(panel: HTMLElement): Promise<void> {
  try {
    const summary = await ratingsSummary();
    clear(panel);
    panel.append(el("h3", {}, ["Aggregate score"]));
    if (!summary.score) {
      panel.append(el("p", { class: "muted" }, ["No ratings submitted yet."]));
      return;
    }
    const list = el("dl", { class: "score-grid" });
    for (const [key, label] of DIMENSION_LABELS) {
      list.append(
        el("dt", {}, [label]),
        el("dd", {}, [formatScore(summary.score.dims[key])]),
      );
    }
    list.append(
      el("dt", { class: "overall" }, ["Overall (geometric mean)"]),
      el("dd", { class: "overall" }, [formatScore(summary.score.overall)]),
    );
    panel.append(list, el("p", { class: "muted" }, [`${summary.count} rating(s) recorded`]));
  } catch {
    clear(panel);
    panel.append(errorBox("Could not load the rating summary."));
  }
}

function formatScore(value: number | undefined): string {
  return value === undefined ? "-" : value.toFixed(4);
}

function ratingCard(job: JobSummary, onRated: () => void): HTMLElement {
  const selects: HTMLSelectElement[] = [];
  const grid = el("div", { class: "rating-grid" });
  for (const [key, label] of DIMENSION_LABELS) {
    const select = el("select", { "data-dimension": key });
    select.append(el("option", { value: "" }, ["-"]));
    for (const value of [1, 2, 3, 4, 5]) {
      select.append(el("option", { value: String(value) }, [String(value)]));
    }
    selects.push(select);
    grid.append(el("label", { class: "rating-row" }, [label, select]));
  }

  const submitButton = el(
    "button",
    { class: "primary rate-submit", type: "button", disabled: "disabled" },
    ["Submit rating"],
  );
  const errorSlot = el("div", { class: "rating-error" });

  const refreshEnabled = () => {
    const complete = selects.every((s) => s.value !== "");
    if (complete) submitButton.removeAttribute("disabled");
    else submitButton.setAttribute("disabled", "disabled");
  };
  selects.forEach((s) => s.addEventListener("change", refreshEnabled));

  submitButton.addEventListener("click", () => {
    clear(errorSlot);
    const dims = selects.map((s) => Number(s.value));
    submitButton.setAttribute("disabled", "disabled");
    postRating(job.id, dims)
      .then(() => {
        selects.forEach((s) => {
          s.value = "";
          s.setAttribute("disabled", "disabled");
        });
        submitButton.textContent = "Rated";
        onRated();
      })
      .catch((err) => {
        refreshEnabled();
        if (err instanceof ApiError) errorSlot.append(errorBox(err.message, err.detail));
        else errorSlot.append(errorBox("The service is unreachable."));
      });
  });

  return el("div", { class: "card rating-card", "data-job": job.id }, [
    el("div", { class: "job-heading" }, [
      el("h3", {}, [job.input_label]),
      el("a", { href: `#/jobs/${job.id}`, class: "muted" }, [job.id]),
    ]),
    el("video", { src: job.links.video, controls: "controls", preload: "none" }),
    grid,
    errorSlot,
    submitButton,
  ]);
}
