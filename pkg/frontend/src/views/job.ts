// Job page: stage timeline fed by the poller, review editor while the job
// waits for approval, render log viewer, and the video once done.
//
// Every state string shown on this page is copied verbatim from a service
// response; the client never invents or renames states.

import { ApiError, approveScene, getJob, getLog, getScene, JobSummary } from "../api.js";
import { clear, el, errorBox } from "../dom.js";
import { JobPoller, TERMINAL_STATES } from "../poll.js";

const STAGE_ORDER = ["queued", "planning", "awaiting_review", "coding", "rendering", "done"];

export function renderJobView(root: HTMLElement, jobId: string): () => void {
  clear(root);

  const stateBadge = el("span", { id: "job-state", class: "badge" });
  const heading = el("div", { class: "job-heading" }, [
    el("h2", {}, [`Job ${jobId}`]),
    stateBadge,
  ]);
  const inputLine = el("p", { id: "job-input", class: "muted" });
  const timeline = el("ol", { id: "timeline", class: "timeline" });
  const reviewSlot = el("div", { id: "review-slot" });
  const failureSlot = el("div", { id: "failure-slot" });
  const videoSlot = el("div", { id: "video-slot" });
  const logSlot = el("div", { id: "log-slot" });
  const historyBody = el("tbody", { id: "history-body" });
  const history = el("details", { class: "history" }, [
    el("summary", {}, ["History"]),
    el("table", {}, [
      el("thead", {}, [
        el("tr", {}, [el("th", {}, ["when"]), el("th", {}, ["state"]), el("th", {}, ["detail"])]),
      ]),
      historyBody,
    ]),
  ]);

  root.append(
    el("div", { class: "card" }, [
      heading, inputLine, timeline, reviewSlot, failureSlot, videoSlot, logSlot, history,
    ]),
  );

  let reviewShownFor: string | null = null;

  const apply = (job: JobSummary) => {
    stateBadge.textContent = job.state;
    stateBadge.className = `badge badge-${job.state}`;
    inputLine.textContent = `${job.input_kind}: ${job.input_label} (${job.mode} mode)`;
    renderTimeline(timeline, job);
    renderHistory(historyBody, job);

    if (job.state === "awaiting_review" && reviewShownFor !== job.id) {
      reviewShownFor = job.id;
      void renderReviewEditor(reviewSlot, job, (updated) => {
        reviewShownFor = null;
        clear(reviewSlot);
        apply(updated);
        poller.start();
      });
    } else if (job.state !== "awaiting_review") {
      reviewShownFor = null;
      clear(reviewSlot);
    }

    clear(failureSlot);
    if (job.failure) {
      failureSlot.append(
        errorBox(`Failed while ${job.failure.stage}.`, job.failure.reason),
      );
    }

    if (job.state === "done" && !videoSlot.firstChild) {
      videoSlot.append(
        el("video", { id: "job-video", src: job.links.video, controls: "controls" }),
      );
    }
    if (TERMINAL_STATES.has(job.state) && !logSlot.firstChild) {
      void renderLog(logSlot, job);
    }
  };

  const poller = new JobPoller(jobId, {
    onUpdate: apply,
    onError: () => {
      /* transient poll errors are invisible; the next tick retries */
    },
  });

  getJob(jobId)
    .then((job) => {
      apply(job);
      if (!TERMINAL_STATES.has(job.state)) poller.start();
    })
    .catch((err) => {
      clear(root);
      if (err instanceof ApiError) root.append(errorBox(err.message, err.detail));
      else root.append(errorBox("The service is unreachable."));
    });

  return () => poller.stop();
}

function renderTimeline(timeline: HTMLElement, job: JobSummary): void {
  const reached = new Map(job.history.map((entry) => [entry.state, entry]));
  const stages = STAGE_ORDER.filter(
    (stage) => stage !== "awaiting_review" || job.mode === "review" || reached.has(stage),
  );
  clear(timeline);
  for (const stage of stages) {
    const status = reached.has(stage) ? (stage === job.state ? "current" : "reached") : "pending";
    timeline.append(el("li", { class: `stage ${status}`, "data-stage": stage }, [stage]));
  }
  if (job.state === "failed") {
    timeline.append(el("li", { class: "stage failed", "data-stage": "failed" }, ["failed"]));
  }
}

function renderHistory(body: HTMLElement, job: JobSummary): void {
  clear(body);
  for (const entry of job.history) {
    body.append(
      el("tr", {}, [
        el("td", {}, [new Date(entry.at * 1000).toLocaleTimeString()]),
        el("td", {}, [entry.state]),
        el("td", {}, [entry.detail]),
      ]),
    );
  }
}

async function renderReviewEditor(
  slot: HTMLElement,
  job: JobSummary,
  onApproved: (job: JobSummary) => void,
): Promise<void> {
  clear(slot);
  let text: string;
  try {
    text = await getScene(job.id);
  } catch {
    slot.append(errorBox("Could not load the plan for review."));
    return;
  }

  const editor = el("textarea", { id: "scene-editor", rows: "14", spellcheck: "false" });
  editor.value = text;
  const errorSlot = el("div", { id: "review-error" });
  const approveButton = el("button", { id: "approve-scene", class: "primary", type: "button" }, [
    "Approve plan",
  ]);
  approveButton.addEventListener("click", () => {
    clear(errorSlot);
    approveButton.setAttribute("disabled", "disabled");
    approveScene(job.id, editor.value)
      .then(onApproved)
      .catch((err) => {
        approveButton.removeAttribute("disabled");
        if (err instanceof ApiError) errorSlot.append(errorBox(err.message, err.detail));
        else errorSlot.append(errorBox("The service is unreachable."));
      });
  });

  slot.append(
    el("div", { class: "review card-inset" }, [
      el("h3", {}, ["Review the plan"]),
      el("p", { class: "muted" }, [
        "Edit the markdown if needed, then approve to continue to code generation.",
      ]),
      editor,
      errorSlot,
      approveButton,
    ]),
  );
}

async function renderLog(slot: HTMLElement, job: JobSummary): Promise<void> {
  try {
    const text = await getLog(job.id);
    slot.append(
      el("details", { class: "log" }, [
        el("summary", {}, ["Render log"]),
        el("pre", { id: "render-log" }, [text]),
      ]),
    );
  } catch {
    // jobs that failed before rendering have no log; nothing to show
  }
}
