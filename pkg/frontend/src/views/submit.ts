// Submission form: one of prompt text, arXiv id, or PDF upload, plus the
// auto/review mode toggle. Service-side validation errors render inline.

import { ApiError, submitArxiv, submitPdf, submitPrompt } from "../api.js";
import { clear, el, errorBox } from "../dom.js";

type InputKind = "prompt" | "arxiv" | "pdf";

export function renderSubmitView(root: HTMLElement, navigate: (hash: string) => void): void {
  clear(root);

  const promptField = el("textarea", {
    id: "prompt-input",
    rows: "4",
    placeholder: "Explain the Fourier Transform",
  });
  const arxivField = el("input", {
    id: "arxiv-input",
    type: "text",
    placeholder: "2107.03374 or math/0211159",
  });
  const pdfField = el("input", { id: "pdf-input", type: "file", accept: ".pdf" });

  const panes: Record<InputKind, HTMLElement> = {
    prompt: el("div", { class: "input-pane" }, [promptField]),
    arxiv: el("div", { class: "input-pane hidden" }, [arxivField]),
    pdf: el("div", { class: "input-pane hidden" }, [pdfField]),
  };

  let kind: InputKind = "prompt";
  const tabs = el("div", { class: "tabs", role: "tablist" });
  for (const name of ["prompt", "arxiv", "pdf"] as InputKind[]) {
    const tab = el("button", { class: name === kind ? "tab active" : "tab", type: "button" }, [
      name === "arxiv" ? "arXiv ID" : name === "pdf" ? "PDF upload" : "Prompt",
    ]);
    tab.addEventListener("click", () => {
      kind = name;
      tabs.querySelectorAll(".tab").forEach((t) => t.classList.remove("active"));
      tab.classList.add("active");
      for (const [paneKind, pane] of Object.entries(panes)) {
        pane.classList.toggle("hidden", paneKind !== name);
      }
    });
    tabs.append(tab);
  }

  const reviewToggle = el("input", { id: "mode-review", type: "checkbox" });
  const submitButton = el("button", { id: "submit-job", class: "primary", type: "submit" }, [
    "Create animation",
  ]);
  const errorSlot = el("div", { id: "submit-error" });

  const form = el("form", { class: "card" }, [
    el("h2", {}, ["New animation"]),
    tabs,
    panes.prompt,
    panes.arxiv,
    panes.pdf,
    el("label", { class: "toggle" }, [reviewToggle, " pause for plan review before coding"]),
    errorSlot,
    submitButton,
  ]);

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    clear(errorSlot);
    const mode = (reviewToggle as HTMLInputElement).checked ? "review" : "auto";
    const submission = pickSubmission(kind, promptField, arxivField, pdfField, mode);
    if (submission === null) {
      errorSlot.append(errorBox("Provide an input first."));
      return;
    }
    submitButton.setAttribute("disabled", "disabled");
    submission
      .then((job) => navigate(`#/jobs/${job.id}`))
      .catch((err) => {
        submitButton.removeAttribute("disabled");
        if (err instanceof ApiError) errorSlot.append(errorBox(err.message, err.detail));
        else errorSlot.append(errorBox("The service is unreachable."));
      });
  });

  root.append(form);
}

function pickSubmission(
  kind: InputKind,
  promptField: HTMLTextAreaElement,
  arxivField: HTMLInputElement,
  pdfField: HTMLInputElement,
  mode: "auto" | "review",
) {
  if (kind === "prompt") {
    if (!promptField.value.trim()) return null;
    return submitPrompt(promptField.value, mode);
  }
  if (kind === "arxiv") {
    if (!arxivField.value.trim()) return null;
    return submitArxiv(arxivField.value.trim(), mode);
  }
  const file = pdfField.files?.[0];
  return file ? submitPdf(file, mode) : null;
}
