// Typed client for the animation service. Every endpoint returns either
// parsed JSON or throws ApiError carrying the service's error envelope.

export interface HistoryEntry {
  at: number;
  state: string;
  detail: string;
}

export interface JobFailure {
  stage: string;
  reason: string;
}

export interface JobLinks {
  self: string;
  scene: string;
  video: string;
  log: string;
}

export interface JobSummary {
  id: string;
  state: string;
  mode: "auto" | "review";
  input_kind: string;
  input_label: string;
  created_at: number;
  updated_at: number;
  history: HistoryEntry[];
  failure: JobFailure | null;
  links: JobLinks;
}

export interface RatingSummary {
  count: number;
  score: { dims: Record<string, number>; overall: number } | null;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly detail: string;

  constructor(status: number, code: string, message: string, detail: string) {
    super(message);
    this.status = status;
    this.code = code;
    this.detail = detail;
  }
}

async function asApiError(response: Response): Promise<ApiError> {
  let code = "Unknown";
  let message = `request failed with status ${response.status}`;
  let detail = "";
  try {
    const body = await response.json();
    if (body && typeof body.code === "string") {
      code = body.code;
      message = body.message ?? message;
      detail = body.detail ?? "";
    }
  } catch {
    // non-JSON error body; keep the generic message
  }
  return new ApiError(response.status, code, message, detail);
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) throw await asApiError(response);
  return (await response.json()) as T;
}

function submitPath(mode: "auto" | "review"): string {
  return mode === "review" ? "/jobs?mode=review" : "/jobs";
}

export function submitPrompt(prompt: string, mode: "auto" | "review"): Promise<JobSummary> {
  return request<JobSummary>(submitPath(mode), {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ prompt }),
  });
}

export function submitArxiv(arxivId: string, mode: "auto" | "review"): Promise<JobSummary> {
  return request<JobSummary>(submitPath(mode), {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ arxiv_id: arxivId }),
  });
}

export function submitPdf(file: File, mode: "auto" | "review"): Promise<JobSummary> {
  const form = new FormData();
  form.append("pdf", file);
  return request<JobSummary>(submitPath(mode), { method: "POST", body: form });
}

export function getJob(id: string): Promise<JobSummary> {
  return request<JobSummary>(`/jobs/${encodeURIComponent(id)}`);
}

export async function listJobs(state?: string): Promise<JobSummary[]> {
  const query = state ? `?state=${encodeURIComponent(state)}` : "";
  const body = await request<{ jobs: JobSummary[] }>(`/jobs${query}`);
  return body.jobs;
}

export async function getScene(id: string): Promise<string> {
  const response = await fetch(`/jobs/${encodeURIComponent(id)}/scene`);
  if (!response.ok) throw await asApiError(response);
  return response.text();
}

// Empty text approves the plan unchanged; otherwise the text replaces it.
export function approveScene(id: string, text: string): Promise<JobSummary> {
  return request<JobSummary>(`/jobs/${encodeURIComponent(id)}/scene`, {
    method: "POST",
    headers: { "content-type": "text/markdown" },
    body: text,
  });
}

export async function getLog(id: string): Promise<string> {
  const response = await fetch(`/jobs/${encodeURIComponent(id)}/log`);
  if (!response.ok) throw await asApiError(response);
  return response.text();
}

export function postRating(jobId: string, dims: number[]): Promise<{ id: number }> {
  if (dims.length !== 5 || dims.some((d) => !Number.isInteger(d) || d < 1 || d > 5)) {
    throw new Error("rating must be five integers from 1 to 5");
  }
  return request<{ id: number }>("/ratings", {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify({ job_id: jobId, dims }),
  });
}

export function ratingsSummary(): Promise<RatingSummary> {
  return request<RatingSummary>("/ratings/summary");
}
