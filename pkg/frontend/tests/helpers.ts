// Scripted fetch stub standing in for the animation service. Tests mutate
// the job table to advance states; every state string served through
// GET /jobs/:id is recorded so UI tests can assert the display mirrors
// the API exactly.

import { JobSummary } from "../src/api.js";

export interface StubRating {
  job_id: string;
  dims: number[];
}

export function makeJob(id: string, overrides: Partial<JobSummary> = {}): JobSummary {
  return {
    id,
    state: "queued",
    mode: "auto",
    input_kind: "prompt",
    input_label: "Explain the Fourier Transform",
    created_at: 1_700_000_000,
    updated_at: 1_700_000_000,
    history: [{ at: 1_700_000_000, state: "queued", detail: "job submitted" }],
    failure: null,
    links: {
      self: `/jobs/${id}`,
      scene: `/jobs/${id}/scene`,
      video: `/jobs/${id}/video`,
      log: `/jobs/${id}/log`,
    },
    ...overrides,
  };
}

export class StubApi {
  jobs = new Map<string, JobSummary>();
  scenes = new Map<string, string>();
  ratings: StubRating[] = [];
  servedStates: string[] = [];
  approvedBodies: string[] = [];
  getCalls = 0;
  summary: { count: number; score: { dims: Record<string, number>; overall: number } | null } = {
    count: 0,
    score: null,
  };
  submitResponse: JobSummary | null = null;
  submitBodies: unknown[] = [];
  rejectApproval: ((body: string) => boolean) | null = null;

  advance(id: string, state: string, detail = ""): void {
    const job = this.jobs.get(id);
    if (!job) throw new Error(`no stub job ${id}`);
    job.state = state;
    job.updated_at += 1;
    job.history = [...job.history, { at: job.updated_at, state, detail }];
    if (state === "failed") job.failure = { stage: "rendering", reason: detail || "boom" };
  }

  install(): void {
    globalThis.fetch = ((input: RequestInfo | URL, init?: RequestInit) =>
      this.dispatch(String(input), init)) as typeof fetch;
  }

  private async dispatch(url: string, init?: RequestInit): Promise<Response> {
    const method = (init?.method ?? "GET").toUpperCase();
    const path = url.split("?")[0];

    if (method === "POST" && path === "/jobs") {
      this.submitBodies.push(typeof init?.body === "string" ? JSON.parse(init.body) : init?.body);
      if (!this.submitResponse) return error(500, "Internal", "no scripted submit response");
      this.jobs.set(this.submitResponse.id, this.submitResponse);
      return json(202, this.submitResponse);
    }

    if (method === "GET" && path === "/jobs") {
      const state = new URL(url, "http://stub").searchParams.get("state");
      const jobs = [...this.jobs.values()].filter((j) => !state || j.state === state);
      return json(200, { jobs });
    }

    const jobMatch = /^\/jobs\/([^/]+)$/.exec(path);
    if (jobMatch && method === "GET") {
      const job = this.jobs.get(jobMatch[1]);
      if (!job) return error(404, "JobNotFound", "unknown job");
      this.getCalls += 1;
      this.servedStates.push(job.state);
      return json(200, snapshot(job));
    }

    const sceneMatch = /^\/jobs\/([^/]+)\/scene$/.exec(path);
    if (sceneMatch && method === "GET") {
      const scene = this.scenes.get(sceneMatch[1]);
      if (scene === undefined) return error(409, "WrongState", "no scene yet");
      return text(200, scene);
    }
    if (sceneMatch && method === "POST") {
      const body = String(init?.body ?? "");
      this.approvedBodies.push(body);
      if (this.rejectApproval?.(body)) {
        return error(422, "InvalidEditedPlan", "plan rejected", "Key Points: unbalanced math");
      }
      this.advance(sceneMatch[1], "coding", "plan approved");
      const job = this.jobs.get(sceneMatch[1])!;
      this.servedStates.push(job.state);
      return json(200, snapshot(job));
    }

    const logMatch = /^\/jobs\/([^/]+)\/log$/.exec(path);
    if (logMatch && method === "GET") {
      return text(200, "[stdout]\nstub render ok\n");
    }

    if (method === "POST" && path === "/ratings") {
      const body = JSON.parse(String(init?.body));
      this.ratings.push(body);
      return json(201, { id: this.ratings.length, job_id: body.job_id, dims: body.dims });
    }
    if (method === "GET" && path === "/ratings/summary") {
      return json(200, this.summary);
    }

    return error(404, "NotFound", `no stub route for ${method} ${path}`);
  }
}

function snapshot(job: JobSummary): JobSummary {
  return JSON.parse(JSON.stringify(job)) as JobSummary;
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function text(status: number, body: string): Response {
  return new Response(body, { status, headers: { "content-type": "text/markdown" } });
}

function error(status: number, code: string, message: string, detail = ""): Response {
  return json(status, { code, message, detail });
}

// Settle promise chains without advancing fake timers: setImmediate is
// never faked, so each turn drains every pending microtask first.
export async function flush(turns = 4): Promise<void> {
  for (let i = 0; i < turns; i += 1) {
    await new Promise<void>((resolve) => setImmediate(resolve));
  }
}
