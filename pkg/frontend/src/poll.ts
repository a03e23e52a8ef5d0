// Job polling: every second while a job is young, every five seconds once
// it has been running for two minutes, stopping on a terminal state.
// The cadence is fixed by timers, not by response latency; a tick that
// fires while a fetch is still in flight is skipped, so slow responses
// coalesce instead of stacking concurrent polls.

import { getJob, JobSummary } from "./api.js";

export const FAST_INTERVAL_MS = 1_000;
export const SLOW_INTERVAL_MS = 5_000;
export const BACKOFF_AFTER_MS = 120_000;
export const TERMINAL_STATES = new Set(["done", "failed"]);

export interface PollerCallbacks {
  onUpdate: (job: JobSummary) => void;
  onError?: (err: unknown) => void;
}

export class JobPoller {
  private readonly jobId: string;
  private readonly callbacks: PollerCallbacks;
  private startedAt = 0;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private stopped = false;

  constructor(jobId: string, callbacks: PollerCallbacks) {
    this.jobId = jobId;
    this.callbacks = callbacks;
  }

  start(): void {
    this.stopped = false;
    if (this.startedAt === 0) this.startedAt = Date.now();
    if (this.timer === null) this.schedule();
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  private interval(): number {
    const age = Date.now() - this.startedAt;
    return age >= BACKOFF_AFTER_MS ? SLOW_INTERVAL_MS : FAST_INTERVAL_MS;
  }

  private schedule(): void {
    if (this.stopped) return;
    this.timer = setTimeout(() => this.tick(), this.interval());
  }

  private tick(): void {
    if (this.stopped) return;
    this.schedule();
    if (this.inFlight) return;
    this.inFlight = true;
    getJob(this.jobId)
      .then((job) => {
        if (this.stopped) return;
        this.callbacks.onUpdate(job);
        if (TERMINAL_STATES.has(job.state)) this.stop();
      })
      .catch((err) => {
        if (!this.stopped) this.callbacks.onError?.(err);
      })
      .finally(() => {
        this.inFlight = false;
      });
  }
}
