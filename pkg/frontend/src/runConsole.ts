/**
 * Run console: launches a run and polls its job until terminal, tracking
 * progress, cost against the configured limit, and the kill indicator.
 *
 * Polling starts at one second and backs off geometrically (capped); the
 * timer is injectable so tests can run the state machine synchronously.
 * Progress is asserted monotone: the console throws if the service ever
 * reports progress moving backwards.
 */

import { ApiClient, Job, RunInfo } from "./api.js";

export interface RunView {
  jobId: number;
  status: string;
  done: number;
  total: number;
  costSoFar: string | null;
  dollarLimit: string | null;
  killed: boolean;
  runId: number | null;
  error: string | null;
}

export type Sleeper = (ms: number) => Promise<void>;

const TERMINAL = new Set(["completed", "failed", "killed_budget"]);

const realSleep: Sleeper = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class RunConsole {
  readonly snapshots: RunView[] = [];

  constructor(
    private api: ApiClient,
    private sleep: Sleeper = realSleep,
    private baseIntervalMs = 1000,
    private maxIntervalMs = 5000,
  ) {}

  async launch(config: Record<string, unknown>, idempotencyKey?: string): Promise<number> {
    const { job } = await this.api.launchRun(config, idempotencyKey);
    return job;
  }

  /** Polls until the job is terminal; returns the final view. */
  async watch(jobId: number, dollarLimit: string | null = null): Promise<RunView> {
    let interval = this.baseIntervalMs;
    let previousDone = -1;
    for (;;) {
      const job = await this.api.getJob(jobId);
      if (job.progress.done < previousDone) {
        throw new Error(
          `job ${jobId} progress moved backwards: ${previousDone} -> ${job.progress.done}`,
        );
      }
      previousDone = job.progress.done;
      const view = await this.view(job, dollarLimit);
      this.snapshots.push(view);
      if (TERMINAL.has(job.status)) {
        return view;
      }
      await this.sleep(interval);
      interval = Math.min(interval * 1.5, this.maxIntervalMs);
    }
  }

  private async view(job: Job, dollarLimit: string | null): Promise<RunView> {
    let run: RunInfo | null = null;
    if (job.result_ref && job.result_ref.startsWith("run:")) {
      const runId = Number(job.result_ref.split(":")[1]);
      try {
        run = await this.api.getRun(runId);
      } catch {
        run = null; // run row not visible yet; show progress only
      }
    }
    return {
      jobId: job.id,
      status: job.status,
      done: job.progress.done,
      total: job.progress.total,
      costSoFar: run ? run.accumulated_cost : null,
      dollarLimit,
      killed: job.status === "killed_budget" || (run?.status === "killed_budget"),
      runId: run ? run.id : null,
      error: job.error,
    };
  }
}
