/** Admin view-model: feedback counts, retrain trigger, job polling. */

import { ApiError, ServiceClient } from "./api.js";
import type { JobStatus, Stats } from "./types.js";

export class AdminPanel {
  stats: Stats | null = null;
  jobId: string | null = null;
  job: JobStatus | null = null;
  /** Inline message from the last failed action (e.g. retrain with no
   * feedback yet); never blocks the rest of the panel. */
  error: string | null = null;

  constructor(private readonly client: ServiceClient) {}

  async refreshStats(): Promise<void> {
    try {
      this.stats = await this.client.stats();
    } catch (err) {
      this.error =
        err instanceof ApiError ? err.detail : "service unreachable — retry";
    }
  }

  /** Start a retrain job. Returns whether a job was accepted. */
  async triggerRetrain(provenance: string): Promise<boolean> {
    this.error = null;
    try {
      const res = await this.client.retrain(provenance);
      this.jobId = res.job_id;
      this.job = null;
      return true;
    } catch (err) {
      this.error =
        err instanceof ApiError ? err.detail : "service unreachable — retry";
      return false;
    }
  }

  async pollJobOnce(): Promise<JobStatus | null> {
    if (this.jobId === null) {
      return null;
    }
    this.job = await this.client.job(this.jobId);
    return this.job;
  }

  /** Poll until the job reaches a terminal state. `onTick` sees every
   * observed status, so the UI can show the queued → running → done
   * transitions. */
  async pollUntilDone(
    intervalMs: number,
    onTick?: (job: JobStatus) => void,
    sleep: (ms: number) => Promise<void> = (ms) =>
      new Promise((resolve) => setTimeout(resolve, ms)),
  ): Promise<JobStatus | null> {
    for (;;) {
      const job = await this.pollJobOnce();
      if (job === null) {
        return null;
      }
      onTick?.(job);
      if (job.status === "done" || job.status === "failed") {
        return job;
      }
      await sleep(intervalMs);
    }
  }
}
