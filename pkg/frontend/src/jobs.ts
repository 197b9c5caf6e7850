/**
 * Analysis-job polling with staged progress and terminal detection.
 *
 * Network failures retry with exponential backoff and surface as a
 * transient banner; a 404 is the terminal "job not found" state; done
 * and failed snapshots stop the polling loop.
 */

import type { JobSnapshot } from "./types.js";

export interface PollUpdate {
  kind: "progress" | "transient-error" | "terminal";
  snapshot: JobSnapshot | null;
  terminalState: "done" | "failed" | "not-found" | null;
  transientMessage: string | null;
}

export interface PollOptions {
  intervalMs: number;
  backoffFactor: number;
  maxBackoffMs: number;
  maxPolls: number;
}

export const DEFAULT_POLL_OPTIONS: PollOptions = {
  intervalMs: 500,
  backoffFactor: 2,
  maxBackoffMs: 8000,
  maxPolls: 100000,
};

export type FetchJob = (jobId: string) => Promise<{ status: number; body: JobSnapshot | null }>;
export type Sleep = (ms: number) => Promise<void>;

export async function pollJob(
  fetchJob: FetchJob,
  jobId: string,
  onUpdate: (update: PollUpdate) => void,
  options: PollOptions = DEFAULT_POLL_OPTIONS,
  sleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms)),
): Promise<PollUpdate> {
  let delay = options.intervalMs;
  let last: PollUpdate = {
    kind: "progress",
    snapshot: null,
    terminalState: null,
    transientMessage: null,
  };
  for (let attempt = 0; attempt < options.maxPolls; attempt++) {
    let response: { status: number; body: JobSnapshot | null };
    try {
      response = await fetchJob(jobId);
    } catch (err) {
      delay = Math.min(delay * options.backoffFactor, options.maxBackoffMs);
      last = {
        kind: "transient-error",
        snapshot: last.snapshot,
        terminalState: null,
        transientMessage: `network error while polling: ${String(err)}`,
      };
      onUpdate(last);
      await sleep(delay);
      continue;
    }

    if (response.status === 404) {
      last = {
        kind: "terminal",
        snapshot: null,
        terminalState: "not-found",
        transientMessage: null,
      };
      onUpdate(last);
      return last;
    }
    const snapshot = response.body;
    if (snapshot === null) {
      delay = Math.min(delay * options.backoffFactor, options.maxBackoffMs);
      last = {
        kind: "transient-error",
        snapshot: last.snapshot,
        terminalState: null,
        transientMessage: `unexpected status ${response.status}`,
      };
      onUpdate(last);
      await sleep(delay);
      continue;
    }

    delay = options.intervalMs; // healthy response resets the backoff
    if (snapshot.state === "done" || snapshot.state === "failed") {
      last = {
        kind: "terminal",
        snapshot,
        terminalState: snapshot.state,
        transientMessage: null,
      };
      onUpdate(last);
      return last;
    }
    last = {
      kind: "progress",
      snapshot,
      terminalState: null,
      transientMessage: null,
    };
    onUpdate(last);
    await sleep(delay);
  }
  return last;
}

/** Human-readable stage summary, e.g. "sfm running (2/8 done)". */
export function describeStages(snapshot: JobSnapshot): string {
  const entries = Object.entries(snapshot.stages);
  const done = entries.filter(([, s]) => s === "done" || s === "skipped").length;
  const active = entries.find(([, s]) => s === "running");
  const failed = entries.find(([, s]) => s === "failed");
  if (failed) return `failed at ${failed[0]}`;
  if (active) return `${active[0]} running (${done}/${entries.length} done)`;
  return `${done}/${entries.length} stages done`;
}
