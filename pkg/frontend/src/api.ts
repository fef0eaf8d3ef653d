/** HTTP client for the study service.
 *
 * Submissions are retried with exponential backoff on transport errors and
 * 5xx responses; the response text is never dropped before the service
 * acknowledges it.  4xx responses are final (retrying cannot help).
 */

import { parseTrialJob, submissionDoc, TrialJob } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;
export type SleepFn = (ms: number) => Promise<void>;

const realSleep: SleepFn = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

export class SubmissionRejected extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

export class StudyClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
    private readonly sleep: SleepFn = realSleep,
    private readonly backoffMs: number = 250,
  ) {}

  /** Next eligible job for the subject, or null when none remain. */
  async nextJob(subjectId: string): Promise<TrialJob | null> {
    const url = `${this.baseUrl}/jobs/next?subject=${encodeURIComponent(subjectId)}`;
    const response = await this.fetchFn(url);
    if (response.status === 204) return null;
    if (!response.ok) {
      throw new Error(`job fetch failed: HTTP ${response.status}`);
    }
    return parseTrialJob(await response.json());
  }

  /** Post one free-text answer; resolves only once acknowledged. */
  async submitResponse(
    jobId: string,
    subject: string,
    text: string,
    maxAttempts = 5,
  ): Promise<void> {
    const url = `${this.baseUrl}/jobs/${encodeURIComponent(jobId)}/response`;
    const body = JSON.stringify(submissionDoc(subject, text));
    let lastError: unknown = null;
    for (let attempt = 0; attempt < maxAttempts; attempt++) {
      if (attempt > 0) {
        await this.sleep(this.backoffMs * 2 ** (attempt - 1));
      }
      let response: Response;
      try {
        response = await this.fetchFn(url, {
          method: "POST",
          headers: { "Content-Type": "application/json" },
          body,
        });
      } catch (error) {
        lastError = error; // network failure: keep the response and retry
        continue;
      }
      if (response.ok) return;
      if (response.status >= 400 && response.status < 500) {
        throw new SubmissionRejected(
          response.status,
          `HTTP ${response.status}: ${await response.text()}`,
        );
      }
      lastError = new Error(`HTTP ${response.status}`);
    }
    throw new Error(`submission not acknowledged after ${maxAttempts} attempts: ${lastError}`);
  }
}
