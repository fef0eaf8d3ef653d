/** One trial at a time: fetch, loop, collect one answer, acknowledge.
 *
 * The session never requests a second job before the current response is
 * acknowledged, and blocks double submission client-side.
 */

import { StudyClient } from "./api.js";
import { LoopPlayer, Timers } from "./player.js";
import { TrialJob } from "./types.js";

export type TrialState = "idle" | "showing" | "submitting" | "done" | "no_jobs";

export interface SubmitOutcome {
  accepted: boolean;
  reason?: string;
}

export class TrialSession {
  private state: TrialState = "idle";
  private job: TrialJob | null = null;
  private player: LoopPlayer | null = null;

  constructor(
    private readonly client: StudyClient,
    private readonly subjectId: string,
    private readonly present: (frameIndex: number) => void,
    private readonly timers?: Timers,
  ) {}

  get currentState(): TrialState {
    return this.state;
  }

  get currentJob(): TrialJob | null {
    return this.job;
  }

  /** The question shown to the subject; probe trials ask only about the
   * component under the marker. */
  get prompt(): string {
    if (this.job === null) return "";
    return this.job.kind === "probe"
      ? "Describe what the marked point is part of."
      : "Freely describe the object and the action you see.";
  }

  async begin(): Promise<TrialState> {
    if (this.state === "showing" || this.state === "submitting") {
      throw new Error("a trial is already in progress");
    }
    const job = await this.client.nextJob(this.subjectId);
    if (job === null) {
      this.state = "no_jobs";
      return this.state;
    }
    this.job = job;
    this.player = new LoopPlayer(job.frames.length, job.fps, this.present, this.timers);
    this.player.start();
    this.state = "showing";
    return this.state;
  }

  /** Posts the answer once; repeated calls are rejected client-side. */
  async submit(text: string): Promise<SubmitOutcome> {
    if (this.state !== "showing" || this.job === null) {
      return { accepted: false, reason: `nothing to submit in state ${this.state}` };
    }
    this.state = "submitting";
    try {
      await this.client.submitResponse(this.job.job_id, this.subjectId, text);
    } catch (error) {
      this.state = "showing"; // answer retained; the subject may retry
      return { accepted: false, reason: String(error) };
    }
    this.player?.stop();
    this.state = "done";
    return { accepted: true };
  }
}
