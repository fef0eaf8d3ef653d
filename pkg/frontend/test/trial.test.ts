import { describe, expect, it } from "vitest";

import { FetchLike, StudyClient, SubmissionRejected } from "../src/api.js";
import { TrialSession } from "../src/trial.js";
import { Timers } from "../src/player.js";

const JOB_DOC = {
  job_id: "job-abc-0000",
  kind: "recognition",
  config_key: "clip~f0,1~x0_1~y0_1~s12_1~k0",
  fps: 2,
  frames: ["QUFB", "QkJC"],
  probe: null,
};

const PROBE_DOC = { ...JOB_DOC, job_id: "job-abc-0001", kind: "probe", probe: { frame_position: 1, x: 3, y: 2 } };

class NullTimers implements Timers {
  setInterval(): number {
    return 1;
  }
  clearInterval(): void {}
}

function jsonResponse(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface Call {
  url: string;
  init?: RequestInit;
}

function scriptedFetch(script: Array<(call: Call) => Response | Error>): {
  fetchFn: FetchLike;
  calls: Call[];
} {
  const calls: Call[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const call = { url, init };
    calls.push(call);
    const step = script.shift();
    if (step === undefined) throw new Error(`unexpected request ${url}`);
    const result = step(call);
    if (result instanceof Error) throw result;
    return result;
  };
  return { fetchFn, calls };
}

const noSleep = async () => undefined;

function makeSession(script: Array<(call: Call) => Response | Error>) {
  const { fetchFn, calls } = scriptedFetch(script);
  const client = new StudyClient("http://study.test", fetchFn, noSleep);
  const presented: number[] = [];
  const session = new TrialSession(client, "s-1", (f) => presented.push(f), new NullTimers());
  return { session, calls, presented };
}

describe("trial session", () => {
  it("fetches a job and starts looped presentation", async () => {
    const { session, presented } = makeSession([() => jsonResponse(200, JOB_DOC)]);
    const state = await session.begin();
    expect(state).toBe("showing");
    expect(presented).toEqual([0]);
    expect(session.currentJob?.job_id).toBe("job-abc-0000");
    expect(session.prompt).toContain("object and the action");
  });

  it("shows the polite end state when no jobs remain", async () => {
    const { session } = makeSession([() => new Response(null, { status: 204 })]);
    expect(await session.begin()).toBe("no_jobs");
  });

  it("probe trials prompt only for the marked component", async () => {
    const { session } = makeSession([() => jsonResponse(200, PROBE_DOC)]);
    await session.begin();
    expect(session.prompt).toContain("marked point");
    expect(session.currentJob?.probe).toEqual({ frame_position: 1, x: 3, y: 2 });
  });

  it("submits exactly once and blocks the second attempt", async () => {
    const { session, calls } = makeSession([
      () => jsonResponse(200, JOB_DOC),
      () => jsonResponse(200, { accepted: true, job_id: JOB_DOC.job_id }),
    ]);
    await session.begin();
    const first = await session.submit("a person rowing a boat");
    expect(first.accepted).toBe(true);
    const second = await session.submit("a person rowing a boat");
    expect(second.accepted).toBe(false);
    expect(calls.filter((c) => c.init?.method === "POST")).toHaveLength(1);
    expect(session.currentState).toBe("done");
  });

  it("never requests a second job before the current one is acknowledged", async () => {
    const { session } = makeSession([() => jsonResponse(200, JOB_DOC)]);
    await session.begin();
    await expect(session.begin()).rejects.toThrow(/already in progress/);
  });

  it("retries with backoff and never loses the response before the ack", async () => {
    const slept: number[] = [];
    const { fetchFn, calls } = scriptedFetch([
      () => jsonResponse(200, JOB_DOC),
      () => new Error("connection reset"),
      () => new Error("connection reset"),
      () => jsonResponse(200, { accepted: true }),
    ]);
    const client = new StudyClient("http://study.test", fetchFn, async (ms) => {
      slept.push(ms);
    });
    const session = new TrialSession(client, "s-1", () => undefined, new NullTimers());
    await session.begin();
    const outcome = await session.submit("rowing a boat");
    expect(outcome.accepted).toBe(true);
    const posts = calls.filter((c) => c.init?.method === "POST");
    expect(posts).toHaveLength(3);
    for (const post of posts) {
      expect(post.init?.body).toBe(JSON.stringify({ subject: "s-1", text: "rowing a boat" }));
    }
    expect(slept).toEqual([250, 500]); // exponential backoff
  });

  it("treats 4xx rejections as final", async () => {
    const { session, calls } = makeSession([
      () => jsonResponse(200, JOB_DOC),
      () => jsonResponse(409, { error: "not assigned" }),
    ]);
    await session.begin();
    const outcome = await session.submit("text");
    expect(outcome.accepted).toBe(false);
    expect(outcome.reason).toContain("409");
    expect(calls.filter((c) => c.init?.method === "POST")).toHaveLength(1);
  });
});

describe("study client", () => {
  it("encodes the subject into the job request", async () => {
    const { fetchFn, calls } = scriptedFetch([() => new Response(null, { status: 204 })]);
    const client = new StudyClient("http://study.test", fetchFn, noSleep);
    await client.nextJob("subject with spaces");
    expect(calls[0]?.url).toBe("http://study.test/jobs/next?subject=subject%20with%20spaces");
  });

  it("propagates rejection details", async () => {
    const { fetchFn } = scriptedFetch([() => jsonResponse(410, { error: "expired" })]);
    const client = new StudyClient("http://study.test", fetchFn, noSleep);
    await expect(client.submitResponse("j", "s", "t")).rejects.toThrow(SubmissionRejected);
  });
});
