import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { canonicalJson, parseTrialJob, submissionDoc, trialJobToDoc } from "../src/types.js";

const GOLDEN = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "fixtures", "golden");

function golden(name: string): string {
  return readFileSync(join(GOLDEN, name), "utf8");
}

describe("golden document round-trips", () => {
  it("recognition job document round-trips byte-exactly", () => {
    const raw = golden("job_document.json");
    const job = parseTrialJob(JSON.parse(raw));
    expect(job.kind).toBe("recognition");
    expect(job.fps).toBe(2);
    expect(job.frames).toHaveLength(2);
    expect(job.probe).toBeNull();
    expect(canonicalJson(trialJobToDoc(job))).toBe(raw);
  });

  it("probe job document round-trips and carries the marker", () => {
    const raw = golden("probe_job_document.json");
    const job = parseTrialJob(JSON.parse(raw));
    expect(job.kind).toBe("probe");
    expect(job.probe).toEqual({ frame_position: 1, x: 3, y: 2 });
    // the subject-facing document must never leak accepted labels
    expect(raw).not.toContain("component");
    expect(canonicalJson(trialJobToDoc(job))).toBe(raw);
  });

  it("response submission matches the golden document", () => {
    const raw = golden("response_submission.json");
    const doc = submissionDoc("s-17", "a person rowing a small boat");
    expect(canonicalJson(doc)).toBe(raw);
  });

  it("canonical encoder agrees with the service on nested documents", () => {
    const raw = golden("record_status.json");
    expect(canonicalJson(JSON.parse(raw))).toBe(raw);
  });

  it("rejects malformed job documents", () => {
    expect(() => parseTrialJob({ job_id: "x" })).toThrow();
    expect(() => parseTrialJob({ job_id: "x", kind: "recognition", config_key: "c", fps: 2, frames: [] })).toThrow();
  });
});
