/** Documents exchanged with the study service, and their canonical form. */

export interface ProbeMarker {
  frame_position: number;
  x: number;
  y: number;
}

export interface TrialJob {
  job_id: string;
  kind: "recognition" | "probe";
  config_key: string;
  fps: number;
  frames: string[]; // base64 PNG, one per retained frame
  gif: string | null; // base64 looping GIF of the same frames
  probe: ProbeMarker | null;
}

export class DocumentError extends Error {}

function asString(value: unknown, field: string): string {
  if (typeof value !== "string" || value.length === 0) {
    throw new DocumentError(`${field} must be a nonempty string`);
  }
  return value;
}

function asNumber(value: unknown, field: string): number {
  if (typeof value !== "number" || !Number.isFinite(value) || value <= 0) {
    throw new DocumentError(`${field} must be a positive number`);
  }
  return value;
}

export function parseTrialJob(doc: unknown): TrialJob {
  if (typeof doc !== "object" || doc === null) {
    throw new DocumentError("job document must be an object");
  }
  const d = doc as Record<string, unknown>;
  const kind = asString(d.kind, "kind");
  if (kind !== "recognition" && kind !== "probe") {
    throw new DocumentError(`unknown job kind ${kind}`);
  }
  const frames = d.frames;
  if (!Array.isArray(frames) || frames.length === 0) {
    throw new DocumentError("frames must be a nonempty list");
  }
  let probe: ProbeMarker | null = null;
  if (d.probe !== null && d.probe !== undefined) {
    const p = d.probe as Record<string, unknown>;
    probe = {
      frame_position: asNumber(p.frame_position ?? -1, "probe.frame_position"),
      x: asNumber(p.x ?? -1, "probe.x"),
      y: asNumber(p.y ?? -1, "probe.y"),
    };
  }
  return {
    job_id: asString(d.job_id, "job_id"),
    kind,
    config_key: asString(d.config_key, "config_key"),
    fps: asNumber(d.fps, "fps"),
    frames: frames.map((f, i) => asString(f, `frames[${i}]`)),
    gif: d.gif === null || d.gif === undefined ? null : asString(d.gif, "gif"),
    probe,
  };
}

export function trialJobToDoc(job: TrialJob): Record<string, unknown> {
  return {
    job_id: job.job_id,
    kind: job.kind,
    config_key: job.config_key,
    fps: job.fps,
    frames: job.frames,
    gif: job.gif,
    probe: job.probe,
  };
}

export function submissionDoc(subject: string, text: string): Record<string, unknown> {
  return { subject, text };
}

function escapeAscii(s: string): string {
  // JSON.stringify escapes control characters and quotes; additionally
  // escape non-ASCII to match the server's canonical encoder.
  return JSON.stringify(s).replace(/[-￿]/g, (ch) => {
    return "\\u" + ch.charCodeAt(0).toString(16).padStart(4, "0");
  });
}

function encode(value: unknown, indent: string): string {
  if (value === null) return "null";
  if (typeof value === "boolean" || typeof value === "number") {
    return JSON.stringify(value);
  }
  if (typeof value === "string") return escapeAscii(value);
  const inner = indent + "  ";
  if (Array.isArray(value)) {
    if (value.length === 0) return "[]";
    const items = value.map((v) => inner + encode(v, inner));
    return "[\n" + items.join(",\n") + "\n" + indent + "]";
  }
  if (typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>).sort(([a], [b]) =>
      a < b ? -1 : a > b ? 1 : 0,
    );
    if (entries.length === 0) return "{}";
    const items = entries.map(([k, v]) => inner + escapeAscii(k) + ": " + encode(v, inner));
    return "{\n" + items.join(",\n") + "\n" + indent + "}";
  }
  throw new DocumentError(`cannot canonicalize value of type ${typeof value}`);
}

/** Sorted keys, two-space indent, trailing newline: byte-compatible with
 * the services' canonical JSON writer. */
export function canonicalJson(value: unknown): string {
  return encode(value, "") + "\n";
}
