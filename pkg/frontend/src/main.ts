/** Browser wiring: canvas playback, free-text entry, submission flow.
 *
 * Stimuli are upscaled with nearest-neighbor only (no smoothing), so the
 * pixels on screen are exactly the delivered frame values at a larger
 * logical size.
 */

import { StudyClient } from "./api.js";
import { TrialSession } from "./trial.js";
import { TrialJob } from "./types.js";

const DISPLAY_SIDE = 300;

function requireElement<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) throw new Error(`missing element #${id}`);
  return el as T;
}

async function decodeFrames(job: TrialJob): Promise<ImageBitmap[]> {
  const bitmaps: ImageBitmap[] = [];
  for (const b64 of job.frames) {
    const bytes = Uint8Array.from(atob(b64), (c) => c.charCodeAt(0));
    const blob = new Blob([bytes], { type: "image/png" });
    bitmaps.push(await createImageBitmap(blob));
  }
  return bitmaps;
}

function draw(canvas: HTMLCanvasElement, bitmap: ImageBitmap): void {
  const ctx = canvas.getContext("2d");
  if (ctx === null) return;
  ctx.imageSmoothingEnabled = false; // preserve the stimulus pixelation
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(bitmap, 0, 0, DISPLAY_SIDE, DISPLAY_SIDE);
}

async function run(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const subject = params.get("subject") ?? `anon-${Math.random().toString(36).slice(2, 10)}`;
  const base = params.get("service") ?? "";

  const canvas = requireElement<HTMLCanvasElement>("stimulus");
  const promptEl = requireElement<HTMLParagraphElement>("prompt");
  const statusEl = requireElement<HTMLParagraphElement>("status");
  const input = requireElement<HTMLInputElement>("answer");
  const submitBtn = requireElement<HTMLButtonElement>("submit");
  const nextBtn = requireElement<HTMLButtonElement>("next");

  canvas.width = DISPLAY_SIDE;
  canvas.height = DISPLAY_SIDE;

  let bitmaps: ImageBitmap[] = [];
  const client = new StudyClient(base);
  let session = new TrialSession(client, subject, (i) => {
    const bitmap = bitmaps[i];
    if (bitmap !== undefined) draw(canvas, bitmap);
  });

  async function beginTrial(): Promise<void> {
    statusEl.textContent = "fetching a trial...";
    submitBtn.disabled = true;
    try {
      session = new TrialSession(client, subject, (i) => {
        const bitmap = bitmaps[i];
        if (bitmap !== undefined) draw(canvas, bitmap);
      });
      const state = await session.begin();
      if (state === "no_jobs") {
        statusEl.textContent = "No more trials for you right now. Thank you!";
        promptEl.textContent = "";
        return;
      }
      const job = session.currentJob;
      if (job === null) return;
      bitmaps = await decodeFrames(job);
      draw(canvas, bitmaps[0]!);
      promptEl.textContent = session.prompt;
      statusEl.textContent = "";
      input.value = "";
      submitBtn.disabled = false;
    } catch (error) {
      statusEl.textContent = `could not fetch a trial: ${error}`;
    }
  }

  submitBtn.addEventListener("click", async () => {
    submitBtn.disabled = true; // block double submission at the widget too
    const outcome = await session.submit(input.value);
    if (outcome.accepted) {
      statusEl.textContent = "Answer recorded, thank you.";
      promptEl.textContent = "";
    } else {
      statusEl.textContent = outcome.reason ?? "submission failed";
      submitBtn.disabled = session.currentState !== "showing";
    }
  });

  nextBtn.addEventListener("click", () => void beginTrial());
  await beginTrial();
}

void run();
