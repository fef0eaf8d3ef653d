/** Frame looper: presents frame 0 immediately, then advances at the job's
 * frame rate (2 Hz -> 500 ms per frame), wrapping until stopped. */

export interface Timers {
  setInterval(handler: () => void, ms: number): number;
  clearInterval(id: number): void;
}

const globalTimers: Timers = {
  setInterval: (handler, ms) => setInterval(handler, ms) as unknown as number,
  clearInterval: (id) => clearInterval(id),
};

export class LoopPlayer {
  private timerId: number | null = null;
  private index = 0;

  constructor(
    private readonly frameCount: number,
    private readonly fps: number,
    private readonly present: (frameIndex: number) => void,
    private readonly timers: Timers = globalTimers,
  ) {
    if (frameCount < 1) throw new Error("player needs at least one frame");
    if (fps <= 0) throw new Error("fps must be positive");
  }

  get intervalMs(): number {
    return Math.round(1000 / this.fps);
  }

  get playing(): boolean {
    return this.timerId !== null;
  }

  start(): void {
    if (this.timerId !== null) return;
    this.index = 0;
    this.present(0);
    if (this.frameCount === 1) return; // static image: nothing to alternate
    this.timerId = this.timers.setInterval(() => {
      this.index = (this.index + 1) % this.frameCount;
      this.present(this.index);
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timerId !== null) {
      this.timers.clearInterval(this.timerId);
      this.timerId = null;
    }
  }
}
