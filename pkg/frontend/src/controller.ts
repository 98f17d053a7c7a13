// Classification request sequencing: at most one request in flight, rapid
// slider movements debounced, and superseded responses discarded by
// sequence number so only the latest request's result is ever rendered.

import type { ClassifyRequest, ClassifyResponse } from "./api";

export type Transport = (req: ClassifyRequest) => Promise<ClassifyResponse>;

export interface ControllerHooks {
  onResult: (res: ClassifyResponse, req: ClassifyRequest) => void;
  onError?: (err: unknown) => void;
}

type Reference = Pick<ClassifyRequest, "uv" | "texel" | "ray">;

export class ClassifyController {
  private seq = 0;
  private inFlight = false;
  private pending: ClassifyRequest | null = null;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private lastReference: Reference | null = null;
  discardedResponses = 0;

  constructor(
    private readonly transport: Transport,
    private readonly hooks: ControllerHooks,
    readonly debounceMs: number = 150,
  ) {}

  get hasReference(): boolean {
    return this.lastReference !== null;
  }

  /** Click: classify immediately with the given reference. */
  classify(reference: Reference, thetaMax: number, radius: number): void {
    this.lastReference = reference;
    this.issue({ ...reference, theta_max: thetaMax, radius });
  }

  /** Slider: re-issue the last pick at a new threshold, debounced. */
  setThreshold(thetaMax: number, radius: number): void {
    if (!this.lastReference) return;
    const req: ClassifyRequest = {
      ...this.lastReference,
      theta_max: thetaMax,
      radius,
    };
    if (this.debounceTimer !== null) clearTimeout(this.debounceTimer);
    this.debounceTimer = setTimeout(() => {
      this.debounceTimer = null;
      this.issue(req);
    }, this.debounceMs);
  }

  private issue(req: ClassifyRequest): void {
    if (this.inFlight) {
      // keep only the newest; the in-flight response becomes stale
      this.pending = req;
      this.seq++;
      return;
    }
    void this.send(req);
  }

  private async send(req: ClassifyRequest): Promise<void> {
    const mySeq = ++this.seq;
    this.inFlight = true;
    try {
      const res = await this.transport(req);
      if (mySeq === this.seq) {
        this.hooks.onResult(res, req);
      } else {
        this.discardedResponses++;
      }
    } catch (err) {
      if (mySeq === this.seq) this.hooks.onError?.(err);
    } finally {
      this.inFlight = false;
      if (this.pending) {
        const next = this.pending;
        this.pending = null;
        void this.send(next);
      }
    }
  }
}
