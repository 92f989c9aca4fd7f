import type { ApiClient } from "./api.js";
import type { Progress, ReviewAction, ReviewItem } from "./types.js";

export type Phase = "loading" | "reviewing" | "complete" | "error";

export interface QueueState {
  phase: Phase;
  current: ReviewItem | null;
  upcoming: ReviewItem[];
  progress: Progress | null;
  errorMessage: string | null;
  submitting: boolean;
  inlineError: string | null;
}

const PREFETCH = 5;

/**
 * Review queue state machine.
 *
 * One decision in flight at a time: keypresses during a submit are dropped,
 * which together with the service's idempotent retries keeps double-submits
 * down to a single recorded decision. Progress counters are always
 * re-fetched from the service, never mutated locally.
 */
export class ReviewQueue {
  private buffer: ReviewItem[] = [];
  private state: QueueState = {
    phase: "loading",
    current: null,
    upcoming: [],
    progress: null,
    errorMessage: null,
    submitting: false,
    inlineError: null,
  };
  private pendingOp: Promise<void> = Promise.resolve();

  constructor(
    private api: ApiClient,
    private reviewer: string,
    private onChange: (state: QueueState) => void = () => {},
  ) {}

  getState(): QueueState {
    return { ...this.state };
  }

  /** Resolves when every operation started so far has finished. */
  settle(): Promise<void> {
    return this.pendingOp;
  }

  private emit(patch: Partial<QueueState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.getState());
  }

  start(): Promise<void> {
    this.pendingOp = this.pendingOp.then(() => this.reload());
    return this.pendingOp;
  }

  retry(): Promise<void> {
    return this.start();
  }

  private async reload(): Promise<void> {
    this.emit({ phase: "loading", errorMessage: null, inlineError: null });
    try {
      const [items, progress] = await Promise.all([
        this.api.fetchQueue(PREFETCH),
        this.api.fetchProgress(),
      ]);
      this.buffer = items;
      this.emit({
        phase: items.length ? "reviewing" : "complete",
        current: items[0] ?? null,
        upcoming: items.slice(1),
        progress,
      });
    } catch (err) {
      // Queue unchanged; the banner offers a retry.
      this.emit({ phase: "error", errorMessage: String(err) });
    }
  }

  submit(action: ReviewAction): Promise<void> | null {
    if (this.state.phase !== "reviewing" || this.state.submitting) return null;
    const item = this.state.current;
    if (!item) return null;
    this.emit({ submitting: true, inlineError: null });
    this.pendingOp = this.pendingOp.then(() => this.doSubmit(item, action));
    return this.pendingOp;
  }

  private async doSubmit(item: ReviewItem, action: ReviewAction): Promise<void> {
    try {
      await this.api.submitDecision(item.face_id, action, this.reviewer);
      const progress = await this.api.fetchProgress();
      this.buffer = this.buffer.filter((it) => it.face_id !== item.face_id);
      if (this.buffer.length === 0) {
        this.buffer = await this.api.fetchQueue(PREFETCH);
      }
      this.emit({
        submitting: false,
        progress,
        current: this.buffer[0] ?? null,
        upcoming: this.buffer.slice(1),
        phase: this.buffer.length ? "reviewing" : "complete",
      });
    } catch (err) {
      // Rejected decision: the item stays current.
      this.emit({ submitting: false, inlineError: String(err) });
    }
  }
}
