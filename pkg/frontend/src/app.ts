/**
 * Review-session controller: loads a session, submits labels for the head
 * clip, polls the queue, and re-renders after every state change.
 *
 * Effects (network, timers) live here; all state transitions go through the
 * pure reducer. The scheduler is injectable so tests can drive time by hand.
 */

import { ApiError, type Label, type LabelAck, type ServiceClient } from "./api.js";
import {
  canSubmit,
  headClip,
  initialState,
  reduce,
  type Action,
  type ReviewState,
} from "./state.js";

export interface LabelAction {
  clipId: string;
  label: Label;
  submittedAt: number;
}

export interface Scheduler {
  set(fn: () => void, delayMs: number): unknown;
  clear(handle: unknown): void;
}

const defaultScheduler: Scheduler = {
  set: (fn, delayMs) => setTimeout(fn, delayMs),
  clear: (handle) => clearTimeout(handle as Parameters<typeof clearTimeout>[0]),
};

export interface AppOptions {
  /** Queue poll interval; the service pushes nothing. */
  pollIntervalMs?: number;
  /** Ceiling for the backoff applied after consecutive failures. */
  maxBackoffMs?: number;
  coderId?: string;
  scheduler?: Scheduler;
  /** Called after every state change with the new state. */
  onRender?: (state: ReviewState) => void;
}

function describeError(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  if (error instanceof Error) return error.message;
  return String(error);
}

export class ReviewApp {
  state: ReviewState = initialState();

  readonly pollIntervalMs: number;
  readonly maxBackoffMs: number;
  readonly coderId: string;

  private readonly scheduler: Scheduler;
  private readonly onRender: ((state: ReviewState) => void) | undefined;
  private pollHandle: unknown = null;
  private polling = false;
  private failureStreak = 0;
  private readonly durationsRequested = new Set<string>();

  constructor(
    readonly client: ServiceClient,
    options: AppOptions = {},
  ) {
    this.pollIntervalMs = options.pollIntervalMs ?? 2000;
    this.maxBackoffMs = options.maxBackoffMs ?? 30000;
    this.coderId = options.coderId ?? "reviewer";
    this.scheduler = options.scheduler ?? defaultScheduler;
    this.onRender = options.onRender;
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.onRender?.(this.state);
  }

  /** Fetch session info and queue; on failure show a banner and back off. */
  async loadSession(sessionId: string): Promise<boolean> {
    try {
      const info = await this.client.sessionInfo(sessionId);
      const queue = await this.client.queue(sessionId);
      this.dispatch({ type: "sessionLoaded", info });
      this.dispatch({ type: "queueLoaded", queue });
      this.failureStreak = 0;
      this.hydrateHeadDuration();
      return true;
    } catch (error) {
      this.failureStreak += 1;
      this.dispatch({ type: "loadFailed", message: describeError(error) });
      this.scheduler.set(() => void this.loadSession(sessionId), this.currentDelay());
      return false;
    }
  }

  /**
   * Label the current head clip and advance. Returns the acknowledgment, or
   * null when the guard rejects the submission (not head, or already on the
   * wire) or the service call fails. A retrain acknowledgment triggers an
   * immediate queue refresh so the rendering follows the new order.
   */
  async submitAndAdvance(action: LabelAction): Promise<LabelAck | null> {
    if (!canSubmit(this.state, action.clipId)) return null;
    const sessionId = this.state.sessionId;
    if (sessionId === null) return null;
    this.dispatch({ type: "submitStarted", clipId: action.clipId, label: action.label });
    try {
      const ack = await this.client.submitLabel(
        sessionId,
        action.clipId,
        action.label,
        this.coderId,
      );
      this.dispatch({ type: "submitAcked", clipId: action.clipId, ack });
      if (ack.retrained) {
        await this.refreshQueue();
      }
      this.hydrateHeadDuration();
      return ack;
    } catch (error) {
      this.dispatch({ type: "submitFailed", clipId: action.clipId, message: describeError(error) });
      return null;
    }
  }

  async refreshQueue(): Promise<boolean> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) return false;
    try {
      const queue = await this.client.queue(sessionId);
      this.dispatch({ type: "queueLoaded", queue });
      this.failureStreak = 0;
      return true;
    } catch (error) {
      this.failureStreak += 1;
      this.dispatch({ type: "loadFailed", message: describeError(error) });
      return false;
    }
  }

  async refreshInfo(): Promise<void> {
    const sessionId = this.state.sessionId;
    if (sessionId === null) return;
    try {
      const info = await this.client.sessionInfo(sessionId);
      this.dispatch({ type: "sessionLoaded", info });
    } catch {
      // queue refresh already reports connectivity trouble
    }
  }

  startPolling(): void {
    if (this.polling) return;
    this.polling = true;
    this.schedulePoll();
  }

  stopPolling(): void {
    this.polling = false;
    if (this.pollHandle !== null) {
      this.scheduler.clear(this.pollHandle);
      this.pollHandle = null;
    }
  }

  dismissBanner(): void {
    this.dispatch({ type: "bannerDismissed" });
  }

  /** Delay before the next poll or retry, doubled per consecutive failure. */
  currentDelay(): number {
    const factor = 2 ** Math.min(this.failureStreak, 10);
    return Math.min(this.pollIntervalMs * Math.max(factor, 1), this.maxBackoffMs);
  }

  private schedulePoll(): void {
    if (!this.polling) return;
    this.pollHandle = this.scheduler.set(() => void this.pollOnce(), this.currentDelay());
  }

  private async pollOnce(): Promise<void> {
    const ok = await this.refreshQueue();
    if (ok) {
      await this.refreshInfo();
    }
    this.schedulePoll();
  }

  /** Fill in the head card's duration from the features endpoint, once. */
  private hydrateHeadDuration(): void {
    const head = headClip(this.state);
    if (head === null || head in this.state.durations) return;
    if (this.durationsRequested.has(head)) return;
    this.durationsRequested.add(head);
    void this.client
      .clipFeatures(head)
      .then((doc) => {
        const last = doc.microClips[doc.microClips.length - 1];
        if (last) {
          this.dispatch({ type: "durationLoaded", clipId: head, seconds: last.endSec });
        }
      })
      .catch(() => {
        // duration is informational; leave the placeholder on failure
      });
  }
}
