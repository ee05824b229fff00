/**
 * Review-queue state as a pure reducer.
 *
 * The state is a function of the last service responses plus the set of
 * in-flight label submissions. Rendered order always mirrors the most recent
 * queue payload; optimistic removals only hide entries, so a rollback simply
 * stops hiding and the card reappears at its payload position. A label is
 * counted as accepted only once the service acknowledgment arrives.
 */

import type { Label, LabelAck, QueueDoc, SessionInfo } from "./api.js";

export interface Banner {
  kind: "error" | "info";
  message: string;
  /** What a retry should redo, if anything. */
  retry: "load" | "label" | null;
}

export interface ReviewState {
  sessionId: string | null;
  info: SessionInfo | null;
  /** Most recent queue payload; entry order is authoritative. */
  lastQueue: QueueDoc | null;
  /** Clips optimistically removed from view, keyed by clipId. */
  hidden: Record<string, true>;
  /** Label class of each submission on the wire, keyed by clipId. */
  inFlight: Record<string, Label>;
  /** Clip durations in seconds, filled lazily from the features endpoint. */
  durations: Record<string, number>;
  banner: Banner | null;
  lastAck: LabelAck | null;
}

export interface Card {
  clipId: string;
  score: number;
  mediaRef: string;
  durationSec: number | null;
}

export type Action =
  | { type: "sessionLoaded"; info: SessionInfo }
  | { type: "queueLoaded"; queue: QueueDoc }
  | { type: "submitStarted"; clipId: string; label: Label }
  | { type: "submitAcked"; clipId: string; ack: LabelAck }
  | { type: "submitFailed"; clipId: string; message: string }
  | { type: "durationLoaded"; clipId: string; seconds: number }
  | { type: "loadFailed"; message: string }
  | { type: "bannerDismissed" };

export function initialState(): ReviewState {
  return {
    sessionId: null,
    info: null,
    lastQueue: null,
    hidden: {},
    inFlight: {},
    durations: {},
    banner: null,
    lastAck: null,
  };
}

function without<V>(table: Record<string, V>, clipId: string): Record<string, V> {
  if (!(clipId in table)) return table;
  const next = { ...table };
  delete next[clipId];
  return next;
}

export function reduce(state: ReviewState, action: Action): ReviewState {
  switch (action.type) {
    case "sessionLoaded":
      return {
        ...state,
        sessionId: action.info.sessionId,
        info: action.info,
        banner: null,
      };

    case "queueLoaded": {
      // A fresh payload is the new truth. Acknowledged removals are already
      // gone from it, so only clips still in flight stay hidden.
      const hidden: Record<string, true> = {};
      for (const clipId of Object.keys(state.hidden)) {
        if (clipId in state.inFlight) hidden[clipId] = true;
      }
      return { ...state, lastQueue: action.queue, hidden };
    }

    case "submitStarted": {
      if (action.clipId in state.inFlight) return state;
      return {
        ...state,
        inFlight: { ...state.inFlight, [action.clipId]: action.label },
        hidden: { ...state.hidden, [action.clipId]: true },
        banner: null,
      };
    }

    case "submitAcked": {
      // The clip stays hidden: the acknowledged queue no longer contains it.
      const label = state.inFlight[action.clipId];
      const info = state.info
        ? {
            ...state.info,
            labeledCount: action.ack.labeledCount,
            queueLength: action.ack.queueLength,
            currentModelRef: action.ack.modelRef,
            modelStatus: action.ack.modelRef ? ("ready" as const) : state.info.modelStatus,
            positiveCount: state.info.positiveCount + (label === "pos" ? 1 : 0),
            negativeCount: state.info.negativeCount + (label === "neg" ? 1 : 0),
          }
        : state.info;
      return {
        ...state,
        info,
        inFlight: without(state.inFlight, action.clipId),
        lastAck: action.ack,
      };
    }

    case "submitFailed":
      return {
        ...state,
        inFlight: without(state.inFlight, action.clipId),
        hidden: without(state.hidden, action.clipId),
        banner: { kind: "error", message: action.message, retry: "label" },
      };

    case "durationLoaded":
      return {
        ...state,
        durations: { ...state.durations, [action.clipId]: action.seconds },
      };

    case "loadFailed":
      return {
        ...state,
        banner: { kind: "error", message: action.message, retry: "load" },
      };

    case "bannerDismissed":
      return { ...state, banner: null };
  }
}

/** Cards in rendered order: the last queue payload minus optimistic removals. */
export function visibleCards(state: ReviewState): Card[] {
  if (!state.lastQueue) return [];
  return state.lastQueue.entries
    .filter((entry) => !(entry.clipId in state.hidden))
    .map((entry) => ({
      clipId: entry.clipId,
      score: entry.score,
      mediaRef: entry.mediaRef,
      durationSec: state.durations[entry.clipId] ?? null,
    }));
}

/** Clip id of the current playback head, or null with an empty queue. */
export function headClip(state: ReviewState): string | null {
  const cards = visibleCards(state);
  return cards.length > 0 ? cards[0]!.clipId : null;
}

/**
 * Whether a submission for this clip may start now: it must be the current
 * head and must not already have a submission on the wire.
 */
export function canSubmit(state: ReviewState, clipId: string): boolean {
  return headClip(state) === clipId && !(clipId in state.inFlight);
}
