/** Typed client for the clipsift session service HTTP/JSON API. */

/** Wire values for the two label classes. */
export type Label = "pos" | "neg";

export type ModelStatus = "untrained" | "training" | "ready";

export interface QueueEntry {
  clipId: string;
  score: number;
  mediaRef: string;
}

/** Payload of GET /api/sessions/{id}/queue. Entry order is the ranking. */
export interface QueueDoc {
  modelRef: string | null;
  entries: QueueEntry[];
}

/** Payload of GET /api/sessions/{id} and POST /api/sessions. */
export interface SessionInfo {
  sessionId: string;
  datasetRef: string;
  clipCount: number;
  labeledCount: number;
  positiveCount: number;
  negativeCount: number;
  queueLength: number;
  modelStatus: ModelStatus;
  currentModelRef: string | null;
  retrainCount: number;
  minLabelsForRetrain: number;
}

/** Acknowledgment returned by POST /api/sessions/{id}/labels. */
export interface LabelAck {
  sessionId: string;
  clipId: string;
  labeledCount: number;
  queueLength: number;
  retrained: boolean;
  modelRef: string | null;
}

export interface RetrainResult {
  sessionId: string;
  modelRef: string;
  algorithm: string;
  trainedOn: number;
  retrainCount: number;
  queue: QueueDoc;
}

export interface MicroClipDoc {
  index: number;
  startSec: number;
  endSec: number;
  values: number[];
}

export interface ShotDoc {
  shotId: string;
  memberIndices: number[];
  coverage: number;
  aggregate: number[];
}

/** Payload of GET /api/clips/{id}/features. */
export interface ClipFeatures {
  clipId: string;
  microClips: MicroClipDoc[];
  shots: ShotDoc[];
}

/** Service error surfaced to callers; code mirrors the server's error class name. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/**
 * Thin wrapper over fetch. Every non-2xx answer carries a JSON body of the
 * shape {code, message}; both are preserved on the thrown ApiError.
 */
export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  createSession(manifestPath: string): Promise<SessionInfo> {
    return this.request("POST", "/api/sessions", { manifestPath });
  }

  sessionInfo(sessionId: string): Promise<SessionInfo> {
    return this.request("GET", `/api/sessions/${encodeURIComponent(sessionId)}`);
  }

  queue(sessionId: string): Promise<QueueDoc> {
    return this.request("GET", `/api/sessions/${encodeURIComponent(sessionId)}/queue`);
  }

  submitLabel(
    sessionId: string,
    clipId: string,
    label: Label,
    coderId: string,
  ): Promise<LabelAck> {
    return this.request("POST", `/api/sessions/${encodeURIComponent(sessionId)}/labels`, {
      clipId,
      label,
      coderId,
    });
  }

  retrain(sessionId: string): Promise<RetrainResult> {
    return this.request("POST", `/api/sessions/${encodeURIComponent(sessionId)}/retrain`);
  }

  clipFeatures(clipId: string): Promise<ClipFeatures> {
    return this.request("GET", `/api/clips/${encodeURIComponent(clipId)}/features`);
  }

  /** URL for the byte-range media endpoint, usable as a media element src. */
  mediaUrl(clipId: string): string {
    return `${this.baseUrl}/api/clips/${encodeURIComponent(clipId)}/media`;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "Content-Type": "application/json" };
    }
    const response = await this.fetchImpl(this.baseUrl + path, init);
    if (response.ok) {
      return (await response.json()) as T;
    }
    let code = `http_${response.status}`;
    let message = response.statusText || `request failed with ${response.status}`;
    try {
      const doc = (await response.json()) as { code?: string; message?: string };
      if (typeof doc.code === "string") code = doc.code;
      if (typeof doc.message === "string") message = doc.message;
    } catch {
      // body was not the JSON error envelope; keep the HTTP-level description
    }
    throw new ApiError(response.status, code, message);
  }
}
