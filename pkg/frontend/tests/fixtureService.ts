/**
 * Replay server for contract tests: a tiny node:http service that answers
 * with responses recorded from the real session service running against a
 * synthetic corpus (12 clips, retrain threshold 6, labels posted in queue
 * order). Dynamics are minimal: the sixth valid label flips the recorded
 * state from "fresh" to "retrained", exactly as the recording did.
 */

import { readFileSync } from "node:fs";
import { createServer, type IncomingMessage, type Server, type ServerResponse } from "node:http";
import type { AddressInfo } from "node:net";

function loadFixture<T>(name: string): T {
  const url = new URL(`./fixtures/${name}`, import.meta.url);
  return JSON.parse(readFileSync(url, "utf-8")) as T;
}

interface RecordedAck {
  sessionId: string;
  clipId: string;
  labeledCount: number;
  queueLength: number;
  retrained: boolean;
  modelRef: string | null;
}

const CREATED = loadFixture<Record<string, unknown>>("created.json");
const INFO_AFTER = loadFixture<Record<string, unknown>>("info-after.json");
const QUEUE_INITIAL = loadFixture<Record<string, unknown>>("queue-initial.json");
const QUEUE_RETRAINED = loadFixture<Record<string, unknown>>("queue-retrained.json");
const ERROR_UNKNOWN_SESSION = loadFixture<Record<string, unknown>>("error-unknown-session.json");
const ACKS = loadFixture<RecordedAck[]>("acks.json");
const FEATURES = loadFixture<Record<string, unknown>>("features-clip00.json");

const SESSION_ID = "s0001";

export interface LabelEvent {
  clipId: string;
  label: string;
  coderId: string;
}

export class FixtureService {
  readonly labelEvents: LabelEvent[] = [];
  readonly requestLog: { method: string; path: string }[] = [];
  retrained = false;

  private server: Server | null = null;

  async start(): Promise<number> {
    this.server = createServer((req, res) => void this.handle(req, res));
    await new Promise<void>((resolve) => this.server!.listen(0, "127.0.0.1", resolve));
    return (this.server.address() as AddressInfo).port;
  }

  async stop(): Promise<void> {
    if (!this.server) return;
    this.server.closeAllConnections();
    await new Promise<void>((resolve, reject) =>
      this.server!.close((err) => (err ? reject(err) : resolve())),
    );
    this.server = null;
  }

  queueGetCount(): number {
    return this.requestLog.filter(
      (r) => r.method === "GET" && r.path === `/api/sessions/${SESSION_ID}/queue`,
    ).length;
  }

  private async handle(req: IncomingMessage, res: ServerResponse): Promise<void> {
    const path = (req.url ?? "").split("?", 1)[0] ?? "";
    const method = req.method ?? "GET";
    this.requestLog.push({ method, path });

    const send = (status: number, doc: unknown) => {
      const body = JSON.stringify(doc);
      res.writeHead(status, { "Content-Type": "application/json", Connection: "close" });
      res.end(body);
    };

    if (method === "GET") {
      let m: RegExpExecArray | null;
      if ((m = /^\/api\/sessions\/([^/]+)$/.exec(path))) {
        if (m[1] !== SESSION_ID) return send(404, ERROR_UNKNOWN_SESSION);
        return send(200, this.retrained ? INFO_AFTER : CREATED);
      }
      if ((m = /^\/api\/sessions\/([^/]+)\/queue$/.exec(path))) {
        if (m[1] !== SESSION_ID) return send(404, ERROR_UNKNOWN_SESSION);
        return send(200, this.retrained ? QUEUE_RETRAINED : QUEUE_INITIAL);
      }
      if ((m = /^\/api\/clips\/([^/]+)\/features$/.exec(path))) {
        return send(200, { ...FEATURES, clipId: m[1] });
      }
      if ((m = /^\/api\/clips\/([^/]+)\/media$/.exec(path))) {
        res.writeHead(200, {
          "Content-Type": "application/octet-stream",
          "Accept-Ranges": "bytes",
          Connection: "close",
        });
        res.end(Buffer.from("fixture media bytes"));
        return;
      }
      return send(404, { code: "NotFound", message: `no route for GET ${path}` });
    }

    if (method === "POST") {
      const raw = await new Promise<string>((resolve) => {
        let data = "";
        req.on("data", (chunk) => (data += chunk));
        req.on("end", () => resolve(data));
      });
      if (path === "/api/sessions") {
        return send(201, CREATED);
      }
      const m = /^\/api\/sessions\/([^/]+)\/labels$/.exec(path);
      if (m) {
        if (m[1] !== SESSION_ID) return send(404, ERROR_UNKNOWN_SESSION);
        let doc: Record<string, unknown>;
        try {
          doc = JSON.parse(raw) as Record<string, unknown>;
        } catch {
          return send(400, { code: "UsageError", message: "request body is not valid JSON" });
        }
        const missing = ["clipId", "label", "coderId"].filter((k) => !(k in doc));
        if (missing.length > 0) {
          return send(400, { code: "UsageError", message: `label body missing fields ${missing}` });
        }
        this.labelEvents.push({
          clipId: String(doc["clipId"]),
          label: String(doc["label"]),
          coderId: String(doc["coderId"]),
        });
        const ack = ACKS[this.labelEvents.length - 1];
        if (!ack || ack.clipId !== doc["clipId"]) {
          return send(500, {
            code: "FixtureMismatch",
            message: `recording has no ack for label #${this.labelEvents.length} on ${doc["clipId"]}`,
          });
        }
        if (ack.retrained) this.retrained = true;
        return send(200, ack);
      }
      return send(404, { code: "NotFound", message: `no route for POST ${path}` });
    }

    return send(404, { code: "NotFound", message: `no route for ${method} ${path}` });
  }
}

/** Clip ids of the recorded initial queue, in payload order. */
export function initialOrder(): string[] {
  return (QUEUE_INITIAL["entries"] as { clipId: string }[]).map((e) => e.clipId);
}

/** Clip ids of the recorded post-retrain queue, in payload order. */
export function retrainedOrder(): string[] {
  return (QUEUE_RETRAINED["entries"] as { clipId: string }[]).map((e) => e.clipId);
}

/** The recorded label sequence: queue order with the corpus truth classes. */
export function recordedSequence(): { clipId: string; label: "pos" | "neg" }[] {
  return ACKS.map((ack, i) => ({
    clipId: ack.clipId,
    label: (["neg", "neg", "pos", "pos", "neg", "pos"] as const)[i]!,
  }));
}

/** Retrain threshold the recording was made with. */
export function recordedThreshold(): number {
  return INFO_AFTER["minLabelsForRetrain"] as number;
}
