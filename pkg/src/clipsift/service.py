"""Event-sourced labeling sessions and the HTTP facade over them.

A session binds one coder to one dataset: the coder labels clips, the
service retrains on the labeled bags and reorders the remaining queue by
descending score. Persistence is deliberately plain:

* ``events.log``   append-only JSON lines, fsynced before any acknowledgment
* ``model-vNNNN.json`` / ``queue.json``   written atomically (tmp + rename)
* ``session.json`` / ``manifest.json``    static snapshots from creation time

State is rebuilt from the event log on every load; the queue and model
files are caches of that fold, so killing the process never loses an
acknowledged label. Replay re-fires the auto-retrain rule, which is a pure
function of the label sequence, making the rebuilt files byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import mimetypes
import os
import re
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import AppConfig, config_from_json, config_to_json
from .errors import (
    DataError,
    FeaturePipelineFailure,
    InvalidManifest,
    MissingClass,
    NotFound,
    RetrainInProgress,
    UnknownClip,
    UnknownSession,
    UsageError,
)
from .mil import rank_bags, save_model, train
from .model import (
    Bag,
    DatasetManifest,
    LABELS,
    MicroClip,
    NEGATIVE,
    POSITIVE,
    PrincipalShot,
    load_manifest,
    save_manifest,
)
from .pipeline import ensure_stores

_SESSION_ID_RE = re.compile(r"^s(\d{4})$")


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _json_bytes(doc) -> bytes:
    return json.dumps(doc, sort_keys=True).encode("utf-8") + b"\n"


@dataclasses.dataclass
class DatasetBundle:
    """One dataset loaded once and shared by all sessions that point at it."""

    root: Path
    manifest: DatasetManifest
    micro_by_clip: dict[str, list[MicroClip]]
    shots_by_clip: dict[str, list[PrincipalShot]]
    bags_by_clip: dict[str, Bag]


def load_bundle(manifest_path: Path, config: AppConfig) -> DatasetBundle:
    manifest = load_manifest(manifest_path)
    if not manifest.clips:
        raise InvalidManifest(f"{manifest_path}: manifest lists no clips")
    root = manifest_path.resolve().parent
    micro, shots = ensure_stores(manifest, root, config.features, config.clustering)
    bags = {}
    for entry in manifest.clips:
        bags[entry.clip_id] = Bag(
            clip_id=entry.clip_id,
            instances=tuple(shots[entry.clip_id]),
            label=None,
            media_ref=entry.media_ref,
        )
    return DatasetBundle(
        root=root,
        manifest=manifest,
        micro_by_clip=micro,
        shots_by_clip=shots,
        bags_by_clip=bags,
    )


class Session:
    """In-memory projection of one session's event log."""

    def __init__(self, session_id: str, directory: Path, bundle: DatasetBundle,
                 config: AppConfig, dataset_ref: str):
        self.session_id = session_id
        self.directory = directory
        self.bundle = bundle
        self.config = config
        self.dataset_ref = dataset_ref
        self.lock = threading.RLock()
        # held only for the span of a manual retrain so a concurrent manual
        # retrain fails fast instead of queueing
        self._manual_gate = threading.Lock()
        self.labels: dict[str, str] = {}
        self.queue: list[tuple[str, float]] = [
            (cid, 0.0) for cid in bundle.manifest.clip_ids()
        ]
        self.model = None
        self.model_ref: str | None = None
        self.retrain_count = 0
        self._seq = 0
        self._log = None  # opened by _open_log after replay

    # -- event log ------------------------------------------------------------

    def _log_path(self) -> Path:
        return self.directory / "events.log"

    def _open_log(self) -> None:
        """Open for appending, discarding a torn (never acknowledged) tail."""
        path = self._log_path()
        size = path.stat().st_size if path.exists() else 0
        if size:
            with open(path, "rb") as fh:
                data = fh.read()
            keep = data.rfind(b"\n") + 1
            if keep != size:
                with open(path, "r+b") as fh:
                    fh.truncate(keep)
        self._log = open(path, "ab")

    def _append_event(self, event: dict) -> None:
        self._seq += 1
        line = _json_bytes({"seq": self._seq, **event})
        self._log.write(line)
        self._log.flush()
        os.fsync(self._log.fileno())

    def replay(self) -> None:
        """Fold the event log into fresh state and rewrite the cache files."""
        path = self._log_path()
        events = []
        if path.exists():
            with open(path, "rb") as fh:
                buf = fh.read()
            for line in buf.split(b"\n"):
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError:
                    break  # torn tail, never acknowledged
        for event in events:
            self._seq = int(event["seq"])
            if event["type"] == "label":
                self._apply_label(event["clipId"], event["label"])
                self._maybe_auto_retrain()
            elif event["type"] == "retrain":
                self._retrain()
        self._persist_queue()
        self._open_log()

    # -- state transitions ------------------------------------------------------

    def _apply_label(self, clip_id: str, label: str) -> None:
        self.labels[clip_id] = label
        self.queue = [(cid, score) for cid, score in self.queue if cid != clip_id]

    def _both_classes(self) -> bool:
        values = set(self.labels.values())
        return POSITIVE in values and NEGATIVE in values

    def _maybe_auto_retrain(self) -> bool:
        threshold = self.config.service.min_labels_for_retrain
        if len(self.labels) >= threshold and self._both_classes():
            self._retrain()
            return True
        return False

    def _retrain(self) -> None:
        labeled = [
            dataclasses.replace(self.bundle.bags_by_clip[cid], label=self.labels[cid])
            for cid in self.bundle.manifest.clip_ids()
            if cid in self.labels
        ]
        model = train(labeled, self.config.mil)
        unlabeled = [self.bundle.bags_by_clip[cid] for cid, _ in self.queue]
        ranking = rank_bags(model, unlabeled) if unlabeled else []
        self.retrain_count += 1
        ref = f"model-v{self.retrain_count:04d}.json"
        tmp = self.directory / (ref + ".tmp")
        save_model(model, self.config.mil, tmp)
        os.replace(tmp, self.directory / ref)
        self.model = model
        self.model_ref = ref
        self.queue = ranking

    def _queue_doc(self) -> dict:
        entries = []
        for cid, score in self.queue:
            bag = self.bundle.bags_by_clip[cid]
            entries.append({"clipId": cid, "score": score, "mediaRef": bag.media_ref})
        return {"modelRef": self.model_ref, "entries": entries}

    def _persist_queue(self) -> None:
        _atomic_write(self.directory / "queue.json", _json_bytes(self._queue_doc()))

    # -- public operations -------------------------------------------------------

    def submit_label(self, clip_id: str, label: str, coder_id: str) -> dict:
        if label not in LABELS:
            raise UsageError(f"label must be one of {LABELS}, got {label!r}")
        if not coder_id:
            raise UsageError("coderId must be a non-empty string")
        if clip_id not in self.bundle.bags_by_clip:
            raise UnknownClip(f"clip {clip_id!r} not in session dataset")
        with self.lock:
            self._append_event(
                {
                    "type": "label",
                    "ts": time.time(),
                    "clipId": clip_id,
                    "label": label,
                    "coderId": coder_id,
                }
            )
            self._apply_label(clip_id, label)
            retrained = self._maybe_auto_retrain()
            self._persist_queue()
            return {
                "sessionId": self.session_id,
                "clipId": clip_id,
                "labeledCount": len(self.labels),
                "queueLength": len(self.queue),
                "retrained": retrained,
                "modelRef": self.model_ref,
            }

    def retrain_now(self) -> dict:
        if not self._manual_gate.acquire(blocking=False):
            raise RetrainInProgress("another retrain is already running")
        try:
            with self.lock:
                if not self._both_classes():
                    raise MissingClass(
                        "retrain requires at least one positive and one negative label"
                    )
                self._append_event({"type": "retrain", "ts": time.time()})
                self._retrain()
                self._persist_queue()
                return {
                    "sessionId": self.session_id,
                    "modelRef": self.model_ref,
                    "algorithm": self.config.mil.algorithm,
                    "trainedOn": len(self.labels),
                    "retrainCount": self.retrain_count,
                    "queue": self._queue_doc(),
                }
        finally:
            self._manual_gate.release()

    def queue_doc(self) -> dict:
        with self.lock:
            return self._queue_doc()

    def info(self) -> dict:
        with self.lock:
            values = list(self.labels.values())
            if self._manual_gate.locked():
                status = "training"
            elif self.model is not None:
                status = "ready"
            else:
                status = "untrained"
            return {
                "sessionId": self.session_id,
                "datasetRef": self.dataset_ref,
                "clipCount": len(self.bundle.manifest.clips),
                "labeledCount": len(self.labels),
                "positiveCount": sum(1 for v in values if v == POSITIVE),
                "negativeCount": sum(1 for v in values if v == NEGATIVE),
                "queueLength": len(self.queue),
                "modelStatus": status,
                "currentModelRef": self.model_ref,
                "retrainCount": self.retrain_count,
                "minLabelsForRetrain": self.config.service.min_labels_for_retrain,
            }

    def close(self) -> None:
        if self._log is not None:
            self._log.close()
            self._log = None


class SessionManager:
    """All sessions under one data directory, plus the shared dataset cache."""

    def __init__(self, config: AppConfig, data_dir: str | Path | None = None):
        self.config = config
        self.data_dir = Path(data_dir if data_dir is not None else config.service.data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._bundles: dict[str, DatasetBundle] = {}
        self._sessions: dict[str, Session] = {}
        self._create_lock = threading.Lock()
        for child in sorted(self.data_dir.iterdir()):
            if child.is_dir() and (child / "session.json").exists():
                self._load_session(child)

    # -- datasets ---------------------------------------------------------------

    def bundle_for(self, manifest_path: str | Path) -> DatasetBundle:
        key = str(Path(manifest_path).resolve())
        if key not in self._bundles:
            self._bundles[key] = load_bundle(Path(manifest_path), self.config)
        return self._bundles[key]

    def resolve_clip(self, clip_id: str) -> tuple[DatasetBundle, str]:
        for bundle in self._bundles.values():
            if clip_id in bundle.bags_by_clip:
                return bundle, clip_id
        raise UnknownClip(f"clip {clip_id!r} not found in any loaded dataset")

    # -- sessions ---------------------------------------------------------------

    def _load_session(self, directory: Path) -> Session:
        doc = json.loads((directory / "session.json").read_text(encoding="utf-8"))
        config = config_from_json(doc["config"])
        bundle = self.bundle_for(doc["datasetRef"])
        session = Session(doc["sessionId"], directory, bundle, config, doc["datasetRef"])
        session.replay()
        self._sessions[session.session_id] = session
        return session

    def create_session(self, manifest_path: str | Path) -> Session:
        bundle = self.bundle_for(manifest_path)
        dataset_ref = str(Path(manifest_path).resolve())
        with self._create_lock:
            taken = [
                int(m.group(1))
                for m in (_SESSION_ID_RE.match(s) for s in self._sessions)
                if m
            ]
            session_id = f"s{(max(taken) + 1 if taken else 1):04d}"
            directory = self.data_dir / session_id
            directory.mkdir(parents=True, exist_ok=False)
            save_manifest(bundle.manifest, directory / "manifest.json")
            _atomic_write(
                directory / "session.json",
                _json_bytes(
                    {
                        "sessionId": session_id,
                        "datasetRef": dataset_ref,
                        "config": config_to_json(self.config),
                    }
                ),
            )
            session = Session(session_id, directory, bundle, self.config, dataset_ref)
            session.replay()  # empty log: writes the initial queue, opens the log
            self._sessions[session_id] = session
            return session

    def get(self, session_id: str) -> Session:
        if session_id not in self._sessions:
            raise UnknownSession(f"no session {session_id!r}")
        return self._sessions[session_id]

    def close(self) -> None:
        for session in self._sessions.values():
            session.close()


# -- HTTP facade -----------------------------------------------------------------

_STATUS_BY_ERROR = (
    (NotFound, 404),
    (UnknownSession, 404),
    (UnknownClip, 404),
    (RetrainInProgress, 409),
    (MissingClass, 409),
    (UsageError, 400),
    (InvalidManifest, 400),
    (FeaturePipelineFailure, 500),
    (DataError, 422),
)


def _error_status(exc: Exception) -> int:
    for cls, status in _STATUS_BY_ERROR:
        if isinstance(exc, cls):
            return status
    return 500


class _Handler(BaseHTTPRequestHandler):
    manager: SessionManager = None
    protocol_version = "HTTP/1.1"
    quiet = True

    # -- plumbing -----------------------------------------------------------------

    def log_message(self, fmt, *args):
        if not self.quiet:
            super().log_message(fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str, extra=None) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        for key, value in (extra or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, doc) -> None:
        self._send(status, _json_bytes(doc), "application/json")

    def _send_error_json(self, exc: Exception) -> None:
        doc = {"code": type(exc).__name__, "message": str(exc)}
        self._send_json(_error_status(exc), doc)

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0) or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise UsageError("request body required")
        try:
            doc = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise UsageError(f"request body is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise UsageError("request body must be a JSON object")
        return doc

    # -- routing --------------------------------------------------------------

    def do_GET(self):
        try:
            path = self.path.split("?", 1)[0]
            if m := re.fullmatch(r"/api/sessions/([^/]+)", path):
                self._send_json(200, self.manager.get(m.group(1)).info())
            elif m := re.fullmatch(r"/api/sessions/([^/]+)/queue", path):
                self._send_json(200, self.manager.get(m.group(1)).queue_doc())
            elif m := re.fullmatch(r"/api/clips/([^/]+)/features", path):
                self._get_features(m.group(1))
            elif m := re.fullmatch(r"/api/clips/([^/]+)/media", path):
                self._get_media(m.group(1))
            else:
                raise NotFound(f"no route for GET {path}")
        except Exception as exc:  # every failure answers as JSON
            self._send_error_json(exc)

    def do_POST(self):
        try:
            path = self.path.split("?", 1)[0]
            if path == "/api/sessions":
                doc = self._read_body()
                if "manifestPath" not in doc:
                    raise UsageError("body must carry 'manifestPath'")
                session = self.manager.create_session(doc["manifestPath"])
                self._send_json(201, session.info())
            elif m := re.fullmatch(r"/api/sessions/([^/]+)/labels", path):
                session = self.manager.get(m.group(1))
                doc = self._read_body()
                missing = {"clipId", "label", "coderId"} - set(doc)
                if missing:
                    raise UsageError(f"label body missing fields {sorted(missing)}")
                ack = session.submit_label(doc["clipId"], doc["label"], doc["coderId"])
                self._send_json(200, ack)
            elif m := re.fullmatch(r"/api/sessions/([^/]+)/retrain", path):
                self._send_json(200, self.manager.get(m.group(1)).retrain_now())
            else:
                raise NotFound(f"no route for POST {path}")
        except Exception as exc:
            self._send_error_json(exc)

    # -- clip endpoints -----------------------------------------------------------

    def _get_features(self, clip_id: str) -> None:
        bundle, cid = self.manager.resolve_clip(clip_id)
        micro = bundle.micro_by_clip[cid]
        shots = bundle.shots_by_clip[cid]
        doc = {
            "clipId": cid,
            "microClips": [
                {
                    "index": mc.index,
                    "startSec": mc.start_sec,
                    "endSec": mc.end_sec,
                    "values": mc.features.tolist(),
                }
                for mc in micro
            ],
            "shots": [
                {
                    "shotId": shot.shot_id,
                    "memberIndices": sorted(shot.member_indices),
                    "coverage": shot.coverage,
                    "aggregate": shot.aggregate.tolist(),
                }
                for shot in shots
            ],
        }
        self._send_json(200, doc)

    def _get_media(self, clip_id: str) -> None:
        bundle, cid = self.manager.resolve_clip(clip_id)
        entry = bundle.manifest.clip(cid)
        rel = entry.media_ref if entry.media_ref is not None else entry.frame_path
        path = bundle.root / rel
        if not path.exists():
            raise UnknownClip(f"media file for clip {cid!r} missing: {path}")
        data_size = path.stat().st_size
        ctype = mimetypes.guess_type(str(path))[0] or "application/octet-stream"
        range_header = self.headers.get("Range")
        start, end = 0, data_size - 1
        status = 200
        if range_header:
            m = re.fullmatch(r"bytes=(\d*)-(\d*)", range_header.strip())
            if m and (m.group(1) or m.group(2)):
                if m.group(1):
                    start = int(m.group(1))
                    end = int(m.group(2)) if m.group(2) else data_size - 1
                else:  # suffix form: last N bytes
                    n = int(m.group(2))
                    start = max(data_size - n, 0)
                    end = data_size - 1
                if start >= data_size or start > end:
                    self._send(
                        416,
                        b"",
                        "application/octet-stream",
                        {"Content-Range": f"bytes */{data_size}"},
                    )
                    return
                end = min(end, data_size - 1)
                status = 206
        with open(path, "rb") as fh:
            fh.seek(start)
            body = fh.read(end - start + 1)
        extra = {"Accept-Ranges": "bytes"}
        if status == 206:
            extra["Content-Range"] = f"bytes {start}-{end}/{data_size}"
        self._send(status, body, ctype, extra)


def build_server(
    config: AppConfig,
    data_dir: str | Path | None = None,
    preload_manifest: str | Path | None = None,
    quiet: bool = True,
) -> tuple[ThreadingHTTPServer, SessionManager]:
    """Construct the HTTP server without starting it (tests drive it directly)."""
    manager = SessionManager(config, data_dir)
    if preload_manifest is not None:
        manager.bundle_for(preload_manifest)
    handler = type("BoundHandler", (_Handler,), {"manager": manager, "quiet": quiet})
    server = ThreadingHTTPServer((config.service.host, config.service.port), handler)
    return server, manager


def serve_forever(
    config: AppConfig,
    data_dir: str | Path | None = None,
    preload_manifest: str | Path | None = None,
) -> None:
    server, manager = build_server(config, data_dir, preload_manifest, quiet=False)
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port}  (data dir: {manager.data_dir})")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        manager.close()
