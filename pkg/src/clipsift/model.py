"""Core domain types: feature schema, micro-clips, principal shots, bags,
dataset manifest, and z-score normalization.

All types are plain frozen dataclasses holding numpy arrays; they are never
mutated after construction and can be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    BadDuration,
    DanglingLabel,
    DimensionMismatch,
    DuplicateClipId,
    EmptyPool,
    InvalidManifest,
)

POSITIVE = "pos"
NEGATIVE = "neg"
LABELS = (POSITIVE, NEGATIVE)

COMPUTED = "computed"
EXTERNAL = "external"


@dataclass(frozen=True)
class Channel:
    name: str
    dimension: int
    source: str  # COMPUTED or EXTERNAL


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered channel layout of a micro-clip feature vector.

    The schema is fixed per dataset; every micro-clip feature vector laid out
    by it has total_dimension entries, channel sub-vectors in declaration
    order.
    """

    channels: tuple[Channel, ...]

    def __post_init__(self):
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise InvalidManifest(f"duplicate channel names in schema: {names}")
        for c in self.channels:
            if c.dimension <= 0:
                raise InvalidManifest(f"channel {c.name!r} has nonpositive dimension")
            if c.source not in (COMPUTED, EXTERNAL):
                raise InvalidManifest(f"channel {c.name!r} has unknown source {c.source!r}")

    @property
    def total_dimension(self) -> int:
        return sum(c.dimension for c in self.channels)

    def slice_of(self, name: str) -> slice:
        """Index range of a channel inside a schema-ordered vector."""
        off = 0
        for c in self.channels:
            if c.name == name:
                return slice(off, off + c.dimension)
            off += c.dimension
        raise KeyError(name)

    def external_channels(self) -> tuple[Channel, ...]:
        return tuple(c for c in self.channels if c.source == EXTERNAL)

    def to_json(self) -> list:
        return [[c.name, c.dimension, c.source] for c in self.channels]

    @classmethod
    def from_json(cls, doc: list) -> "FeatureSchema":
        return cls(tuple(Channel(str(n), int(d), str(s)) for n, d, s in doc))


def check_feature_vector(values: np.ndarray, dimension: int) -> np.ndarray:
    """Validate and return a feature vector as a float64 array."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != dimension:
        raise DimensionMismatch(f"expected dimension {dimension}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise InvalidManifest("feature vector contains non-finite entries")
    return v


@dataclass(frozen=True)
class MicroClip:
    clip_id: str
    index: int
    start_sec: float
    end_sec: float
    features: np.ndarray  # (D,) float64

    def __post_init__(self):
        if self.index < 0:
            raise InvalidManifest(f"micro-clip index {self.index} < 0")
        if not (0 <= self.start_sec < self.end_sec):
            raise InvalidManifest(
                f"bad micro-clip span [{self.start_sec}, {self.end_sec}) for {self.clip_id!r}"
            )


@dataclass(frozen=True)
class PrincipalShot:
    """A cluster of a clip's micro-clips, the instance unit for learning.

    aggregate = per-dimension mean of member features, concatenated with the
    per-dimension population std and the coverage fraction
    |members| / micro-clip count. Aggregate dimension is therefore
    2 * base_dimension + 1.
    """

    shot_id: str
    member_indices: frozenset[int]
    aggregate: np.ndarray

    def __post_init__(self):
        if not self.member_indices:
            raise InvalidManifest(f"principal shot {self.shot_id!r} has no members")

    @property
    def coverage(self) -> float:
        return float(self.aggregate[-1])


def aggregate_features(member_features: np.ndarray, total_micro_clips: int) -> np.ndarray:
    """Mean (+) population std (+) coverage over a shot's member features.

    member_features is (m, D); result is (2*D + 1,).
    """
    m = np.asarray(member_features, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0:
        raise EmptyPool("aggregate needs at least one member feature vector")
    mean = m.mean(axis=0)
    std = m.std(axis=0)  # population std (ddof=0)
    coverage = m.shape[0] / total_micro_clips
    return np.concatenate([mean, std, [coverage]])


@dataclass(frozen=True)
class Bag:
    clip_id: str
    instances: tuple[PrincipalShot, ...]
    label: str | None = None  # POSITIVE / NEGATIVE / None
    media_ref: str | None = None

    def __post_init__(self):
        if not self.instances:
            raise InvalidManifest(f"bag {self.clip_id!r} has no instances")
        if self.label is not None and self.label not in LABELS:
            raise InvalidManifest(f"bag {self.clip_id!r} has bad label {self.label!r}")

    def instance_matrix(self) -> np.ndarray:
        return np.stack([s.aggregate for s in self.instances])


@dataclass(frozen=True)
class ClipEntry:
    clip_id: str
    frame_path: str
    wav_path: str
    duration_sec: float
    external_channel_path: str | None = None
    media_ref: str | None = None


@dataclass(frozen=True)
class DatasetManifest:
    clips: tuple[ClipEntry, ...]
    per_coder_labels: dict[str, dict[str, str]]
    config: dict = field(default_factory=dict)

    def clip_ids(self) -> list[str]:
        return [c.clip_id for c in self.clips]

    def clip(self, clip_id: str) -> ClipEntry:
        for c in self.clips:
            if c.clip_id == clip_id:
                return c
        raise KeyError(clip_id)

    def labels_for(self, coder_id: str) -> dict[str, str]:
        if coder_id not in self.per_coder_labels:
            raise InvalidManifest(f"no labels recorded for coder {coder_id!r}")
        return dict(self.per_coder_labels[coder_id])

    def to_json(self) -> dict:
        clips = []
        for c in self.clips:
            entry = {
                "clipId": c.clip_id,
                "framePath": c.frame_path,
                "wavPath": c.wav_path,
                "durationSec": c.duration_sec,
            }
            if c.external_channel_path is not None:
                entry["externalChannelPath"] = c.external_channel_path
            if c.media_ref is not None:
                entry["mediaRef"] = c.media_ref
            clips.append(entry)
        return {
            "clips": clips,
            "labels": {k: dict(v) for k, v in self.per_coder_labels.items()},
            "config": self.config,
        }


def validate_manifest(doc: dict) -> DatasetManifest:
    """Build a DatasetManifest from a parsed JSON document.

    Rejects duplicate clip ids, labels that reference unknown clips, and
    nonpositive durations.
    """
    if not isinstance(doc, dict) or "clips" not in doc:
        raise InvalidManifest("manifest document must be an object with a 'clips' list")
    clips = []
    seen: set[str] = set()
    for raw in doc["clips"]:
        try:
            clip_id = str(raw["clipId"])
            entry = ClipEntry(
                clip_id=clip_id,
                frame_path=str(raw["framePath"]),
                wav_path=str(raw["wavPath"]),
                duration_sec=float(raw["durationSec"]),
                external_channel_path=(
                    str(raw["externalChannelPath"]) if "externalChannelPath" in raw else None
                ),
                media_ref=str(raw["mediaRef"]) if "mediaRef" in raw else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidManifest(f"malformed clip entry {raw!r}: {exc}") from exc
        if clip_id in seen:
            raise DuplicateClipId(clip_id)
        seen.add(clip_id)
        if not entry.duration_sec > 0:
            raise BadDuration(clip_id, entry.duration_sec)
        clips.append(entry)

    labels: dict[str, dict[str, str]] = {}
    for coder_id, clip_labels in dict(doc.get("labels", {})).items():
        out = {}
        for clip_id, label in dict(clip_labels).items():
            if clip_id not in seen:
                raise DanglingLabel(clip_id, coder_id)
            if label not in LABELS:
                raise InvalidManifest(
                    f"coder {coder_id!r} labels clip {clip_id!r} with {label!r} "
                    f"(expected one of {LABELS})"
                )
            out[str(clip_id)] = str(label)
        labels[str(coder_id)] = out

    return DatasetManifest(
        clips=tuple(clips),
        per_coder_labels=labels,
        config=dict(doc.get("config", {})),
    )


def load_manifest(path: str | Path) -> DatasetManifest:
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise InvalidManifest(f"cannot read manifest {path}: {exc}") from exc
    with fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidManifest(f"manifest {path} is not valid JSON: {exc}") from exc
    return validate_manifest(doc)


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- normalization -----------------------------------------------------------

@dataclass(frozen=True)
class Normalizer:
    """Per-dimension z-score statistics over a training instance pool.

    Dimensions with zero spread map to 0 rather than dividing by zero, so a
    constant feature cannot leak a spurious scale into the learner.
    """

    mean: np.ndarray
    std: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.mean.shape[0]:
            raise DimensionMismatch(
                f"normalizer dimension {self.mean.shape[0]} != vector dimension {v.shape[-1]}"
            )
        out = np.zeros_like(v, dtype=np.float64)
        nz = self.std > 0
        out[..., nz] = (v[..., nz] - self.mean[nz]) / self.std[nz]
        return out

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Normalizer":
        return cls(
            mean=np.asarray(doc["mean"], dtype=np.float64),
            std=np.asarray(doc["std"], dtype=np.float64),
        )


def fit_normalizer(instances: Sequence[np.ndarray] | np.ndarray) -> Normalizer:
    """Arithmetic mean and population std per dimension over a pool."""
    pool = np.asarray(instances, dtype=np.float64)
    if pool.size == 0:
        raise EmptyPool("cannot fit a normalizer on an empty pool")
    if pool.ndim == 1:
        pool = pool[None, :]
    if pool.ndim != 2:
        raise DimensionMismatch(f"instance pool must be 2-D, got shape {pool.shape}")
    return Normalizer(mean=pool.mean(axis=0), std=pool.std(axis=0))


def apply_normalizer(n: Normalizer, v: np.ndarray) -> np.ndarray:
    return n.apply(v)


# -- feature store (JSON lines) ----------------------------------------------

def write_micro_clip_records(micro_clips: Iterable[MicroClip], path: str | Path) -> None:
    """One JSON record per micro-clip: {clipId, index, start, end, values}."""
    with open(path, "w", encoding="utf-8") as fh:
        for mc in micro_clips:
            rec = {
                "clipId": mc.clip_id,
                "index": mc.index,
                "start": mc.start_sec,
                "end": mc.end_sec,
                "values": mc.features.tolist(),
            }
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def read_micro_clip_records(path: str | Path) -> list[MicroClip]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            out.append(
                MicroClip(
                    clip_id=rec["clipId"],
                    index=int(rec["index"]),
                    start_sec=float(rec["start"]),
                    end_sec=float(rec["end"]),
                    features=np.asarray(rec["values"], dtype=np.float64),
                )
            )
    return out


def write_shot_records(shots_by_clip: dict[str, list[PrincipalShot]], path: str | Path) -> None:
    """One JSON record per principal shot: {clipId, shotId, members, aggregate}."""
    with open(path, "w", encoding="utf-8") as fh:
        for clip_id, shots in shots_by_clip.items():
            for shot in shots:
                rec = {
                    "clipId": clip_id,
                    "shotId": shot.shot_id,
                    "members": sorted(shot.member_indices),
                    "aggregate": shot.aggregate.tolist(),
                }
                fh.write(json.dumps(rec, sort_keys=True))
                fh.write("\n")


def read_shot_records(path: str | Path) -> dict[str, list[PrincipalShot]]:
    out: dict[str, list[PrincipalShot]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            shot = PrincipalShot(
                shot_id=rec["shotId"],
                member_indices=frozenset(int(i) for i in rec["members"]),
                aggregate=np.asarray(rec["aggregate"], dtype=np.float64),
            )
            out.setdefault(rec["clipId"], []).append(shot)
    return out
