"""Dataset-level glue: manifest -> micro-clip features -> principal shots.

The CLI subcommands, the session service, and the test fixtures all walk a
dataset the same way, so that walk lives here. Paths inside a manifest are
resolved relative to the manifest's directory. Feature and shot stores are
JSON-lines files cached next to the manifest (``features.jsonl`` and
``shots.jsonl``) unless explicit paths are given.
"""

from __future__ import annotations

from pathlib import Path

from .errors import FeaturePipelineFailure
from .features import (
    DEFAULT_FEATURE_CONFIG,
    FeatureConfig,
    build_schema,
    extract_micro_clip_features,
    read_external_sidecar,
)
from .ingest import load_frame_container, load_wav, segment_micro_clips
from .model import (
    ClipEntry,
    DatasetManifest,
    FeatureSchema,
    MicroClip,
    PrincipalShot,
    read_micro_clip_records,
    read_shot_records,
    write_micro_clip_records,
    write_shot_records,
)
from .shots import ClusteringConfig, shots_for_clip

FEATURE_STORE_NAME = "features.jsonl"
SHOT_STORE_NAME = "shots.jsonl"


def extract_clip_micro_clips(
    entry: ClipEntry,
    root: Path,
    config: FeatureConfig,
    schema: FeatureSchema | None = None,
) -> list[MicroClip]:
    """Segment one clip and extract the feature vector of every micro-clip."""
    if schema is None:
        schema = build_schema(config)
    frames = load_frame_container(root / entry.frame_path)
    audio = load_wav(root / entry.wav_path)
    externals = None
    if entry.external_channel_path is not None:
        externals = read_external_sidecar(root / entry.external_channel_path, entry.clip_id)
    spans = segment_micro_clips(entry.duration_sec, config.micro_clip_sec, entry.clip_id)
    out = []
    for span in spans:
        ext = externals.get(span.index) if externals is not None else None
        values = extract_micro_clip_features(frames, audio, span, config, schema, ext)
        out.append(
            MicroClip(
                clip_id=entry.clip_id,
                index=span.index,
                start_sec=span.start_sec,
                end_sec=span.end_sec,
                features=values,
            )
        )
    return out


def extract_dataset_features(
    manifest: DatasetManifest,
    root: Path,
    config: FeatureConfig = DEFAULT_FEATURE_CONFIG,
) -> dict[str, list[MicroClip]]:
    schema = build_schema(config)
    return {
        entry.clip_id: extract_clip_micro_clips(entry, root, config, schema)
        for entry in manifest.clips
    }


def build_dataset_shots(
    micro_by_clip: dict[str, list[MicroClip]],
    config: ClusteringConfig,
) -> dict[str, list[PrincipalShot]]:
    return {cid: shots_for_clip(mcs, config) for cid, mcs in micro_by_clip.items()}


def read_feature_store(path: str | Path) -> dict[str, list[MicroClip]]:
    """Feature store rows grouped by clip, ordered by micro-clip index."""
    micro_by_clip: dict[str, list[MicroClip]] = {}
    for mc in read_micro_clip_records(path):
        micro_by_clip.setdefault(mc.clip_id, []).append(mc)
    for mcs in micro_by_clip.values():
        mcs.sort(key=lambda m: m.index)
    return micro_by_clip


def ensure_stores(
    manifest: DatasetManifest,
    root: Path,
    feature_config: FeatureConfig,
    clustering_config: ClusteringConfig,
    store_dir: Path | None = None,
    force: bool = False,
) -> tuple[dict[str, list[MicroClip]], dict[str, list[PrincipalShot]]]:
    """Load cached feature/shot stores, computing and writing them if absent.

    Wraps extraction problems in FeaturePipelineFailure so service callers can
    map them to one error code without losing the cause message.
    """
    store_dir = Path(store_dir) if store_dir is not None else Path(root)
    feature_path = store_dir / FEATURE_STORE_NAME
    shot_path = store_dir / SHOT_STORE_NAME

    try:
        if force or not feature_path.exists():
            micro_by_clip = extract_dataset_features(manifest, root, feature_config)
            store_dir.mkdir(parents=True, exist_ok=True)
            flat = [mc for cid in manifest.clip_ids() for mc in micro_by_clip[cid]]
            write_micro_clip_records(flat, feature_path)
        else:
            micro_by_clip = read_feature_store(feature_path)

        if force or not shot_path.exists():
            shots_by_clip = build_dataset_shots(micro_by_clip, clustering_config)
            write_shot_records(shots_by_clip, shot_path)
        else:
            shots_by_clip = read_shot_records(shot_path)
    except FeaturePipelineFailure:
        raise
    except Exception as exc:
        raise FeaturePipelineFailure(f"feature pipeline failed: {exc}") from exc
    return micro_by_clip, shots_by_clip
