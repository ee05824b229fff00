"""Principal-shot construction: adaptive k-means over one clip's micro-clips.

Micro-clips sharing a visual/audio profile are grouped into a principal shot
regardless of where in the clip they occur; the shot's aggregate feature
vector becomes one learning instance, the clip the enclosing bag.

The "adaptive" part is threshold-gated model selection: k grows from 1 until
every point sits within theta of its centroid, theta being a fixed fraction
of the RMS spread of the clip's points. Seeding, tie-breaks, and
empty-cluster repair are all deterministic so repeated runs reproduce the
same shot partition exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AssignmentMismatch,
    DimensionMismatch,
    EmptyInput,
    InvalidManifest,
    MissingFeatures,
)
from .model import (
    Bag,
    DatasetManifest,
    MicroClip,
    PrincipalShot,
    aggregate_features,
    fit_normalizer,
)


@dataclass
class ClusteringConfig:
    k_max: int = 10
    distance_threshold_factor: float = 0.5  # alpha: theta = alpha * RMS spread
    max_lloyd_iterations: int = 100

    def validate(self) -> None:
        if self.k_max < 1:
            raise InvalidManifest("kMax must be >= 1")
        if self.distance_threshold_factor <= 0:
            raise InvalidManifest("distanceThresholdFactor must be > 0")
        if self.max_lloyd_iterations < 1:
            raise InvalidManifest("maxLloydIterations must be >= 1")


@dataclass(frozen=True)
class ClusteringResult:
    k: int
    assignments: np.ndarray  # (n,) int64, micro-clip ordinal -> cluster id
    centroids: np.ndarray  # (k, D)
    max_point_distance: float
    threshold: float


def _as_points(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        pts = points.astype(np.float64)
    else:
        seq = list(points)
        if not seq:
            raise EmptyInput("adaptive_kmeans needs at least one point")
        dims = {np.asarray(p).shape for p in seq}
        if len(dims) != 1 or any(len(s) != 1 for s in dims):
            raise DimensionMismatch(f"points have mixed shapes: {sorted(dims)}")
        pts = np.asarray(seq, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyInput("adaptive_kmeans needs a non-empty 2-D point array")
    return pts


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances."""
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _farthest_first_init(points: np.ndarray, k: int) -> np.ndarray:
    """First seed nearest the global mean, then repeatedly the point farthest
    from all chosen seeds; ties resolve to the lowest index."""
    mean = points.mean(axis=0)
    d0 = np.einsum("nd,nd->n", points - mean, points - mean)
    chosen = [int(np.argmin(d0))]
    min_d = np.einsum("nd,nd->n", points - points[chosen[0]], points - points[chosen[0]])
    while len(chosen) < k:
        nxt = int(np.argmax(min_d))
        chosen.append(nxt)
        d = np.einsum("nd,nd->n", points - points[nxt], points - points[nxt])
        min_d = np.minimum(min_d, d)
    return points[chosen].copy()


def _lloyd(
    points: np.ndarray, centroids: np.ndarray, max_iterations: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations to stability; returns (assignments, centroids, sse trace).

    Empty clusters are repaired by stealing the point currently farthest from
    its assigned centroid; repair happens before the centroid update, so the
    per-iteration SSE trace is non-increasing.
    """
    k = centroids.shape[0]
    prev = None
    trace: list[float] = []
    assign = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iterations):
        d2 = _sq_dists(points, centroids)
        assign = np.argmin(d2, axis=1).astype(np.int64)  # ties -> lowest id
        for cluster in range(k):
            if np.any(assign == cluster):
                continue
            point_d2 = d2[np.arange(points.shape[0]), assign]
            # ignore points that are alone in their cluster
            counts = np.bincount(assign, minlength=k)
            movable = counts[assign] > 1
            if not np.any(movable):
                break
            candidates = np.where(movable)[0]
            steal = candidates[int(np.argmax(point_d2[candidates]))]
            assign[steal] = cluster
            d2[steal, :] = 0.0  # its new centroid will sit on the point itself
        new_centroids = centroids.copy()
        for cluster in range(k):
            members = points[assign == cluster]
            if members.shape[0]:
                new_centroids[cluster] = members.mean(axis=0)
        centroids = new_centroids
        d2 = _sq_dists(points, centroids)
        trace.append(float(d2[np.arange(points.shape[0]), assign].sum()))
        if prev is not None and np.array_equal(assign, prev):
            break
        prev = assign.copy()
    return assign, centroids, trace


def adaptive_kmeans(points, config: ClusteringConfig) -> ClusteringResult:
    """Smallest k in 1..min(kMax, n) whose worst point-to-centroid distance
    stays within theta = alpha * RMS distance to the global mean; falls back
    to min(kMax, n) when no k qualifies."""
    config.validate()
    pts = _as_points(points)
    n = pts.shape[0]
    mean = pts.mean(axis=0)
    spread = pts - mean
    rms = float(np.sqrt(np.einsum("nd,nd->n", spread, spread).mean()))
    theta = config.distance_threshold_factor * rms

    k_cap = min(config.k_max, n)
    last: ClusteringResult | None = None
    for k in range(1, k_cap + 1):
        init = _farthest_first_init(pts, k)
        assign, centroids, _ = _lloyd(pts, init, config.max_lloyd_iterations)
        d2 = _sq_dists(pts, centroids)
        max_dist = float(np.sqrt(d2[np.arange(n), assign].max()))
        last = ClusteringResult(
            k=k,
            assignments=assign,
            centroids=centroids,
            max_point_distance=max_dist,
            threshold=theta,
        )
        if max_dist <= theta:
            return last
    assert last is not None
    return last


def build_principal_shots(
    micro_clips: list[MicroClip], clustering: ClusteringResult
) -> list[PrincipalShot]:
    """One shot per cluster, ordered by earliest member start time."""
    if clustering.assignments.shape[0] != len(micro_clips):
        raise AssignmentMismatch(
            f"clustering covers {clustering.assignments.shape[0]} micro-clips, "
            f"got {len(micro_clips)}"
        )
    clip_id = micro_clips[0].clip_id if micro_clips else "?"
    total = len(micro_clips)
    groups: dict[int, list[int]] = {}
    for ordinal, cluster in enumerate(clustering.assignments):
        groups.setdefault(int(cluster), []).append(ordinal)

    keyed = []
    for cluster, ordinals in groups.items():
        earliest = min(micro_clips[i].start_sec for i in ordinals)
        keyed.append((earliest, min(ordinals), cluster, ordinals))
    keyed.sort(key=lambda item: (item[0], item[1]))

    shots = []
    for rank, (_, _, _, ordinals) in enumerate(keyed):
        member = np.stack([micro_clips[i].features for i in ordinals])
        shots.append(
            PrincipalShot(
                shot_id=f"{clip_id}/shot{rank}",
                member_indices=frozenset(ordinals),
                aggregate=aggregate_features(member, total),
            )
        )
    return shots


def cluster_clip(micro_clips: list[MicroClip], config: ClusteringConfig) -> ClusteringResult:
    """Cluster one clip's micro-clips on per-clip z-scored features.

    Normalization here only shapes the clustering geometry; shot aggregates
    are computed from raw features.
    """
    if not micro_clips:
        raise EmptyInput("cluster_clip needs at least one micro-clip")
    raw = np.stack([mc.features for mc in micro_clips])
    norm = fit_normalizer(raw)
    return adaptive_kmeans(norm.apply(raw), config)


def shots_for_clip(micro_clips: list[MicroClip], config: ClusteringConfig) -> list[PrincipalShot]:
    return build_principal_shots(micro_clips, cluster_clip(micro_clips, config))


def group_micro_clips(micro_clips: list[MicroClip]) -> dict[str, list[MicroClip]]:
    """Feature-store records grouped per clip, ordered by micro-clip index."""
    by_clip: dict[str, list[MicroClip]] = {}
    for mc in micro_clips:
        by_clip.setdefault(mc.clip_id, []).append(mc)
    for clip_id in by_clip:
        by_clip[clip_id].sort(key=lambda mc: mc.index)
    return by_clip


def bags_from_dataset(
    manifest: DatasetManifest,
    shots_by_clip: dict[str, list[PrincipalShot]],
    coder_id: str | None = None,
) -> list[Bag]:
    """One bag per manifest clip with its principal shots as instances.

    Instance vectors stay raw; the learner normalizes with a pool fit at
    training time. Labels are attached from the requested coder when given.
    """
    labels = manifest.labels_for(coder_id) if coder_id is not None else {}
    bags = []
    for entry in manifest.clips:
        shots = shots_by_clip.get(entry.clip_id)
        if not shots:
            raise MissingFeatures(entry.clip_id)
        bags.append(
            Bag(
                clip_id=entry.clip_id,
                instances=tuple(shots),
                label=labels.get(entry.clip_id),
                media_ref=entry.media_ref,
            )
        )
    return bags
