"""Measurable-attribute extraction for micro-clips.

Implements the computed feature channels (color histogram, co-occurrence
texture, motion intensity, block-motion velocity, audio statistics) and
assembles per-micro-clip feature vectors in fixed schema order:

    hsvHistogram(H*S*V) + texture(3) + motionIntensity(1) + velocity(3)
    + audio(5) + external channels

All extractors are pure functions of (media, span, config). Floating-point
accumulation happens in fixed order so repeated runs produce byte-identical
stores on a given kernel backend.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegenerateFrame,
    DimensionMismatch,
    EmptySpan,
    InvalidManifest,
    MissingExternalChannel,
    NoFramesInWindow,
    NonPositiveDuration,
)
from .ingest import AudioTrack, FrameSequence, SegmentSpan
from .model import Channel, FeatureSchema


@dataclass
class FeatureConfig:
    """Tunable parameters of the attribute extractors.

    Defaults are conventional values; the source material names the
    attributes without fixing parameters.
    """

    micro_clip_sec: float = 10.0
    analysis_fps: float = 2.0
    hist_bins: tuple[int, int, int] = (8, 4, 4)
    glcm_levels: int = 16
    block_size: int = 16
    search_radius: int = 8
    # absolute SAD improvement over the zero displacement, per block,
    # required before a block counts as moving (2 gray levels per pixel
    # for the default 16x16 block)
    motion_noise_threshold: float = 512.0
    silence_window_sec: float = 0.025
    silence_rms_threshold: float = 0.01
    pitch_window_sec: float = 0.040
    pitch_hop_sec: float = 0.020
    pitch_range_hz: tuple[float, float] = (50.0, 500.0)
    voiced_peak_threshold: float = 0.5
    # smallest-lag local maximum within this fraction of the global
    # autocorrelation peak wins; guards against octave errors where a
    # lag multiple edges out the fundamental
    pitch_peak_ratio: float = 0.95
    min_turn_segment_sec: float = 0.5

    def validate(self) -> None:
        positives = [
            self.micro_clip_sec,
            self.analysis_fps,
            self.glcm_levels,
            self.block_size,
            self.search_radius,
            self.silence_window_sec,
            self.silence_rms_threshold,
            self.pitch_window_sec,
            self.pitch_hop_sec,
            self.voiced_peak_threshold,
            self.pitch_peak_ratio,
            self.min_turn_segment_sec,
        ]
        if any(v <= 0 for v in positives) or any(b <= 0 for b in self.hist_bins):
            raise InvalidManifest("feature config values must be strictly positive")
        low, high = self.pitch_range_hz
        if not 0 < low < high:
            raise InvalidManifest("pitchRangeHz must satisfy 0 < low < high")
        if self.motion_noise_threshold < 0:
            raise InvalidManifest("motionNoiseThreshold must be non-negative")

    @property
    def hist_dim(self) -> int:
        h, s, v = self.hist_bins
        return h * s * v


DEFAULT_FEATURE_CONFIG = FeatureConfig()

COMPUTED_CHANNELS = ("hsvHistogram", "texture", "motionIntensity", "velocity", "audio")


def build_schema(
    config: FeatureConfig, external: list[tuple[str, int]] | None = None
) -> FeatureSchema:
    """Schema of one micro-clip vector: computed channels then externals."""
    channels = [
        Channel("hsvHistogram", config.hist_dim, "computed"),
        Channel("texture", 3, "computed"),
        Channel("motionIntensity", 1, "computed"),
        Channel("velocity", 3, "computed"),
        Channel("audio", 5, "computed"),
    ]
    for name, dim in external or []:
        channels.append(Channel(name, dim, "external"))
    return FeatureSchema(tuple(channels))


@dataclass
class AudioStats:
    silence_fraction: float
    pitch_mean_hz: float
    pitch_std_hz: float
    voiced_fraction: float
    turns_per_minute: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.silence_fraction,
                self.pitch_mean_hz,
                self.pitch_std_hz,
                self.voiced_fraction,
                self.turns_per_minute,
            ],
            dtype=np.float64,
        )


def rgb_to_hsv(r: int, g: int, b: int) -> tuple[float, float, float]:
    """Hexcone conversion of one byte triple; h = 0 when s = 0."""
    mx = max(r, g, b)
    mn = min(r, g, b)
    delta = mx - mn
    v = mx / 255.0
    s = delta / mx if mx > 0 else 0.0
    h = 0.0
    if delta > 0:
        if r == mx:
            hp = (g - b) / delta
            if hp < 0:
                hp += 6.0
        elif g == mx:
            hp = (b - r) / delta + 2.0
        else:
            hp = (r - g) / delta + 4.0
        h = 60.0 * hp
    return h, s, v


def luma_gray(frame: np.ndarray) -> np.ndarray:
    """Rec.601 luma, rounded half-up, as uint8. Gray frames pass through."""
    if frame.ndim == 2:
        return frame
    y = 0.299 * frame[..., 0] + 0.587 * frame[..., 1] + 0.114 * frame[..., 2]
    return np.floor(y + 0.5).astype(np.uint8)


def sample_times(span: SegmentSpan, analysis_fps: float) -> list[float]:
    """Analysis instants start, start + 1/fps, ... strictly inside the span."""
    times = []
    k = 0
    while True:
        t = span.start_sec + k / analysis_fps
        if t >= span.end_sec - 1e-12:
            break
        times.append(t)
        k += 1
    return times


def sampled_frames(frames: FrameSequence, span: SegmentSpan, analysis_fps: float) -> list[np.ndarray]:
    times = sample_times(span, analysis_fps)
    if not times:
        raise NoFramesInWindow(
            f"span [{span.start_sec}, {span.end_sec}) yields no analysis frames"
        )
    return [frames.frames[frames.frame_index_at(t)] for t in times]


def hsv_histogram(frames: list[np.ndarray], bins: tuple[int, int, int]) -> np.ndarray:
    """Per-frame L1-normalized HSV histogram averaged over frames."""
    if not frames:
        raise NoFramesInWindow("hsv_histogram needs at least one sampled frame")
    hb, sb, vb = bins
    acc = np.zeros(hb * sb * vb, dtype=np.float64)
    for frame in frames:
        if frame.ndim == 2:
            counts = kernels.hsv_hist_counts_gray(frame, hb, sb, vb)
        else:
            counts = kernels.hsv_hist_counts_rgb(frame, hb, sb, vb)
        acc += counts / float(frame.shape[0] * frame.shape[1])
    acc /= len(frames)
    total = acc.sum()
    if total > 0:
        acc /= total
    return acc


def glcm_stats(frame: np.ndarray, levels: int) -> tuple[float, float, float]:
    """(entropy, energy, contrast) of the symmetric co-occurrence matrix."""
    gray = luma_gray(frame)
    if gray.shape[0] < 2 or gray.shape[1] < 2:
        raise DegenerateFrame(f"frame {gray.shape} is smaller than 2x2")
    q = ((gray.astype(np.int64) * levels) // 256).astype(np.uint8)
    counts = kernels.glcm_counts(q, levels)
    total = counts.sum()
    p = counts / float(total)
    energy = float(np.sum(p * p))
    idx = np.arange(levels, dtype=np.float64)
    diff2 = (idx[:, None] - idx[None, :]) ** 2
    contrast = float(np.sum(diff2 * p))
    nz = p[p > 0]
    entropy = float(-np.sum(nz * np.log2(nz)))
    return entropy, energy, contrast


def motion_intensity(gray_frames: list[np.ndarray]) -> float:
    """Mean absolute grayscale difference over consecutive sampled frames."""
    if not gray_frames:
        raise NoFramesInWindow("motion_intensity needs at least one sampled frame")
    if len(gray_frames) < 2:
        return 0.0
    acc = 0.0
    for a, b in zip(gray_frames, gray_frames[1:]):
        n_pixels = a.shape[0] * a.shape[1]
        acc += kernels.abs_diff_sum(a, b) / n_pixels
    return acc / (len(gray_frames) - 1)


def moving_block_velocities(
    f1: np.ndarray,
    f2: np.ndarray,
    config: FeatureConfig,
    dt_sec: float,
) -> np.ndarray:
    """Displacement magnitudes / dt for blocks whose best SAD beats the zero
    displacement by more than the noise threshold."""
    if f1.shape != f2.shape:
        raise DimensionMismatch(f"frame shapes differ: {f1.shape} vs {f2.shape}")
    disps = kernels.search_displacements(config.search_radius)
    best_dy, best_dx, best_sad, zero_sad = kernels.block_match(
        f1, f2, config.block_size, disps
    )
    if best_sad.size == 0:
        return np.zeros(0, dtype=np.float64)
    moving = (zero_sad - best_sad) > config.motion_noise_threshold
    dy = best_dy[moving].astype(np.float64)
    dx = best_dx[moving].astype(np.float64)
    return np.sqrt(dy * dy + dx * dx) / dt_sec


def block_motion_velocity(
    f1: np.ndarray,
    f2: np.ndarray,
    config: FeatureConfig,
    dt_sec: float,
) -> tuple[float, float, float]:
    """(meanV, maxV, minV) in px/sec over moving blocks; zeros when none."""
    if dt_sec <= 0:
        raise NonPositiveDuration("dtSec must be positive")
    mags = moving_block_velocities(luma_gray(f1), luma_gray(f2), config, dt_sec)
    return _velocity_stats(mags)


def _velocity_stats(mags: np.ndarray) -> tuple[float, float, float]:
    if mags.size == 0:
        return 0.0, 0.0, 0.0
    return float(mags.mean()), float(mags.max()), float(mags.min())


def audio_stats(track: AudioTrack, span: SegmentSpan, config: FeatureConfig) -> AudioStats:
    """Silence / pitch / turn statistics of the span's samples."""
    sr = track.sample_rate
    i0 = max(0, int(math.floor(span.start_sec * sr + 1e-9)))
    i1 = min(track.samples.shape[0], int(math.floor(span.end_sec * sr + 1e-9)))
    if i1 <= i0:
        raise EmptySpan(f"span [{span.start_sec}, {span.end_sec}) holds no samples")
    x = track.samples[i0:i1]

    silence_fraction = _silence_fraction(x, sr, config)
    voiced, pitches = _pitch_track(x, sr, config)

    n_windows = voiced.shape[0]
    voiced_count = int(voiced.sum())
    voiced_fraction = voiced_count / n_windows if n_windows else 0.0
    if voiced_count:
        p = pitches[voiced]
        pitch_mean = float(p.mean())
        pitch_std = float(np.sqrt(np.mean((p - pitch_mean) ** 2)))
    else:
        pitch_mean = 0.0
        pitch_std = 0.0

    turns = _count_turns(voiced, config)
    minutes = (i1 - i0) / sr / 60.0
    turns_per_minute = turns / minutes if minutes > 0 else 0.0

    return AudioStats(silence_fraction, pitch_mean, pitch_std, voiced_fraction, turns_per_minute)


def _silence_fraction(x: np.ndarray, sr: int, config: FeatureConfig) -> float:
    win = max(1, int(round(config.silence_window_sec * sr)))
    energies = kernels.window_sq_sums(x, win)
    if energies.shape[0] == 0:
        rms = math.sqrt(float(np.sum(x * x)) / x.shape[0])
        return 1.0 if rms < config.silence_rms_threshold else 0.0
    rms = np.sqrt(energies / win)
    return float(np.mean(rms < config.silence_rms_threshold))


def _pitch_track(
    x: np.ndarray, sr: int, config: FeatureConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-window voiced flag and pitch estimate (Hz, 0 when unvoiced)."""
    win = max(2, int(round(config.pitch_window_sec * sr)))
    hop = max(1, int(round(config.pitch_hop_sec * sr)))
    low, high = config.pitch_range_hz
    lag_min = max(1, int(math.ceil(sr / high)))
    lag_max = min(int(math.floor(sr / low)), win - 1)

    n_windows = (x.shape[0] - win) // hop + 1 if x.shape[0] >= win else 0
    voiced = np.zeros(n_windows, dtype=bool)
    pitches = np.zeros(n_windows, dtype=np.float64)
    if n_windows == 0 or lag_max < lag_min:
        return voiced, pitches

    for k in range(n_windows):
        frame = x[k * hop : k * hop + win]
        rms = math.sqrt(float(np.sum(frame * frame)) / win)
        if rms < config.silence_rms_threshold:
            continue
        ncc = kernels.autocorr_ncc(frame, lag_min, lag_max)
        if ncc.shape[0] == 0:
            continue
        peak = float(ncc.max())
        if peak < config.voiced_peak_threshold:
            continue
        lag = lag_min + _pick_pitch_lag(ncc, config.pitch_peak_ratio * peak)
        voiced[k] = True
        pitches[k] = sr / lag
    return voiced, pitches


def _pick_pitch_lag(ncc: np.ndarray, floor: float) -> int:
    """Smallest-lag local maximum with value >= floor; falls back to argmax."""
    n = ncc.shape[0]
    for i in range(n):
        if ncc[i] < floor:
            continue
        left_ok = i == 0 or ncc[i] >= ncc[i - 1]
        right_ok = i == n - 1 or ncc[i] >= ncc[i + 1]
        if left_ok and right_ok:
            return i
    return int(np.argmax(ncc))


def _count_turns(voiced: np.ndarray, config: FeatureConfig) -> int:
    """Onsets of voiced runs lasting at least minTurnSegmentSec."""
    win = config.pitch_window_sec
    hop = config.pitch_hop_sec
    turns = 0
    run = 0
    for flag in voiced:
        if flag:
            run += 1
        else:
            if run and (run - 1) * hop + win >= config.min_turn_segment_sec - 1e-9:
                turns += 1
            run = 0
    if run and (run - 1) * hop + win >= config.min_turn_segment_sec - 1e-9:
        turns += 1
    return turns


def extract_micro_clip_features(
    frames: FrameSequence,
    audio: AudioTrack,
    span: SegmentSpan,
    config: FeatureConfig,
    schema: FeatureSchema | None = None,
    external_values: dict[str, np.ndarray] | None = None,
) -> np.ndarray:
    """Assemble one micro-clip's feature vector in schema order."""
    if schema is None:
        schema = build_schema(config)
    sampled = sampled_frames(frames, span, config.analysis_fps)
    grays = [luma_gray(f) for f in sampled]

    hist = hsv_histogram(sampled, config.hist_bins)

    tex_acc = np.zeros(3, dtype=np.float64)
    for f in sampled:
        tex_acc += np.array(glcm_stats(f, config.glcm_levels))
    texture = tex_acc / len(sampled)

    motion = motion_intensity(grays)

    dt = 1.0 / config.analysis_fps
    mags: list[np.ndarray] = []
    for a, b in zip(grays, grays[1:]):
        mags.append(moving_block_velocities(a, b, config, dt))
    pooled = np.concatenate(mags) if mags else np.zeros(0)
    velocity = np.array(_velocity_stats(pooled))

    stats = audio_stats(audio, span, config).as_vector()

    parts = [hist, texture, np.array([motion]), velocity, stats]
    for channel in schema.channels:
        if channel.source != "external":
            continue
        if external_values is None or channel.name not in external_values:
            raise MissingExternalChannel(span.clip_id, channel.name, span.index)
        values = np.asarray(external_values[channel.name], dtype=np.float64)
        if values.shape != (channel.dimension,):
            raise DimensionMismatch(
                f"external channel {channel.name!r} expects {channel.dimension} "
                f"values, got {values.shape}"
            )
        parts.append(values)

    vector = np.concatenate(parts)
    if vector.shape[0] != schema.total_dimension:
        raise DimensionMismatch(
            f"assembled vector has {vector.shape[0]} dims, schema says "
            f"{schema.total_dimension}"
        )
    return vector


def read_external_sidecar(path, clip_id: str) -> dict[int, dict[str, np.ndarray]]:
    """Load the per-clip external channel sidecar (JSON lines)."""
    out: dict[int, dict[str, np.ndarray]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                cid = rec["clipId"]
                index = int(rec["index"])
                channel = rec["channel"]
                values = np.asarray(rec["values"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidManifest(f"{path}:{line_no}: bad sidecar record: {exc}") from exc
            if cid != clip_id:
                raise InvalidManifest(
                    f"{path}:{line_no}: sidecar clipId {cid!r} != {clip_id!r}"
                )
            out.setdefault(index, {})[channel] = values
    return out
