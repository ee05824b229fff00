"""Deterministic synthetic corpus generator.

Desk-scale stand-in for the private classroom recordings: codec-free gray
video plus PCM audio. A positive clip carries planted concept episodes
(a moving textured block and a 220 Hz tone) aligned to whole micro-clips;
a negative clip has a static background and sub-threshold noise only. The
truth labels land in the manifest under coder id "truth".

Everything derives from numpy substreams keyed by (seed, clip index), so a
fixed spec regenerates byte-identical media.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import BadSpec
from .ingest import AudioTrack, FrameSequence, GRAY8, write_frame_container, write_wav
from .model import NEGATIVE, POSITIVE

TONE_HZ = 220.0
TONE_AMPLITUDE = 0.5
BLOCK_SPEED_PX_PER_SEC = 8.0


@dataclass
class CorpusSpec:
    pos_count: int = 20
    neg_count: int = 20
    concept: str = "motionTone"  # motion | tone | motionTone
    noise_level: float = 0.25
    seed: int = 0
    duration_sec: float = 60.0
    width: int = 64
    height: int = 48
    fps: int = 8
    sample_rate: int = 8000
    micro_clip_sec: float = 10.0
    episodes_per_positive: int = 2

    def validate(self) -> None:
        if self.pos_count < 2 or self.neg_count < 2:
            raise BadSpec("need at least 2 clips per class")
        if self.concept not in ("motion", "tone", "motionTone"):
            raise BadSpec(f"unknown concept {self.concept!r}")
        if not 0.0 <= self.noise_level <= 1.0:
            raise BadSpec("noise level must lie in [0, 1]")
        if self.duration_sec <= 0 or self.micro_clip_sec <= 0:
            raise BadSpec("durations must be positive")
        n_micro = int(math.ceil(self.duration_sec / self.micro_clip_sec))
        if self.episodes_per_positive < 1 or self.episodes_per_positive > n_micro:
            raise BadSpec("episodesPerPositive must fit into the clip")

    def to_json(self) -> dict:
        return {
            "posCount": self.pos_count,
            "negCount": self.neg_count,
            "concept": self.concept,
            "noiseLevel": self.noise_level,
            "seed": self.seed,
            "durationSec": self.duration_sec,
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "sampleRate": self.sample_rate,
            "microClipSec": self.micro_clip_sec,
            "episodesPerPositive": self.episodes_per_positive,
        }


def _background(rng: np.random.Generator, spec: CorpusSpec) -> np.ndarray:
    """Per-clip static backdrop: coarse random blocks, mid-range values."""
    coarse = rng.integers(40, 200, size=(spec.height // 8, spec.width // 8), dtype=np.int64)
    return np.kron(coarse, np.ones((8, 8), dtype=np.int64)).astype(np.uint8)


def _block_pattern(rng: np.random.Generator) -> np.ndarray:
    """16x16 high-contrast texture for the moving block."""
    return rng.integers(0, 256, size=(16, 16), dtype=np.int64).astype(np.uint8)


def _episode_indices(rng: np.random.Generator, n_micro: int, count: int) -> list[int]:
    return sorted(int(i) for i in rng.choice(n_micro, size=count, replace=False))


def _render_clip(
    rng: np.random.Generator, spec: CorpusSpec, episodes: list[int]
) -> tuple[FrameSequence, AudioTrack]:
    n_frames = int(round(spec.duration_sec * spec.fps))
    n_samples = int(round(spec.duration_sec * spec.sample_rate))
    background = _background(rng, spec)
    pattern = _block_pattern(rng)
    row0 = int(rng.integers(0, spec.height - 16))
    col0 = int(rng.integers(0, spec.width - 16))

    frames = np.empty((n_frames, spec.height, spec.width), dtype=np.uint8)
    want_motion = spec.concept in ("motion", "motionTone")
    want_tone = spec.concept in ("tone", "motionTone")

    episode_set = set(episodes)
    for k in range(n_frames):
        t = k / spec.fps
        micro = int(t // spec.micro_clip_sec)
        frame = background.copy()
        if want_motion and micro in episode_set:
            t_in = t - micro * spec.micro_clip_sec
            col = (col0 + int(round(BLOCK_SPEED_PX_PER_SEC * t_in))) % (spec.width - 16)
            frame[row0 : row0 + 16, col : col + 16] = pattern
        frames[k] = frame

    if spec.noise_level > 0:
        # sprinkle of pixel jitter, fixed per clip, same positions every frame
        jitter = rng.integers(
            -int(round(2 * spec.noise_level)),
            int(round(2 * spec.noise_level)) + 1,
            size=(spec.height, spec.width),
            dtype=np.int64,
        )
        frames = np.clip(frames.astype(np.int64) + jitter[None, :, :], 0, 255).astype(np.uint8)

    samples = np.zeros(n_samples, dtype=np.float64)
    if spec.noise_level > 0:
        samples += (rng.random(n_samples) - 0.5) * 2.0 * (0.005 * spec.noise_level)
    if want_tone:
        for micro in episodes:
            a = int(micro * spec.micro_clip_sec * spec.sample_rate)
            b = min(n_samples, int((micro + 1) * spec.micro_clip_sec * spec.sample_rate))
            tt = np.arange(a, b) / spec.sample_rate
            samples[a:b] += TONE_AMPLITUDE * np.sin(2.0 * math.pi * TONE_HZ * tt)

    seq = FrameSequence(
        width=spec.width,
        height=spec.height,
        fps=Fraction(spec.fps, 1),
        pixel_format=GRAY8,
        frames=frames,
    )
    return seq, AudioTrack(sample_rate=spec.sample_rate, samples=np.clip(samples, -1.0, 1.0))


def generate_synthetic_corpus(out_dir: str | Path, spec: CorpusSpec) -> Path:
    """Write media plus manifest under out_dir and return the manifest path."""
    spec.validate()
    out = Path(out_dir)
    (out / "media").mkdir(parents=True, exist_ok=True)

    total = spec.pos_count + spec.neg_count
    assign_rng = np.random.default_rng([spec.seed, 0xC0FFEE])
    order = assign_rng.permutation(total)
    positive_ids = {int(i) for i in order[: spec.pos_count]}

    n_micro = int(math.ceil(spec.duration_sec / spec.micro_clip_sec))
    clips = []
    labels = {}
    for idx in range(total):
        clip_id = f"clip{idx:02d}"
        positive = idx in positive_ids
        rng = np.random.default_rng([spec.seed, 1, idx])
        episodes = (
            _episode_indices(rng, n_micro, spec.episodes_per_positive) if positive else []
        )
        seq, track = _render_clip(rng, spec, episodes)

        frame_path = out / "media" / f"{clip_id}.clfv"
        wav_path = out / "media" / f"{clip_id}.wav"
        write_frame_container(seq, frame_path)
        write_wav(track.samples, track.sample_rate, wav_path)

        clips.append(
            {
                "clipId": clip_id,
                "framePath": str(frame_path.relative_to(out)),
                "wavPath": str(wav_path.relative_to(out)),
                "durationSec": spec.duration_sec,
                "mediaRef": str(frame_path.relative_to(out)),
            }
        )
        labels[clip_id] = POSITIVE if positive else NEGATIVE

    manifest = {
        "clips": clips,
        "labels": {"truth": labels},
        "config": {"synthSpec": spec.to_json()},
    }
    manifest_path = out / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
