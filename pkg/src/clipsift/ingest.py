"""Codec-free media ingestion and micro-clip segmentation.

Two frame containers are supported:

* CLFV, a flat little-endian binary container:
  magic ``CLFV`` (4 bytes), version u16 (=1), width u16, height u16,
  fpsNum u32, fpsDen u32, frameCount u32, pixelFormat u8 (0 = gray8,
  1 = rgb8 interleaved), 3 reserved bytes, then raw frame-major pixel data.
* a directory of zero-padded numbered netpbm ``P5``/``P6`` frames with a
  ``meta.json`` sidecar ``{"fps": <num or [num, den]>, "pixelFormat": ...}``.

Audio is RIFF/WAVE PCM 16-bit, mono or stereo (stereo is downmixed by
channel average). Real recordings are expected to be transcoded into these
forms externally, e.g.::

    ffmpeg -i lecture.mp4 -vf fps=8,scale=64:48 frames/%06d.ppm
    ffmpeg -i lecture.mp4 -ac 1 -ar 8000 -sample_fmt s16 audio.wav
"""

from __future__ import annotations

import json
import math
import struct
import wave
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    InconsistentFrameDimensions,
    MediaError,
    NonPositiveDuration,
    NonPositiveSegmentLength,
    NotRiffWave,
    TruncatedPayload,
    UnsupportedEncoding,
    UnsupportedPixelFormat,
    ZeroSamples,
)

CLFV_MAGIC = b"CLFV"
CLFV_HEADER = struct.Struct("<4sHHHIIIB3x")  # 26 bytes
GRAY8 = "gray8"
RGB8 = "rgb8"
_PIXEL_FORMATS = {0: GRAY8, 1: RGB8}
_PIXEL_CODES = {GRAY8: 0, RGB8: 1}


@dataclass(frozen=True)
class FrameSequence:
    """Decoded frames for one clip; gray8 -> (n, h, w), rgb8 -> (n, h, w, 3)."""

    width: int
    height: int
    fps: Fraction
    pixel_format: str
    frames: np.ndarray  # uint8

    def __post_init__(self):
        if self.fps <= 0:
            raise NonPositiveDuration(f"fps must be positive, got {self.fps}")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def duration_sec(self) -> float:
        return float(self.frame_count / self.fps)

    def frame_index_at(self, t_sec: float) -> int:
        """Index of the frame covering time t (clamped to the last frame)."""
        idx = math.floor(t_sec * self.fps)
        return min(max(idx, 0), self.frame_count - 1)


@dataclass(frozen=True)
class AudioTrack:
    sample_rate: int
    samples: np.ndarray  # (n,) float64 in [-1, 1]

    @property
    def duration_sec(self) -> float:
        return self.samples.shape[0] / self.sample_rate


@dataclass(frozen=True)
class SegmentSpan:
    clip_id: str
    index: int
    start_sec: float
    end_sec: float

    @property
    def duration(self) -> float:
        return self.end_sec - self.start_sec


# -- CLFV container -----------------------------------------------------------

def load_frame_container(path: str | Path) -> FrameSequence:
    """Load frames from a CLFV file or a netpbm directory."""
    p = Path(path)
    if p.is_dir():
        return _load_netpbm_dir(p)
    return _load_clfv(p)


def _load_clfv(path: Path) -> FrameSequence:
    data = path.read_bytes()
    if len(data) < CLFV_HEADER.size:
        raise TruncatedPayload(f"{path}: file shorter than the {CLFV_HEADER.size}-byte header")
    magic, version, width, height, fps_num, fps_den, frame_count, fmt_code = \
        CLFV_HEADER.unpack_from(data)
    if magic != CLFV_MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise MediaError(f"{path}: unsupported container version {version}")
    if fmt_code not in _PIXEL_FORMATS:
        raise UnsupportedPixelFormat(f"{path}: unknown pixel format code {fmt_code}")
    if fps_num == 0 or fps_den == 0:
        raise MediaError(f"{path}: fps {fps_num}/{fps_den} is not positive")
    pixel_format = _PIXEL_FORMATS[fmt_code]
    bpp = 1 if pixel_format == GRAY8 else 3
    expected = frame_count * width * height * bpp
    payload = data[CLFV_HEADER.size:]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: header promises {expected} payload bytes, found {len(payload)}"
        )
    shape = (frame_count, height, width) if bpp == 1 else (frame_count, height, width, 3)
    frames = np.frombuffer(payload, dtype=np.uint8).reshape(shape)
    return FrameSequence(
        width=width,
        height=height,
        fps=Fraction(fps_num, fps_den),
        pixel_format=pixel_format,
        frames=frames,
    )


def write_frame_container(seq: FrameSequence, path: str | Path) -> None:
    header = CLFV_HEADER.pack(
        CLFV_MAGIC,
        1,
        seq.width,
        seq.height,
        seq.fps.numerator,
        seq.fps.denominator,
        seq.frame_count,
        _PIXEL_CODES[seq.pixel_format],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(seq.frames, dtype=np.uint8).tobytes())


# -- netpbm directory ---------------------------------------------------------

def _parse_fps(value) -> Fraction:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value).limit_denominator(100000)
    raise MediaError(f"meta.json fps {value!r} must be a number or [num, den]")


def _read_pnm(path: Path) -> tuple[str, np.ndarray]:
    data = path.read_bytes()
    if data[:2] not in (b"P5", b"P6"):
        raise BadMagic(f"{path}: not a P5/P6 netpbm file")
    fmt = GRAY8 if data[:2] == b"P5" else RGB8
    # header tokens: magic, width, height, maxval; '#' comments run to newline
    tokens: list[bytes] = []
    i = 2
    while len(tokens) < 3:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if i < len(data) and data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < len(data) and not data[i:i + 1].isspace():
            i += 1
        if start == i:
            raise TruncatedPayload(f"{path}: truncated netpbm header")
        tokens.append(data[start:i])
    i += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise UnsupportedPixelFormat(f"{path}: maxval {maxval} (only 8-bit supported)")
    bpp = 1 if fmt == GRAY8 else 3
    expected = width * height * bpp
    payload = data[i:i + expected]
    if len(payload) < expected:
        raise TruncatedPayload(f"{path}: expected {expected} pixel bytes, found {len(payload)}")
    shape = (height, width) if bpp == 1 else (height, width, 3)
    return fmt, np.frombuffer(payload, dtype=np.uint8).reshape(shape)


def _load_netpbm_dir(path: Path) -> FrameSequence:
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise MediaError(f"{path}: missing meta.json sidecar")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    fps = _parse_fps(meta["fps"])
    declared_fmt = meta.get("pixelFormat")
    frame_files = sorted(
        p for p in path.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm")
    )
    if not frame_files:
        raise MediaError(f"{path}: no netpbm frames found")
    frames = []
    fmt = None
    shape = None
    for fp in frame_files:
        f_fmt, pixels = _read_pnm(fp)
        if fmt is None:
            fmt, shape = f_fmt, pixels.shape
        elif f_fmt != fmt:
            raise UnsupportedPixelFormat(f"{fp}: mixed P5/P6 frames in one directory")
        elif pixels.shape != shape:
            raise InconsistentFrameDimensions(
                f"{fp}: frame shape {pixels.shape} != first frame {shape}"
            )
        frames.append(pixels)
    if declared_fmt is not None and declared_fmt != fmt:
        raise UnsupportedPixelFormat(
            f"{path}: meta.json declares {declared_fmt!r} but frames are {fmt!r}"
        )
    stack = np.stack(frames)
    height, width = shape[0], shape[1]
    return FrameSequence(width=width, height=height, fps=fps, pixel_format=fmt, frames=stack)


# -- WAV ------------------------------------------------------------------

def load_wav(path: str | Path) -> AudioTrack:
    """Load PCM 16-bit RIFF/WAVE audio, downmixing stereo by channel average."""
    p = Path(path)
    with open(p, "rb") as fh:
        head = fh.read(12)
    if len(head) < 12 or head[:4] != b"RIFF" or head[8:12] != b"WAVE":
        raise NotRiffWave(f"{p}: not a RIFF/WAVE file")
    try:
        with wave.open(str(p), "rb") as wf:
            n_channels = wf.getnchannels()
            samp_width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        raise UnsupportedEncoding(f"{p}: {exc}") from exc
    if samp_width != 2:
        raise UnsupportedEncoding(f"{p}: only 16-bit PCM supported, got {8 * samp_width}-bit")
    if n_channels not in (1, 2):
        raise UnsupportedEncoding(f"{p}: {n_channels} channels (mono/stereo only)")
    if n_frames == 0 or not raw:
        raise ZeroSamples(f"{p}: WAV contains no samples")
    pcm = np.frombuffer(raw, dtype="<i2")
    if n_channels == 2:
        pcm = pcm.reshape(-1, 2)
        samples = (pcm[:, 0].astype(np.float64) + pcm[:, 1].astype(np.float64)) / 2.0 / 32768.0
    else:
        samples = pcm.astype(np.float64) / 32768.0
    return AudioTrack(sample_rate=rate, samples=samples)


def write_wav(track_samples: np.ndarray, sample_rate: int, path: str | Path) -> None:
    """Write float samples in [-1, 1] as mono PCM 16-bit WAV."""
    clipped = np.clip(np.asarray(track_samples, dtype=np.float64), -1.0, 1.0)
    # same 1/32768 step as the loader, so grid values round-trip exactly
    pcm = np.clip(np.round(clipped * 32768.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(sample_rate)
        wf.writeframes(pcm.tobytes())


# -- segmentation --------------------------------------------------------------

TAIL_MERGE_FRACTION = 0.25


def segment_micro_clips(
    duration_sec: float,
    segment_len_sec: float,
    clip_id: str = "",
) -> list[SegmentSpan]:
    """Tile [0, duration) with fixed-length spans.

    A trailing span shorter than 25% of the segment length is merged into its
    predecessor, so no micro-clip is too short to carry motion statistics.
    """
    if not duration_sec > 0:
        raise NonPositiveDuration(f"duration {duration_sec} must be positive")
    if not segment_len_sec > 0:
        raise NonPositiveSegmentLength(f"segment length {segment_len_sec} must be positive")
    n = math.ceil(duration_sec / segment_len_sec)
    bounds = [min(i * segment_len_sec, duration_sec) for i in range(n)] + [duration_sec]
    if n >= 2 and (bounds[n] - bounds[n - 1]) < TAIL_MERGE_FRACTION * segment_len_sec:
        del bounds[n - 1]
        n -= 1
    return [
        SegmentSpan(clip_id=clip_id, index=i, start_sec=bounds[i], end_sec=bounds[i + 1])
        for i in range(n)
    ]
