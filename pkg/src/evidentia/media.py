"""Decoding of the media container formats the platform accepts.

Audio arrives as 16 kHz mono 16-bit PCM WAV. Images and video frames
arrive as raw float grids (see ``features.grid_to_bytes``). Sniffing is
by magic bytes only; callers that know the format can skip it.
"""

from __future__ import annotations

import io
import wave

import numpy as np

from .errors import InvalidArgument, UnsupportedMedia
from .features import GRID_MAGIC, ImageGrid, Waveform, grid_from_bytes

WAV_MAGIC = b"RIFF"
REQUIRED_SAMPLE_RATE = 16_000
PCM16_SCALE = 32768.0


def sniff_media_kind(data: bytes) -> str:
    """Classify raw bytes as "wav", "grid", or raise UnsupportedMedia."""
    if len(data) >= 12 and data[:4] == WAV_MAGIC and data[8:12] == b"WAVE":
        return "wav"
    if data[: len(GRID_MAGIC)] == GRID_MAGIC:
        return "grid"
    raise UnsupportedMedia("payload is neither RIFF/WAVE nor a float grid dump")


def decode_wav(data: bytes) -> Waveform:
    """Decode 16 kHz mono 16-bit PCM WAV bytes to a float waveform in [-1, 1)."""
    try:
        with wave.open(io.BytesIO(data), "rb") as reader:
            channels = reader.getnchannels()
            width = reader.getsampwidth()
            rate = reader.getframerate()
            frames = reader.readframes(reader.getnframes())
    except (wave.Error, EOFError) as exc:
        raise InvalidArgument(f"unreadable wav payload: {exc}") from exc
    if channels != 1:
        raise InvalidArgument(f"expected mono audio, got {channels} channels")
    if width != 2:
        raise InvalidArgument(f"expected 16-bit pcm, got {8 * width}-bit")
    if rate != REQUIRED_SAMPLE_RATE:
        raise InvalidArgument(f"expected {REQUIRED_SAMPLE_RATE} Hz audio, got {rate}")
    samples = np.frombuffer(frames, dtype="<i2").astype(np.float64) / PCM16_SCALE
    return Waveform(samples=samples, sample_rate=rate)


def encode_wav(waveform: Waveform) -> bytes:
    """Inverse of decode_wav; clips to [-1, 1) before quantizing."""
    if waveform.sample_rate != REQUIRED_SAMPLE_RATE:
        raise InvalidArgument(f"expected {REQUIRED_SAMPLE_RATE} Hz audio")
    scaled = np.clip(waveform.samples, -1.0, (PCM16_SCALE - 1) / PCM16_SCALE)
    pcm = np.round(scaled * PCM16_SCALE).astype("<i2")
    out = io.BytesIO()
    with wave.open(out, "wb") as writer:
        writer.setnchannels(1)
        writer.setsampwidth(2)
        writer.setframerate(REQUIRED_SAMPLE_RATE)
        writer.writeframes(pcm.tobytes())
    return out.getvalue()


def decode_image_grid(data: bytes) -> ImageGrid:
    values = grid_from_bytes(data)
    if values.ndim not in (2, 3):
        raise InvalidArgument(f"image grid must be 2-d or 3-d, got {values.ndim}-d")
    return ImageGrid(pixels=values)


def decode_video_grid(data: bytes) -> np.ndarray:
    """Video dump: T x H x W or T x H x W x 3 float grid, values in [0, 1]."""
    values = grid_from_bytes(data)
    if values.ndim not in (3, 4):
        raise InvalidArgument(f"video grid must be 3-d or 4-d, got {values.ndim}-d")
    if values.ndim == 4 and values.shape[-1] != 3:
        raise InvalidArgument(f"video channels must be 3, got {values.shape[-1]}")
    return values
