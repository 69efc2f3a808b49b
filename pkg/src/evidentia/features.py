"""Deterministic feature extraction for audio and image evidence.

Audio: 80-band log-Mel spectrograms over 16 kHz input, window 400 samples,
hop 160, FFT size 512 (next power of two above the window), periodic Hann
window, no pre-emphasis, frames not centered, HTK mel scale
(2595 * log10(1 + f/700)) spanning 20-7600 Hz, natural log with floor
1e-10, then per-utterance mean/variance normalization.

Image: BT.601 grayscale, a fixed 3x3 4-neighbor Laplacian high-pass with
replicate padding, and bilinear resize with the align-centers (half-pixel)
convention.

Grid dump format (for the ``features extract`` CLI and media uploads):
magic ``GRD1``, u8 ndim, ndim little-endian u32 dims, then float32
little-endian values in row-major order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    BadChannelCount,
    BadShape,
    InvalidArgument,
    NonFiniteInput,
    TooShort,
)

MEL_PARAMS = {
    "n_mels": 80,
    "win": 400,
    "hop": 160,
    "f_min": 20.0,
    "f_max": 7600.0,
    "n_fft": 512,
    "sample_rate": 16000,
    "log_floor": 1e-10,
}

GRID_MAGIC = b"GRD1"


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = 16000

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise BadShape("waveform must be 1-D")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteInput("waveform contains non-finite samples")
        if self.sample_rate <= 0:
            raise InvalidArgument("sample rate must be positive")
        object.__setattr__(self, "samples", samples)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray  # (n_mels, frames)
    params: dict = field(default_factory=lambda: dict(MEL_PARAMS))


@dataclass(frozen=True)
class ImageGrid:
    """H x W (single channel) or H x W x 3 pixel grid with values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=np.float64)
        if pixels.ndim == 3 and pixels.shape[2] == 1:
            pixels = pixels[:, :, 0]
        if pixels.ndim not in (2, 3):
            raise BadShape(f"expected 2-D or 3-D pixel grid, got ndim={pixels.ndim}")
        if pixels.ndim == 3 and pixels.shape[2] != 3:
            raise BadChannelCount(f"expected 1 or 3 channels, got {pixels.shape[2]}")
        if not np.all(np.isfinite(pixels)):
            raise NonFiniteInput("pixel grid contains non-finite values")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise InvalidArgument("pixel values must lie in [0, 1]")
        object.__setattr__(self, "pixels", pixels)

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class HpfResidual:
    values: np.ndarray


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = 80,
    n_fft: int = 512,
    sample_rate: int = 16000,
    f_min: float = 20.0,
    f_max: float = 7600.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Triangular HTK-mel filterbank over rfft bins.

    Returns (filters, band_edges_hz) where filters has shape
    (n_mels, n_fft//2 + 1) and band_edges_hz the n_mels + 2 edge points.
    """
    mel_edges = np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2)
    hz_edges = mel_to_hz(mel_edges)
    bin_freqs = np.arange(n_fft // 2 + 1) * (sample_rate / n_fft)
    filters = np.zeros((n_mels, n_fft // 2 + 1))
    for k in range(n_mels):
        left, center, right = hz_edges[k], hz_edges[k + 1], hz_edges[k + 2]
        rising = (bin_freqs - left) / (center - left)
        falling = (right - bin_freqs) / (right - center)
        filters[k] = np.maximum(0.0, np.minimum(rising, falling))
    return filters, hz_edges


_FILTERBANK_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}


def _cached_filterbank(params: dict) -> tuple[np.ndarray, np.ndarray]:
    key = (
        params["n_mels"],
        params["n_fft"],
        params["sample_rate"],
        params["f_min"],
        params["f_max"],
    )
    if key not in _FILTERBANK_CACHE:
        _FILTERBANK_CACHE[key] = mel_filterbank(*key)
    return _FILTERBANK_CACHE[key]


def frame_count(n_samples: int, win: int = 400, hop: int = 160) -> int:
    return 1 + (n_samples - win) // hop


def log_mel(w: Waveform, normalize: bool = True) -> MelSpectrogram:
    """80 x T log-Mel grid; per-utterance normalized unless ``normalize=False``.

    Requires 16 kHz input of at least one window (400 samples); callers with
    other rates must resample first.
    """
    params = dict(MEL_PARAMS)
    if w.sample_rate != params["sample_rate"]:
        raise InvalidArgument(
            f"expected {params['sample_rate']} Hz input, got {w.sample_rate}; resample first"
        )
    n = w.samples.shape[0]
    win, hop, n_fft = params["win"], params["hop"], params["n_fft"]
    if n < win:
        raise TooShort(f"need at least {win} samples, got {n}")

    t = frame_count(n, win, hop)
    idx = np.arange(win)[None, :] + hop * np.arange(t)[:, None]
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(win) / win)  # periodic Hann
    frames = w.samples[idx] * window[None, :]
    spectrum = np.fft.rfft(frames, n=n_fft, axis=1)
    power = spectrum.real**2 + spectrum.imag**2

    filters, _ = _cached_filterbank(params)
    mel = power @ filters.T  # (T, n_mels)
    values = np.log(np.maximum(mel, params["log_floor"])).T  # (n_mels, T)

    if normalize:
        mean = values.mean()
        var = values.var()
        values = (values - mean) / np.sqrt(max(var, 1e-12))
    return MelSpectrogram(values=values, params=params)


BT601_WEIGHTS = np.array([0.299, 0.587, 0.114])


def grayscale(img: ImageGrid) -> ImageGrid:
    """BT.601 luma for 3-channel input, passthrough for single channel."""
    if img.channels == 1:
        return img
    return ImageGrid(pixels=img.pixels @ BT601_WEIGHTS)


def hpf_laplacian(img: ImageGrid) -> HpfResidual:
    """Fixed 3x3 Laplacian [[0,-1,0],[-1,4,-1],[0,-1,0]], replicate padding."""
    if img.channels != 1:
        raise BadShape("high-pass filter expects a single-channel grid")
    h, w = img.shape
    if h < 3 or w < 3:
        raise BadShape(f"need at least 3x3 pixels, got {h}x{w}")
    return HpfResidual(values=kernels.laplacian_4n(img.pixels))


def resize_image(img: ImageGrid, side: int) -> ImageGrid:
    """Bilinear resize to ``side`` x ``side`` (align-centers), clamped to [0, 1]."""
    if side < 1:
        raise BadShape(f"target side must be >= 1, got {side}")
    h, w = img.shape
    if (h, w) == (side, side):
        return img

    def axis_coords(n_src: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        src = (np.arange(side) + 0.5) * (n_src / side) - 0.5
        src = np.clip(src, 0.0, n_src - 1.0)
        i0 = np.floor(src).astype(np.int64)
        i1 = np.minimum(i0 + 1, n_src - 1)
        return i0, i1, src - i0

    r0, r1, ty = axis_coords(h)
    c0, c1, tx = axis_coords(w)
    p = img.pixels
    if img.channels == 3:
        ty = ty[:, None, None]
        tx = tx[None, :, None]
        p00 = p[r0[:, None], c0[None, :]]
        p01 = p[r0[:, None], c1[None, :]]
        p10 = p[r1[:, None], c0[None, :]]
        p11 = p[r1[:, None], c1[None, :]]
    else:
        ty = ty[:, None]
        tx = tx[None, :]
        p00 = p[r0[:, None], c0[None, :]]
        p01 = p[r0[:, None], c1[None, :]]
        p10 = p[r1[:, None], c0[None, :]]
        p11 = p[r1[:, None], c1[None, :]]
    top = p00 * (1.0 - tx) + p01 * tx
    bottom = p10 * (1.0 - tx) + p11 * tx
    out = top * (1.0 - ty) + bottom * ty
    return ImageGrid(pixels=np.clip(out, 0.0, 1.0))


def grid_to_bytes(arr: np.ndarray) -> bytes:
    """Serialize a 1-4 dimensional float array in the grid dump format."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim not in (1, 2, 3, 4):
        raise BadShape(f"grid files support 1-4 dims, got {arr.ndim}")
    header = GRID_MAGIC + struct.pack("<B", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.astype("<f4").tobytes(order="C")


def grid_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < 5 or data[:4] != GRID_MAGIC:
        raise InvalidArgument("not a grid file (bad magic)")
    ndim = data[4]
    if ndim not in (1, 2, 3, 4):
        raise InvalidArgument(f"grid files support 1-4 dims, got {ndim}")
    header_end = 5 + 4 * ndim
    if len(data) < header_end:
        raise InvalidArgument("truncated grid header")
    shape = struct.unpack(f"<{ndim}I", data[5:header_end])
    count = int(np.prod(shape)) if shape else 0
    body = data[header_end:]
    if len(body) != 4 * count:
        raise InvalidArgument(
            f"grid payload length {len(body)} does not match dims {shape}"
        )
    return np.frombuffer(body, dtype="<f4").reshape(shape).astype(np.float64)
