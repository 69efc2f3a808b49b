"""Pluggable detectors: spectral baselines behind a stable interface.

Every scorer here is a pure function of (detector calibration, input
bytes). Trained networks are deliberately replaced by closed-form
spectral statistics so scores are reproducible anywhere; the Detector
interface preserves drop-in upgrade to real models.

The fingerprint pipeline runs in two stages over the Laplacian residual
spectrum: stage 1 screens real vs generated with a two-sided band test on
the high-band share of spectral energy (|F|^2); stage 2 identifies which
upsampler produced a generated image by nearest centroid over a 20-dim
signature (16 log-spaced radial magnitude-mass bins plus 4 angular sector
fractions), with class scores softmax(-distance). The screen uses squared
magnitude because zero-insertion upsampling concentrates energy in a few
Nyquist-replica spikes of the pixel mean: those spikes dominate energy but
are a tiny share of plain magnitude mass, so an energy ratio separates
that class while a magnitude-mass ratio does not.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.ndimage

from . import kernels
from .errors import (
    BadShape,
    EmptyVideo,
    InsufficientData,
    InvalidArgument,
    UncalibratedClassifier,
)
from .features import ImageGrid, MEL_PARAMS, Waveform, grayscale, hpf_laplacian, log_mel, resize_image


class Modality(Enum):
    IMAGE = "image"
    VIDEO = "video"
    AUDIO = "audio"
    FINGERPRINT = "fingerprint"


SEQ_LEN = 32

# analytic high-band energy share of the Laplacian residual of white noise
# on a 380x380 grid: sum of |H(f)|^2 over radii > 0.375 cycles/px divided
# by the total, H(f) = 4 - 2cos(2 pi fx) - 2cos(2 pi fy)
FLAT_NOISE_ENERGY_RATIO_380 = 0.86429
HIGH_BAND_RADIUS = 0.375  # cycles/px; 0.75 x Nyquist

RADIAL_BINS = 16
SECTOR_BINS = 4
FEATURE_DIM = RADIAL_BINS + SECTOR_BINS
RADIAL_EDGES = np.geomspace(0.01, math.sqrt(2.0) / 2.0, RADIAL_BINS + 1)


@dataclass(frozen=True)
class Detector:
    id: str
    modality: Modality
    threshold: float
    calibration: dict
    descriptor: dict

    def __post_init__(self):
        if not (0.0 <= self.threshold <= 1.0):
            raise InvalidArgument(f"threshold {self.threshold} outside [0, 1]")
        if not isinstance(self.modality, Modality):
            raise InvalidArgument(f"bad modality {self.modality!r}")


def default_registry() -> dict[str, Detector]:
    detectors = [
        Detector(
            id="image-hpf-v1",
            modality=Modality.IMAGE,
            threshold=0.5,
            calibration={"midpoint": 0.5, "gain": 8.0},
            descriptor={"version": "1", "family": "spectral-baseline",
                        "signal": "high-band share of residual magnitude mass"},
        ),
        Detector(
            id="video-temporal-v1",
            modality=Modality.VIDEO,
            threshold=0.5,
            calibration={"alpha": 4.0, "beta": 2.0, "gamma": -2.0,
                         "frame_midpoint": 0.5, "frame_gain": 8.0,
                         "embedding_dim": 1792},
            descriptor={"version": "1", "family": "temporal-aggregate",
                        "signal": "mean+stddev of 32 frame scores"},
        ),
        Detector(
            id="audio-mel-v1",
            modality=Modality.AUDIO,
            threshold=0.5,
            calibration={"midpoint": 1.0, "gain": 1.0,
                         "high_bands": 40, "low_bands": 40},
            descriptor={"version": "1", "family": "spectral-baseline",
                        "signal": "high vs low mel band log energy"},
        ),
        Detector(
            id="fingerprint-2stage-v1",
            modality=Modality.FINGERPRINT,
            threshold=0.5,
            calibration={"stage1_center": FLAT_NOISE_ENERGY_RATIO_380,
                         "stage1_halfwidth": 0.05},
            descriptor={"version": "1", "family": "two-stage-spectral",
                        "signal": "band screen + radial signature"},
        ),
    ]
    return {d.id: d for d in detectors}


def registry_to_json(registry: dict[str, Detector]) -> str:
    payload = {
        d.id: {
            "modality": d.modality.value,
            "threshold": d.threshold,
            "calibration": d.calibration,
            "descriptor": d.descriptor,
        }
        for d in registry.values()
    }
    return json.dumps(payload, indent=2, sort_keys=True)


def registry_from_json(text: str) -> dict[str, Detector]:
    try:
        payload = json.loads(text)
    except ValueError as exc:
        raise InvalidArgument("detector registry is not valid json") from exc
    registry = {}
    for detector_id, row in payload.items():
        registry[detector_id] = Detector(
            id=detector_id,
            modality=Modality(row["modality"]),
            threshold=row["threshold"],
            calibration=dict(row["calibration"]),
            descriptor=dict(row.get("descriptor", {})),
        )
    return registry


def load_registry(path: str | Path) -> dict[str, Detector]:
    return registry_from_json(Path(path).read_text(encoding="utf-8"))


def save_registry(registry: dict[str, Detector], path: str | Path):
    Path(path).write_text(registry_to_json(registry) + "\n", encoding="utf-8")


def detector_for(registry: dict[str, Detector], modality: Modality) -> Detector:
    for detector in registry.values():
        if detector.modality == modality:
            return detector
    raise InvalidArgument(f"no detector registered for {modality.value}")


def _logistic(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


# --- spectral analysis shared by the image scorer and the fingerprint ------

_GRID_CACHE: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _spectral_grids(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(high_band_mask, radial_bins, sector_bins) for an FFT of this shape.

    Bin arrays are flattened int64 with kernels.band_sums discard buckets;
    the DC cell is excluded everywhere (it carries the mean, not texture).
    """
    if shape not in _GRID_CACHE:
        h, w = shape
        fy = np.fft.fftfreq(h)[:, None]
        fx = np.fft.fftfreq(w)[None, :]
        radius = np.hypot(fy, fx)
        high = (radius > HIGH_BAND_RADIUS).ravel()

        radial = np.searchsorted(RADIAL_EDGES, radius.ravel(), side="right") - 1
        radial[(radial < 0) | (radial >= RADIAL_BINS)] = RADIAL_BINS

        theta = np.mod(np.arctan2(np.broadcast_to(fy, (h, w)),
                                  np.broadcast_to(fx, (h, w))), np.pi)
        sector = np.minimum((theta / (np.pi / SECTOR_BINS)).astype(np.int64),
                            SECTOR_BINS - 1).ravel()
        sector[radius.ravel() == 0.0] = SECTOR_BINS
        _GRID_CACHE[shape] = (high, radial.astype(np.int64), sector)
    return _GRID_CACHE[shape]


def _residual_spectrum(img: ImageGrid) -> np.ndarray:
    residual = hpf_laplacian(grayscale(img))
    return np.fft.fft2(residual.values)


def high_band_mass_ratio(img: ImageGrid) -> float:
    """Share of residual spectrum magnitude mass above 0.75 x Nyquist."""
    spectrum = _residual_spectrum(img)
    mass = np.abs(spectrum).ravel()
    total = float(mass.sum())
    if total == 0.0:
        return 0.0
    high, _, _ = _spectral_grids(spectrum.shape)
    return float(mass[high].sum()) / total


def _energy_ratio_and_feature(spectrum: np.ndarray) -> tuple[float, np.ndarray]:
    high, radial, sector = _spectral_grids(spectrum.shape)
    mass = np.abs(spectrum).ravel()
    energy = mass * mass

    total_energy = float(energy.sum())
    ratio = float(energy[high].sum()) / total_energy if total_energy > 0.0 else 0.0

    nondc = mass.copy()
    nondc[0] = 0.0  # row-major ravel puts DC first
    total_mass = float(nondc.sum())
    feature = np.zeros(FEATURE_DIM)
    if total_mass > 0.0:
        feature[:RADIAL_BINS] = kernels.band_sums(nondc, radial, RADIAL_BINS) / total_mass
        feature[RADIAL_BINS:] = kernels.band_sums(nondc, sector, SECTOR_BINS) / total_mass
    return ratio, feature


def analyze_image(img: ImageGrid) -> tuple[float, np.ndarray]:
    """(stage-1 energy ratio, 20-dim spectral signature) of one image."""
    return _energy_ratio_and_feature(_residual_spectrum(img))


# --- per-modality scorers -----------------------------------------------------


def score_image(detector: Detector, img: ImageGrid) -> float:
    if detector.modality != Modality.IMAGE:
        raise InvalidArgument(f"{detector.id} is not an image detector")
    return _image_score(detector.calibration, img)


def _image_score(calibration: dict, img: ImageGrid) -> float:
    midpoint = calibration.get("midpoint", calibration.get("frame_midpoint", 0.5))
    gain = calibration.get("gain", calibration.get("frame_gain", 8.0))
    return _logistic(gain * (high_band_mass_ratio(img) - midpoint))


@dataclass(frozen=True)
class FrameSequence:
    frames: tuple[ImageGrid, ...]
    source_frame_count: int

    def __post_init__(self):
        if len(self.frames) != SEQ_LEN:
            raise BadShape(f"frame sequence must hold {SEQ_LEN} frames, got {len(self.frames)}")
        if self.source_frame_count < 1:
            raise EmptyVideo("source must have at least one frame")


def sample_frames(frames: list[ImageGrid], n: int = SEQ_LEN) -> FrameSequence:
    """Uniform temporal sampling at indices floor(i*N/n), i in [0, n).

    For N >= 1 those indices always land in range, so the repeat-last
    padding rule for short clips is subsumed by the sampling formula.
    """
    count = len(frames)
    if count < 1:
        raise EmptyVideo("no frames to sample")
    picked = tuple(frames[(i * count) // n] for i in range(n))
    return FrameSequence(frames=picked, source_frame_count=count)


def score_video(detector: Detector, seq: FrameSequence) -> float:
    if detector.modality != Modality.VIDEO:
        raise InvalidArgument(f"{detector.id} is not a video detector")
    calib = detector.calibration
    # sorted so the float aggregate is bit-identical under frame reordering
    scores = np.sort([_image_score(calib, frame) for frame in seq.frames])
    alpha = calib.get("alpha", 4.0)
    beta = calib.get("beta", 2.0)
    gamma = calib.get("gamma", -2.0)
    return _logistic(alpha * float(scores.mean()) + beta * float(scores.std()) + gamma)


def score_audio(detector: Detector, w: Waveform) -> float:
    if detector.modality != Modality.AUDIO:
        raise InvalidArgument(f"{detector.id} is not an audio detector")
    calib = detector.calibration
    # unnormalized on purpose: per-utterance normalization would cancel the
    # absolute band-energy difference this baseline keys on
    mel = log_mel(w, normalize=False).values
    band_means = mel.mean(axis=1)
    high = int(calib.get("high_bands", 40))
    low = int(calib.get("low_bands", 40))
    n_mels = band_means.shape[0]
    if not (0 < high <= n_mels and 0 < low <= n_mels):
        raise InvalidArgument("band counts must be within the mel band count")
    contrast = float(band_means[n_mels - high:].mean() - band_means[:low].mean())
    return _logistic(calib.get("gain", 1.0) * (contrast - calib.get("midpoint", 1.0)))


# --- synthetic upsampler corpus -------------------------------------------------


class UpsamplerClass(Enum):
    NONE = "none"
    NEAREST = "nearest"
    BILINEAR = "bilinear"
    BICUBIC = "bicubic"
    ZERO_INSERTION = "zero_insertion"


GENERATED_CLASSES = (
    UpsamplerClass.NEAREST,
    UpsamplerClass.BILINEAR,
    UpsamplerClass.BICUBIC,
    UpsamplerClass.ZERO_INSERTION,
)

BASE_SIDE = 190
FULL_SIDE = 380
NOISE_MEAN = 0.5
NOISE_STD = 0.15


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    per_class_count: int
    seed: int
    classes: tuple[UpsamplerClass, ...] = (UpsamplerClass.NONE,) + GENERATED_CLASSES

    def __post_init__(self):
        if self.per_class_count < 1:
            raise InvalidArgument("per_class_count must be >= 1")
        if len(set(self.classes)) != len(self.classes) or not self.classes:
            raise InvalidArgument("classes must be nonempty and unique")


@dataclass(frozen=True)
class CorpusItem:
    image: ImageGrid
    label: UpsamplerClass


def _upsample(base: np.ndarray, label: UpsamplerClass) -> np.ndarray:
    if label == UpsamplerClass.NEAREST:
        return np.repeat(np.repeat(base, 2, axis=0), 2, axis=1)
    if label == UpsamplerClass.BILINEAR:
        return resize_image(ImageGrid(pixels=base), FULL_SIDE).pixels
    if label == UpsamplerClass.BICUBIC:
        out = scipy.ndimage.zoom(base, 2, order=3, grid_mode=True, mode="nearest")
        return np.clip(out, 0.0, 1.0)
    if label == UpsamplerClass.ZERO_INSERTION:
        out = np.zeros((FULL_SIDE, FULL_SIDE))
        out[::2, ::2] = base
        return out
    raise InvalidArgument(f"{label!r} is not an upsampler class")


def generate_corpus(spec: SyntheticCorpusSpec) -> list[CorpusItem]:
    """Seed-deterministic labeled corpus; one shared stream, fixed order."""
    rng = np.random.default_rng(spec.seed)
    items = []
    for label in spec.classes:
        for _ in range(spec.per_class_count):
            if label == UpsamplerClass.NONE:
                pixels = rng.normal(NOISE_MEAN, NOISE_STD, (FULL_SIDE, FULL_SIDE))
            else:
                base = np.clip(rng.normal(NOISE_MEAN, NOISE_STD, (BASE_SIDE, BASE_SIDE)),
                               0.0, 1.0)
                pixels = _upsample(base, label)
            items.append(CorpusItem(
                image=ImageGrid(pixels=np.clip(pixels, 0.0, 1.0)),
                label=label,
            ))
    return items


# --- fingerprint calibration and verdicts ------------------------------------


@dataclass(frozen=True)
class FingerprintCalibration:
    class_names: tuple[str, ...]
    centroids: np.ndarray  # (K, FEATURE_DIM), standardized space
    feature_mean: np.ndarray
    feature_std: np.ndarray
    stage1_center: float
    stage1_halfwidth: float

    def to_json(self) -> str:
        return json.dumps({
            "class_names": list(self.class_names),
            "centroids": self.centroids.tolist(),
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "stage1_center": self.stage1_center,
            "stage1_halfwidth": self.stage1_halfwidth,
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "FingerprintCalibration":
        row = json.loads(text)
        return cls(
            class_names=tuple(row["class_names"]),
            centroids=np.asarray(row["centroids"], dtype=np.float64),
            feature_mean=np.asarray(row["feature_mean"], dtype=np.float64),
            feature_std=np.asarray(row["feature_std"], dtype=np.float64),
            stage1_center=row["stage1_center"],
            stage1_halfwidth=row["stage1_halfwidth"],
        )


@dataclass(frozen=True)
class Stage1Screen:
    label: str  # "real" | "generated"
    score: float  # high-band energy ratio


@dataclass(frozen=True)
class Stage2Match:
    label: str
    class_scores: dict[str, float]


@dataclass(frozen=True)
class FingerprintVerdict:
    stage1: Stage1Screen
    stage2: Stage2Match | None


MIN_SAMPLES_PER_CLASS = 10
STAGE1_SIGMA_MULT = 12.0
STAGE1_MIN_HALFWIDTH = 1e-3


def fit_fingerprint(corpus: list[CorpusItem]) -> FingerprintCalibration:
    """Centroids plus global standardization from a labeled corpus.

    Deterministic and order-free: every statistic is a mean or a
    population deviation over an unordered set.
    """
    by_label: dict[UpsamplerClass, list[np.ndarray]] = {}
    ratios_none = []
    for item in corpus:
        ratio, feature = analyze_image(item.image)
        by_label.setdefault(item.label, []).append(feature)
        if item.label == UpsamplerClass.NONE:
            ratios_none.append(ratio)
    if len(by_label) < 2:
        raise InsufficientData(f"need >= 2 classes, got {len(by_label)}")
    for label, rows in by_label.items():
        if len(rows) < MIN_SAMPLES_PER_CLASS:
            raise InsufficientData(
                f"class {label.value} has {len(rows)} samples, need >= {MIN_SAMPLES_PER_CLASS}"
            )

    all_features = np.vstack([row for rows in by_label.values() for row in rows])
    feature_mean = all_features.mean(axis=0)
    feature_std = np.maximum(all_features.std(axis=0), 1e-12)

    class_names = []
    centroids = []
    for label in sorted(by_label, key=lambda c: c.value):
        if label == UpsamplerClass.NONE:
            continue
        standardized = (np.vstack(by_label[label]) - feature_mean) / feature_std
        class_names.append(label.value)
        centroids.append(standardized.mean(axis=0))

    if ratios_none:
        ratios = np.asarray(ratios_none)
        center = float(ratios.mean())
        halfwidth = max(STAGE1_SIGMA_MULT * float(ratios.std()), STAGE1_MIN_HALFWIDTH)
    else:
        center = FLAT_NOISE_ENERGY_RATIO_380
        halfwidth = 0.05
    return FingerprintCalibration(
        class_names=tuple(class_names),
        centroids=np.vstack(centroids),
        feature_mean=feature_mean,
        feature_std=feature_std,
        stage1_center=center,
        stage1_halfwidth=halfwidth,
    )


def fingerprint(
    img: ImageGrid,
    calibration: FingerprintCalibration | None = None,
    stage1_center: float = FLAT_NOISE_ENERGY_RATIO_380,
    stage1_halfwidth: float = 0.05,
) -> FingerprintVerdict:
    if img.channels != 1:
        raise BadShape("fingerprinting expects a single-channel grid; apply grayscale first")
    if calibration is not None:
        stage1_center = calibration.stage1_center
        stage1_halfwidth = calibration.stage1_halfwidth
    ratio, feature = analyze_image(img)
    if abs(ratio - stage1_center) <= stage1_halfwidth:
        return FingerprintVerdict(stage1=Stage1Screen(label="real", score=ratio),
                                  stage2=None)
    if calibration is None:
        raise UncalibratedClassifier("stage-2 centroids are not fitted")
    standardized = (feature - calibration.feature_mean) / calibration.feature_std
    distances = np.linalg.norm(calibration.centroids - standardized[None, :], axis=1)
    z = -distances
    z -= z.max()
    weights = np.exp(z)
    probs = weights / weights.sum()
    best = int(np.argmin(distances))
    return FingerprintVerdict(
        stage1=Stage1Screen(label="generated", score=ratio),
        stage2=Stage2Match(
            label=calibration.class_names[best],
            class_scores={name: float(p) for name, p in
                          zip(calibration.class_names, probs)},
        ),
    )


def fingerprint_event_score(verdict: FingerprintVerdict,
                            calibration: FingerprintCalibration | None = None,
                            stage1_center: float = FLAT_NOISE_ENERGY_RATIO_380,
                            stage1_halfwidth: float = 0.05) -> float:
    """Map the two-sided band test onto a [0, 1) fakeness score.

    score = 1 - 2^(-d) with d = |ratio - center| / halfwidth, so the band
    edge lands exactly on 0.5: score >= 0.5 iff the screen says generated.
    """
    if calibration is not None:
        stage1_center = calibration.stage1_center
        stage1_halfwidth = calibration.stage1_halfwidth
    d = abs(verdict.stage1.score - stage1_center) / stage1_halfwidth
    return 1.0 - 2.0 ** (-d)


# --- the desk-scale experiment ---------------------------------------------------


def run_fingerprint_experiment(
    seed: int = 2026,
    per_class_count: int = 500,
    train_frac: float = 0.8,
) -> dict:
    """Fit on a per-class head split, evaluate screen and class id on the tail."""
    if not (0.0 < train_frac < 1.0):
        raise InvalidArgument("train_frac must be in (0, 1)")
    spec = SyntheticCorpusSpec(per_class_count=per_class_count, seed=seed)
    corpus = generate_corpus(spec)
    train_n = int(per_class_count * train_frac)
    if train_n < MIN_SAMPLES_PER_CLASS or train_n == per_class_count:
        raise InvalidArgument("split leaves too few samples on one side")

    by_label: dict[UpsamplerClass, list[CorpusItem]] = {}
    for item in corpus:
        by_label.setdefault(item.label, []).append(item)
    train = [item for items in by_label.values() for item in items[:train_n]]
    test = [item for items in by_label.values() for item in items[train_n:]]

    calibration = fit_fingerprint(train)

    screen_hits = 0
    stage2_hits = 0
    stage2_total = 0
    per_class: dict[str, dict[str, int]] = {}
    for item in test:
        verdict = fingerprint(item.image, calibration)
        expected = "real" if item.label == UpsamplerClass.NONE else "generated"
        counts = per_class.setdefault(item.label.value,
                                      {"screen_correct": 0, "stage2_correct": 0, "total": 0})
        counts["total"] += 1
        if verdict.stage1.label == expected:
            screen_hits += 1
            counts["screen_correct"] += 1
        if item.label != UpsamplerClass.NONE:
            stage2_total += 1
            if verdict.stage2 is not None and verdict.stage2.label == item.label.value:
                stage2_hits += 1
                counts["stage2_correct"] += 1

    return {
        "seed": seed,
        "per_class_count": per_class_count,
        "train_per_class": train_n,
        "test_per_class": per_class_count - train_n,
        "stage1_accuracy": screen_hits / len(test),
        "stage2_accuracy": stage2_hits / stage2_total,
        "per_class": per_class,
        "calibration": calibration,
    }
