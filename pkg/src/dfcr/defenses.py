"""Single-model baseline defenses: block-DCT compression, Gaussian noise
preprocessing, and adversarial training for the toy window detector.

The compressor is a from-scratch block-transform quantizer, not a file
codec: an 8x8 orthonormal DCT per block, quantization by the quality-scaled
standard luminance table, then inverse transform and clipping. That is the
mechanism (high-frequency removal) the defense relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .detectors import (
    RasterImage,
    ToyDetectorParams,
    detector_accuracy,
    make_raster,
    train_toy_detector,
)

# Standard luminance quantization table (8x8).
_LUMINANCE_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=float,
)


@dataclass(frozen=True)
class CompressionConfig:
    block: int = 8
    quality: int = 50

    def __post_init__(self) -> None:
        if self.block != 8:
            raise ValueError("only 8x8 blocks are supported")
        if not 1 <= self.quality <= 100:
            raise ValueError("quality must be in [1, 100]")


@dataclass(frozen=True)
class NoiseConfig:
    sigma: float = 8.0

    def __post_init__(self) -> None:
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


def dct_matrix(n: int = 8) -> np.ndarray:
    """Orthonormal DCT-II basis matrix: row k is the k-th cosine basis."""
    k = np.arange(n)[:, None]
    x = np.arange(n)[None, :]
    m = np.sqrt(2.0 / n) * np.cos((2 * x + 1) * k * np.pi / (2 * n))
    m[0, :] = np.sqrt(1.0 / n)
    return m


_DCT8 = dct_matrix(8)


def quantization_table(quality: int) -> np.ndarray:
    """Quality-scaled luminance table (50 = table as published)."""
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    table = np.floor((_LUMINANCE_TABLE * scale + 50.0) / 100.0)
    return np.clip(table, 1.0, 255.0)


def _pad_to_blocks(data: np.ndarray, block: int) -> np.ndarray:
    h, w = data.shape
    ph = (block - h % block) % block
    pw = (block - w % block) % block
    if ph == 0 and pw == 0:
        return data
    return np.pad(data, ((0, ph), (0, pw)), mode="edge")


def _compress_round(data: np.ndarray, table: np.ndarray, block: int,
                    height: int, width: int) -> np.ndarray:
    padded = _pad_to_blocks(data, block) - 128.0
    h, w = padded.shape
    out = np.empty_like(padded)
    for by in range(0, h, block):
        for bx in range(0, w, block):
            blockpx = padded[by : by + block, bx : bx + block]
            coef = _DCT8 @ blockpx @ _DCT8.T
            coef = np.round(coef / table) * table
            out[by : by + block, bx : bx + block] = _DCT8.T @ coef @ _DCT8
    return np.clip(out[:height, :width] + 128.0, 0.0, 255.0)


def compress(image: RasterImage, cfg: CompressionConfig = CompressionConfig()) -> RasterImage:
    """Lossy block-transform round trip; deterministic, dimension-preserving.

    The quantize/reconstruct/clip cycle repeats until the raster stops
    changing (clipping can perturb coefficients, so a single round is not a
    fixed point). That makes re-compression at the same quality a no-op.
    """
    table = quantization_table(cfg.quality)
    data = image.data
    for _ in range(16):
        nxt = _compress_round(data, table, cfg.block, image.height, image.width)
        if np.array_equal(nxt, data):
            break
        data = nxt
    return make_raster(data)


def add_noise(image: RasterImage, cfg: NoiseConfig, seed: int) -> RasterImage:
    """Seeded i.i.d. Gaussian pixel noise, clipped back to [0, 255]."""
    if cfg.sigma == 0:
        return image.copy()
    rng = np.random.default_rng(seed)
    noisy = image.data + rng.normal(0.0, cfg.sigma, size=image.data.shape)
    return make_raster(np.clip(noisy, 0.0, 255.0))


@dataclass(frozen=True)
class AdversarialTrainingReport:
    clean_accuracy_before: float
    clean_accuracy_after: float
    attack_confidence_before: float
    attack_confidence_after: float


AttackFn = Callable[[ToyDetectorParams, int, int], list[np.ndarray]]


def adversarial_train(
    detector: ToyDetectorParams,
    clean_set: Sequence[tuple[np.ndarray, float]],
    attack_fn: AttackFn,
    mix_fraction: float = 0.10,
    epochs: int = 100,
    batch_size: int = 8,
    learning_rate: float = 0.5,
    seed: int = 0,
) -> tuple[ToyDetectorParams, AdversarialTrainingReport]:
    """Retrain on clean data augmented with adversarial windows labeled 0.

    ``attack_fn(params, count, seed)`` crafts adversarial windows against the
    given parameters; enough are generated that they make up ``mix_fraction``
    of the augmented training set. The before/after attack confidences are
    measured on a held-out batch of attacks crafted against the undefended
    detector (the usual transfer evaluation: the attacker holds the original
    model's gradients).
    """
    if not 0.0 <= mix_fraction < 1.0:
        raise ValueError("mix_fraction must be in [0, 1)")

    def mean_confidence(params: ToyDetectorParams, windows: Sequence[np.ndarray]) -> float:
        confs = [
            float(1.0 / (1.0 + np.exp(-(w.ravel() / 255.0 @ params.weights + params.bias))))
            for w in windows
        ]
        return float(np.mean(confs))

    eval_windows = attack_fn(detector, 32, seed + 1)
    clean_before = detector_accuracy(detector, clean_set)
    attack_before = mean_confidence(detector, eval_windows)

    n_adv = int(round(mix_fraction * len(clean_set) / (1.0 - mix_fraction)))
    augmented = list(clean_set)
    if n_adv > 0:
        adv_windows = attack_fn(detector, n_adv, seed + 2)
        augmented += [(w, 0.0) for w in adv_windows]

    trained, _ = train_toy_detector(
        augmented,
        epochs=epochs,
        batch_size=batch_size,
        learning_rate=learning_rate,
        seed=seed,
        init=detector,
    )
    report = AdversarialTrainingReport(
        clean_accuracy_before=clean_before,
        clean_accuracy_after=detector_accuracy(trained, clean_set),
        attack_confidence_before=attack_before,
        attack_confidence_after=mean_confidence(trained, eval_windows),
    )
    return trained, report
