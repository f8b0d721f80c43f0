"""Surrogate detectors.

Two detection paths coexist:

* ``simulate_detections`` is a noisy truth-based detector per sensor; it
  generates the contact stream experiments feed through the pipeline.
* The "toy" window scorer is a small differentiable model over raster
  images. It exists so gradient attacks, black-box attacks, and adversarial
  training have a real model to push against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geometry
from .core import (
    DETECT_THRESHOLD,
    TRUE_CHART_TO_OPTICAL,
    BoundingBox,
    ChartFrame,
    ClassLabel,
    DetectionVector,
    GroundTruthObject,
    RadarBlob,
    Scenario,
    SensorKind,
)


class ImageSmallerThanWindow(ValueError):
    pass


class EmptyDataset(ValueError):
    pass


@dataclass
class RasterImage:
    """Single-channel raster, values in [0, 255], stored as float64 (h, w)."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {self.data.shape} != (height={self.height}, width={self.width})"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("raster contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 255.0:
            raise ValueError("raster values must lie in [0, 255]")

    def copy(self) -> "RasterImage":
        return RasterImage(self.width, self.height, self.data.copy())


def make_raster(data: np.ndarray) -> RasterImage:
    data = np.asarray(data, dtype=float)
    return RasterImage(width=data.shape[1], height=data.shape[0], data=data)


@dataclass(frozen=True)
class DetectorNoise:
    confidence_sigma: float = 0.05
    dropout_prob: float = 0.0
    false_positive_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.confidence_sigma < 0:
            raise ValueError("confidence_sigma must be >= 0")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ValueError("dropout_prob must be in [0, 1)")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be >= 0")


NO_NOISE = DetectorNoise(confidence_sigma=0.0, dropout_prob=0.0, false_positive_rate=0.0)

_BASE_CONFIDENCE = 0.95
_FALLOFF = 0.35


@dataclass
class ToyDetectorParams:
    """Logistic window scorer: confidence = sigmoid(<weights, patch/255> + bias)."""

    window: tuple[int, int]  # (height, width) in pixels
    weights: np.ndarray
    bias: float
    detect_threshold: float = DETECT_THRESHOLD

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        wh, ww = self.window
        if wh < 1 or ww < 1:
            raise ValueError("window must be at least 1x1")
        if self.weights.size != wh * ww:
            raise ValueError(
                f"weights length {self.weights.size} != window size {wh * ww}"
            )
        if not 0.0 < self.detect_threshold < 1.0:
            raise ValueError("detect_threshold must be in (0, 1)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "window": list(self.window),
                "weights": self.weights.tolist(),
                "bias": self.bias,
                "detect_threshold": self.detect_threshold,
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "ToyDetectorParams":
        doc = json.loads(text)
        return ToyDetectorParams(
            window=(int(doc["window"][0]), int(doc["window"][1])),
            weights=np.array(doc["weights"], dtype=float),
            bias=float(doc["bias"]),
            detect_threshold=float(doc["detect_threshold"]),
        )


def _sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def toy_optical_forward(image: RasterImage, params: ToyDetectorParams) -> np.ndarray:
    """Confidence map over non-overlapping windows (stride = window size)."""
    wh, ww = params.window
    if image.height < wh or image.width < ww:
        raise ImageSmallerThanWindow(
            f"image {image.height}x{image.width} smaller than window {wh}x{ww}"
        )
    rows = image.height // wh
    cols = image.width // ww
    cropped = image.data[: rows * wh, : cols * ww]
    patches = (
        cropped.reshape(rows, wh, cols, ww)
        .transpose(0, 2, 1, 3)
        .reshape(rows * cols, wh * ww)
    )
    logits = patches / 255.0 @ params.weights + params.bias
    return np.asarray(_sigmoid(logits)).reshape(rows, cols)


def toy_optical_gradient(
    image: RasterImage, params: ToyDetectorParams, target_window: tuple[int, int]
) -> np.ndarray:
    """Closed-form gradient of one window's confidence w.r.t. all pixels.

    The logistic scorer gives d conf / d pixel = c (1 - c) * w / 255 on the
    window's own pixels and exactly zero elsewhere.
    """
    conf_map = toy_optical_forward(image, params)
    row, col = target_window
    if not (0 <= row < conf_map.shape[0] and 0 <= col < conf_map.shape[1]):
        raise ValueError(f"target window {target_window} outside confidence map")
    c = conf_map[row, col]
    wh, ww = params.window
    grad = np.zeros_like(image.data)
    grad[row * wh : (row + 1) * wh, col * ww : (col + 1) * ww] = (
        c * (1.0 - c) * params.weights.reshape(wh, ww) / 255.0
    )
    return grad


def window_confidence(image: RasterImage, params: ToyDetectorParams,
                      target_window: tuple[int, int]) -> float:
    return float(toy_optical_forward(image, params)[target_window])


def train_toy_detector(
    dataset: Sequence[tuple[np.ndarray, float]],
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int = 0,
    init: ToyDetectorParams | None = None,
    window: tuple[int, int] = (16, 16),
) -> tuple[ToyDetectorParams, list[float]]:
    """Mini-batch gradient descent on mean binary cross-entropy.

    Dataset entries are (flattened window pixels in [0, 255], label in {0,1}).
    Returns the final parameters and the per-epoch loss history; epochs=0
    returns the initialization untouched.
    """
    if len(dataset) == 0:
        raise EmptyDataset("training dataset is empty")
    if init is None:
        init = ToyDetectorParams(
            window=window, weights=np.zeros(window[0] * window[1]), bias=0.0
        )
    X = np.stack([np.asarray(x, dtype=float).ravel() for x, _ in dataset]) / 255.0
    y = np.array([float(label) for _, label in dataset])
    if X.shape[1] != init.weights.size:
        raise ValueError("dataset window size does not match detector window")
    w = init.weights.copy()
    b = float(init.bias)
    rng = np.random.default_rng(seed)
    n = len(dataset)
    history: list[float] = []

    def mean_loss() -> float:
        p = np.clip(_sigmoid(X @ w + b), 1e-12, 1.0 - 1e-12)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))

    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            p = _sigmoid(X[idx] @ w + b)
            err = p - y[idx]
            w -= learning_rate * (X[idx].T @ err) / len(idx)
            b -= learning_rate * float(np.mean(err))
        history.append(mean_loss())
    params = ToyDetectorParams(
        window=init.window, weights=w, bias=b, detect_threshold=init.detect_threshold
    )
    return params, history


def detector_accuracy(params: ToyDetectorParams,
                      dataset: Sequence[tuple[np.ndarray, float]]) -> float:
    X = np.stack([np.asarray(x, dtype=float).ravel() for x, _ in dataset]) / 255.0
    y = np.array([float(label) for _, label in dataset])
    p = np.asarray(_sigmoid(X @ params.weights + params.bias))
    return float(np.mean((p >= 0.5) == (y >= 0.5)))


def make_window_dataset(
    n_positive: int,
    n_negative: int,
    window: tuple[int, int] = (16, 16),
    seed: int = 0,
    blob_amplitude: float = 100.0,
    noise_sigma: float = 5.0,
) -> list[tuple[np.ndarray, float]]:
    """Synthetic labeled windows: bright centered blob (1) vs background (0).

    The blob amplitude deliberately exceeds the patch attacker's pixel budget
    so a hardened model can reject attack patterns without surrendering the
    genuine signal.
    """
    rng = np.random.default_rng(seed)
    wh, ww = window
    yy, xx = np.mgrid[0:wh, 0:ww]
    blob = ((yy - wh / 2.0 + 0.5) ** 2 + (xx - ww / 2.0 + 0.5) ** 2) <= (min(wh, ww) / 3.2) ** 2
    data: list[tuple[np.ndarray, float]] = []
    for _ in range(n_positive):
        img = 128.0 + rng.normal(0.0, noise_sigma, size=(wh, ww))
        img[blob] += blob_amplitude
        data.append((np.clip(img, 0, 255).ravel(), 1.0))
    for _ in range(n_negative):
        img = 128.0 + rng.normal(0.0, noise_sigma, size=(wh, ww))
        data.append((np.clip(img, 0, 255).ravel(), 0.0))
    return data


def make_balanced_scorer(
    window: tuple[int, int] = (16, 16),
    weight_magnitude: float = 0.4,
    bias: float = -3.0,
    seed: int = 0,
) -> ToyDetectorParams:
    """Fixed random-sign scorer with exactly zero weight sum.

    Used as the stand-in chart-screen model: the zero sum makes the clean
    (flat background) confidence depend only on the bias.
    """
    rng = np.random.default_rng(seed)
    n = window[0] * window[1]
    if n % 2:
        raise ValueError("window pixel count must be even for a balanced scorer")
    signs = np.array([1.0] * (n // 2) + [-1.0] * (n // 2))
    rng.shuffle(signs)
    return ToyDetectorParams(window=window, weights=weight_magnitude * signs, bias=bias)


# ---------------------------------------------------------------------------
# Geometry-driven per-sensor detection simulation


def _visible_to(obj: GroundTruthObject, sensor: SensorKind, scenario: Scenario) -> bool:
    cfg = scenario.sensor_config
    if sensor is SensorKind.AIS:
        return obj.carries_ais
    if sensor is SensorKind.RADAR:
        return obj.radar_reflective and obj.distance_m <= cfg.radar_range_m
    return (
        obj.optically_visible
        and abs(obj.bearing_deg) <= cfg.camera_fov_deg / 2.0
        and obj.distance_m <= cfg.optical_range_m
    )


def _sensor_range(sensor: SensorKind, scenario: Scenario) -> float:
    if sensor is SensorKind.OPTICAL:
        return scenario.sensor_config.optical_range_m
    return scenario.sensor_config.radar_range_m


def _chart_bbox(center: tuple[float, float], half: float) -> BoundingBox:
    return BoundingBox(center[0] - half, center[1] - half, center[0] + half, center[1] + half)


def _optical_center(obj: GroundTruthObject, chart: ChartFrame) -> tuple[float, float]:
    cx, cy = chart.enu_to_px(*obj.position)
    hom = geometry.Homography(TRUE_CHART_TO_OPTICAL.copy())
    return geometry.project_xy(hom, (cx, cy))


def simulate_detections(
    scenario: Scenario,
    sensor: SensorKind,
    noise: DetectorNoise,
    seed: int,
) -> list[DetectionVector]:
    """Detections one sensor model would report for the scenario.

    Confidence is a base score minus a linear distance falloff plus Gaussian
    noise, clamped to [0, 1]; anything below the detection threshold is
    discarded. Genuine objects may drop out at ``dropout_prob``; spoofed
    objects always produce their matching-sensor detection (the attacker
    controls that signal). False positives arrive at a Poisson rate.
    """
    rng = np.random.default_rng(seed)
    chart = scenario.chart_frame
    cfg = scenario.sensor_config
    genuine_ids = {o.id for o in scenario.objects}
    raw: list[tuple[float, BoundingBox, ClassLabel, GroundTruthObject | None]] = []
    for obj in scenario.all_objects:
        # Draw per-object randomness unconditionally so one object's
        # visibility never shifts another object's noise stream.
        u_drop = rng.random()
        conf_noise = rng.normal(0.0, noise.confidence_sigma) if noise.confidence_sigma > 0 else 0.0
        if not _visible_to(obj, sensor, scenario):
            continue
        if obj.id in genuine_ids and noise.dropout_prob > 0 and u_drop < noise.dropout_prob:
            continue
        confidence = _BASE_CONFIDENCE - _FALLOFF * (obj.distance_m / _sensor_range(sensor, scenario))
        confidence = float(np.clip(confidence + conf_noise, 0.0, 1.0))
        if confidence < DETECT_THRESHOLD:
            continue
        if sensor is SensorKind.AIS:
            center = chart.enu_to_px(*obj.position)
            bbox = _chart_bbox(center, 1.0)
            label = ClassLabel.AIS_CONTACT
        elif sensor is SensorKind.RADAR:
            center = chart.enu_to_px(*obj.position)
            half = max(0.8, obj.length / chart.meters_per_px / 2.0)
            bbox = _chart_bbox(center, half)
            label = ClassLabel.RADAR_CONTACT
        else:
            center = _optical_center(obj, chart)
            half = float(np.clip(obj.length * 25.0 / max(obj.distance_m, 1.0), 1.0, 12.0))
            bbox = _chart_bbox(center, half)
            label = obj.class_label
        raw.append((confidence, bbox, label, obj))

    k_false = rng.poisson(noise.false_positive_rate) if noise.false_positive_rate > 0 else 0
    for _ in range(k_false):
        dist = rng.uniform(0.1, 0.9) * _sensor_range(sensor, scenario)
        bearing = (
            rng.uniform(-cfg.camera_fov_deg / 2, cfg.camera_fov_deg / 2)
            if sensor is SensorKind.OPTICAL
            else rng.uniform(-180.0, 180.0)
        )
        east = dist * math.sin(math.radians(bearing))
        north = dist * math.cos(math.radians(bearing))
        confidence = float(rng.uniform(DETECT_THRESHOLD, 0.6))
        if sensor is SensorKind.OPTICAL:
            fake = GroundTruthObject(
                id="fp", class_label=ClassLabel.BOAT, position=(east, north),
                length=5.0, width=2.0,
            )
            center = _optical_center(fake, chart)
        else:
            center = chart.enu_to_px(east, north)
        label = {
            SensorKind.AIS: ClassLabel.AIS_CONTACT,
            SensorKind.RADAR: ClassLabel.RADAR_CONTACT,
            SensorKind.OPTICAL: ClassLabel.BOAT,
        }[sensor]
        raw.append((confidence, _chart_bbox(center, 1.2), label, None))

    detections: list[DetectionVector] = []
    for index, (confidence, bbox, label, obj) in enumerate(raw):
        static = None
        blob = None
        if sensor is SensorKind.AIS and obj is not None:
            static = obj.ais_static
        if sensor is SensorKind.RADAR and obj is not None:
            if obj.radar_signature is not None:
                blob = obj.radar_signature
            else:
                major = max(obj.length, obj.width)
                minor = min(obj.length, obj.width)
                blob = RadarBlob(centroid=obj.position, extent_major=major,
                                 extent_minor=max(minor, 0.1))
        detections.append(
            DetectionVector(
                sensor=sensor,
                contact_index=index,
                confidence=confidence,
                bbox=bbox,
                class_label=label,
                ais_static=static,
                radar_blob=blob,
            )
        )
    return detections
