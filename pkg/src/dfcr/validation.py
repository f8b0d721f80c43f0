"""Defensive validation components.

Three checks feed the confidence pipeline: cross-sensor association
(multisensor validation), position agreement, and metadata consistency via a
linear SVM over matched-contact features.

Indicator convention throughout: +1 passed, -1 failed, 0 not applicable.
A component is "not applicable" only when the data it needs is missing and no
sensor was expected to supply it; a silent sensor that should have seen the
contact is itself a failure.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import geometry
from .core import ChartFrame, DetectionVector, SensorKind
from .geometry import GaussianGate, Homography


class SingleClassTraining(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


METADATA_FEATURES = (
    "ais_reported_length_m",
    "ais_reported_width_m",
    "radar_extent_major_m",
    "radar_extent_minor_m",
    "length_extent_gap_m",
    "class_agreement",
)


@dataclass
class MatchRecord:
    """Detections judged to be the same physical contact, one per sensor."""

    members: list[DetectionVector]
    projected_positions: list[tuple[float, float]]
    position_score: float

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a match record needs at least one member")
        sensors = [m.sensor for m in self.members]
        if len(set(sensors)) != len(sensors):
            raise ValueError("a match record may hold at most one member per sensor")
        if not 0.0 < self.position_score <= 1.0:
            raise ValueError("position_score must be in (0, 1]")

    def member_for(self, sensor: SensorKind) -> DetectionVector | None:
        for m in self.members:
            if m.sensor is sensor:
                return m
        return None

    @property
    def sensors(self) -> set[SensorKind]:
        return {m.sensor for m in self.members}


@dataclass(frozen=True)
class SensorExpectations:
    """What each sensor should plausibly see, given the platform geometry."""

    radar_range_m: float
    camera_fov_deg: float
    optical_range_m: float
    chart_frame: ChartFrame

    def expected_sensors(self, east: float, north: float) -> set[SensorKind]:
        dist = math.hypot(east, north)
        bearing = math.degrees(math.atan2(east, north))
        expected: set[SensorKind] = set()
        if dist <= self.radar_range_m:
            expected.add(SensorKind.RADAR)
        if abs(bearing) <= self.camera_fov_deg / 2.0 and dist <= self.optical_range_m:
            expected.add(SensorKind.OPTICAL)
        # AIS is never *expected*: plenty of genuine objects carry no
        # transponder, so its absence alone proves nothing.
        return expected


def shared_frame_position(det: DetectionVector, hom: Homography) -> tuple[float, float]:
    """Detection center mapped into the shared (optical) frame."""
    if det.sensor is SensorKind.OPTICAL:
        return det.bbox.center
    return geometry.project_xy(hom, det.bbox.center)


def record_chart_position(record: MatchRecord, hom: Homography) -> tuple[float, float]:
    """Representative chart-space position of a record.

    Chart-native members are trusted directly; optical-only records are
    back-projected through the calibrated homography.
    """
    chart_points = [
        m.bbox.center for m in record.members if m.sensor is not SensorKind.OPTICAL
    ]
    if not chart_points:
        inv = hom.inverse()
        chart_points = [
            geometry.project_xy(inv, m.bbox.center) for m in record.members
        ]
    xs = [p[0] for p in chart_points]
    ys = [p[1] for p in chart_points]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def associate_contacts(
    detections: Sequence[DetectionVector],
    hom: Homography,
    gate: GaussianGate,
) -> list[MatchRecord]:
    """Greedy best-first cross-sensor association.

    All cross-sensor pairs scoring at or above the gate threshold are
    processed in descending likelihood order (ties broken by contact index);
    two clusters merge when their sensor sets are disjoint and every
    cross-member pair is itself gated. Unmatched detections become singleton
    records. Each detection ends up in exactly one record.
    """
    positions = [shared_frame_position(d, hom) for d in detections]
    n = len(detections)
    likelihood = {}
    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            if detections[i].sensor is detections[j].sensor:
                continue
            score = geometry.position_likelihood(positions[i], positions[j], gate)
            likelihood[(i, j)] = score
            if score >= gate.accept_threshold:
                pairs.append((score, i, j))
    pairs.sort(key=lambda t: (-t[0], detections[t[1]].contact_index,
                              detections[t[2]].contact_index, t[1], t[2]))

    cluster_of = list(range(n))
    clusters: dict[int, list[int]] = {i: [i] for i in range(n)}

    def gated(a: int, b: int) -> bool:
        key = (a, b) if a < b else (b, a)
        return likelihood.get(key, 0.0) >= gate.accept_threshold

    for _, i, j in pairs:
        ci, cj = cluster_of[i], cluster_of[j]
        if ci == cj:
            continue
        sensors_i = {detections[k].sensor for k in clusters[ci]}
        sensors_j = {detections[k].sensor for k in clusters[cj]}
        if sensors_i & sensors_j:
            continue
        if not all(gated(a, b) for a in clusters[ci] for b in clusters[cj]):
            continue
        clusters[ci].extend(clusters[cj])
        for k in clusters[cj]:
            cluster_of[k] = ci
        del clusters[cj]

    records: list[MatchRecord] = []
    for root in sorted(clusters, key=lambda r: min(clusters[r])):
        idxs = sorted(clusters[root])
        members = [detections[k] for k in idxs]
        projected = [positions[k] for k in idxs]
        if len(idxs) == 1:
            score = 1.0
        else:
            score = min(
                likelihood[(a, b)] for a, b in itertools.combinations(idxs, 2)
                if (a, b) in likelihood
            )
        records.append(MatchRecord(members=members, projected_positions=projected,
                                   position_score=score))
    return records


def multisensor_pass(
    record: MatchRecord,
    expectations: SensorExpectations,
    hom: Homography,
) -> list[int]:
    """Component 1 indicator per member.

    A member passes when another sensor corroborates the contact. A lone
    member fails if some other sensor should plausibly have seen the contact
    and reported nothing; with no corroboration expected it passes.
    """
    east, north = expectations.chart_frame.px_to_enu(
        *record_chart_position(record, hom)
    )
    expected = expectations.expected_sensors(east, north)
    out = []
    for member in record.members:
        if len(record.members) >= 2:
            out.append(+1)
        elif expected - {member.sensor}:
            out.append(-1)
        else:
            out.append(+1)
    return out


def position_pass(record: MatchRecord, gate: GaussianGate) -> list[int]:
    """Component 2 indicator per member; requires at least two members.

    Passes only when every cross-member pair agrees positionally at or above
    the gate threshold.
    """
    if len(record.members) < 2:
        raise ValueError("position validation needs a record with >= 2 members")
    ok = all(
        geometry.position_likelihood(a, b, gate) >= gate.accept_threshold
        for a, b in itertools.combinations(record.projected_positions, 2)
    )
    return [+1 if ok else -1 for _ in record.members]


# ---------------------------------------------------------------------------
# Metadata validation (SVM over matched-contact features)


def _size_category(length_m: float) -> str:
    if length_m > 100.0:
        return "large"
    if length_m > 5.0:
        return "small"
    return "minor"


def metadata_features(ais: DetectionVector, radar: DetectionVector) -> np.ndarray:
    """Feature row for one matched AIS+radar contact (fixed column order)."""
    static = ais.ais_static
    blob = radar.radar_blob
    if static is None or blob is None:
        raise ValueError("metadata features need AIS static data and a radar blob")
    length = float(static.reported_length)
    width = float(static.reported_width)
    agree = 1.0 if _size_category(length) == _size_category(blob.extent_major) else 0.0
    return np.array(
        [length, width, blob.extent_major, blob.extent_minor,
         abs(length - blob.extent_major), agree]
    )


@dataclass
class MetadataMatrix:
    """One raw feature row per applicable record; inapplicable rows flagged."""

    rows: np.ndarray  # (n_applicable, n_features)
    record_indices: list[int]
    not_applicable: list[int]

    @property
    def n_features(self) -> int:
        return len(METADATA_FEATURES)


def build_metadata_matrix(records: Sequence[MatchRecord]) -> MetadataMatrix:
    rows = []
    applicable = []
    not_applicable = []
    for idx, record in enumerate(records):
        ais = record.member_for(SensorKind.AIS)
        radar = record.member_for(SensorKind.RADAR)
        if (
            ais is not None and radar is not None
            and ais.ais_static is not None and radar.radar_blob is not None
        ):
            rows.append(metadata_features(ais, radar))
            applicable.append(idx)
        else:
            not_applicable.append(idx)
    matrix = np.array(rows) if rows else np.zeros((0, len(METADATA_FEATURES)))
    return MetadataMatrix(rows=matrix, record_indices=applicable,
                          not_applicable=not_applicable)


@dataclass
class SvmModel:
    """Linear decision rule sign(w.x + b) over standardized features."""

    weights: np.ndarray
    bias: float
    regularization: float
    feature_means: np.ndarray
    feature_scales: np.ndarray

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        self.feature_means = np.asarray(self.feature_means, dtype=float)
        self.feature_scales = np.asarray(self.feature_scales, dtype=float)
        if self.regularization <= 0:
            raise ValueError("regularization must be positive")
        if self.weights.shape != self.feature_means.shape or (
            self.weights.shape != self.feature_scales.shape
        ):
            raise ValueError("weights and standardization vectors must align")

    def standardize(self, row: np.ndarray) -> np.ndarray:
        row = np.asarray(row, dtype=float)
        if row.shape != self.weights.shape:
            raise DimensionMismatch(
                f"row has {row.shape} features, model expects {self.weights.shape}"
            )
        return (row - self.feature_means) / self.feature_scales

    def to_json(self) -> str:
        return json.dumps(
            {
                "weights": self.weights.tolist(),
                "bias": self.bias,
                "regularization": self.regularization,
                "feature_means": self.feature_means.tolist(),
                "feature_scales": self.feature_scales.tolist(),
            },
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "SvmModel":
        doc = json.loads(text)
        return SvmModel(
            weights=np.array(doc["weights"]),
            bias=float(doc["bias"]),
            regularization=float(doc["regularization"]),
            feature_means=np.array(doc["feature_means"]),
            feature_scales=np.array(doc["feature_scales"]),
        )


def svm_objective(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray,
                  C: float) -> float:
    """Primal hinge objective 0.5 ||w||^2 + C sum max(0, 1 - y (w.x + b))."""
    margins = 1.0 - y * (X @ weights + bias)
    return 0.5 * float(weights @ weights) + C * float(np.clip(margins, 0.0, None).sum())


def train_svm(
    rows: np.ndarray,
    labels: Sequence[float],
    C: float = 1.0,
    epochs: int = 2000,
    seed: int = 0,
    batch_size: int = 16,
) -> tuple[SvmModel, list[float]]:
    """Primal subgradient descent with the 1/(lambda t) step schedule.

    Features are standardized internally and the standardization is stored on
    the model. The returned model is the best iterate seen (objective
    evaluated once per epoch), alongside the per-epoch objective history.
    """
    X = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("rows and labels must align")
    if C <= 0:
        raise ValueError("C must be positive")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassTraining("training needs both classes present")

    means = X.mean(axis=0)
    scales = X.std(axis=0)
    scales[scales < 1e-9] = 1.0
    Xs = (X - means) / scales

    n = X.shape[0]
    lam = 1.0 / (C * n)
    w = np.zeros(X.shape[1])
    b = 0.0
    best_w, best_b = w.copy(), b
    best_obj = svm_objective(w, b, Xs, y, C)
    history = [best_obj]
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            t += 1
            idx = order[start : start + batch_size]
            eta = 1.0 / (lam * t)
            margins = y[idx] * (Xs[idx] @ w + b)
            viol = margins < 1.0
            # Subgradient of the scaled objective lam/2 ||w||^2 + mean hinge.
            grad_w = lam * w
            grad_b = 0.0
            if np.any(viol):
                grad_w = grad_w - (y[idx][viol, None] * Xs[idx][viol]).sum(axis=0) / len(idx)
                grad_b = -float(y[idx][viol].sum()) / len(idx)
            w = w - eta * grad_w
            b = b - eta * grad_b
        obj = svm_objective(w, b, Xs, y, C)
        history.append(obj)
        if obj < best_obj:
            best_obj = obj
            best_w, best_b = w.copy(), b
    model = SvmModel(
        weights=best_w,
        bias=best_b,
        regularization=C,
        feature_means=means,
        feature_scales=scales,
    )
    return model, history


def svm_decide(model: SvmModel, row: np.ndarray) -> int:
    """Sign of w.x + b for a standardized row; the 0 tie resolves to +1."""
    row = np.asarray(row, dtype=float)
    if row.shape != model.weights.shape:
        raise DimensionMismatch(
            f"row has {row.shape} features, model expects {model.weights.shape}"
        )
    return 1 if float(model.weights @ row + model.bias) >= 0.0 else -1


def metadata_pass(record: MatchRecord, model: SvmModel) -> list[int]:
    """Component 3 indicator per member.

    Applicable when both an AIS and a radar member are present: the SVM
    verdict on the matched metadata applies to every member. An AIS member
    whose static block is missing fails outright (the protocol always
    carries one, so its absence is itself an anomaly). Otherwise the check
    is not applicable and yields 0.
    """
    ais = record.member_for(SensorKind.AIS)
    radar = record.member_for(SensorKind.RADAR)
    if ais is not None and radar is not None:
        if ais.ais_static is None or radar.radar_blob is None:
            return [-1 for _ in record.members]
        verdict = svm_decide(model, model.standardize(metadata_features(ais, radar)))
        return [verdict for _ in record.members]
    return [0 for _ in record.members]


def make_metadata_training_set(
    n_genuine: int = 120,
    n_anomalous: int = 120,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded synthetic training set for the metadata SVM.

    Genuine pairs: radar extent tracks the AIS-reported length within a
    0.8-1.2 ratio band. Anomalous pairs: a large AIS claim over a small
    physical return (or the reverse), leaving a wide margin between classes.
    """
    rng = np.random.default_rng(seed)
    rows = []
    labels = []
    for _ in range(n_genuine):
        length = rng.uniform(5.0, 280.0)
        width = length * rng.uniform(0.12, 0.35)
        major = length * rng.uniform(0.8, 1.2)
        minor = width * rng.uniform(0.8, 1.2)
        agree = 1.0 if _size_category(length) == _size_category(major) else 0.0
        rows.append([length, width, major, minor, abs(length - major), agree])
        labels.append(+1.0)
    for _ in range(n_anomalous):
        if rng.random() < 0.5:
            length = rng.uniform(150.0, 300.0)  # claims a ship
            major = rng.uniform(2.0, 30.0)  # returns a buoy-ish blob
        else:
            length = rng.uniform(2.0, 30.0)
            major = rng.uniform(150.0, 300.0)
        width = length * rng.uniform(0.12, 0.35)
        minor = min(major, width * rng.uniform(0.5, 2.0) + 0.5)
        agree = 1.0 if _size_category(length) == _size_category(major) else 0.0
        rows.append([length, width, major, max(minor, 0.1), abs(length - major), agree])
        labels.append(-1.0)
    return np.array(rows), np.array(labels)


def train_default_metadata_model(seed: int = 0, C: float = 1.0) -> SvmModel:
    rows, labels = make_metadata_training_set(seed=seed)
    model, _ = train_svm(rows, labels, C=C, seed=seed)
    return model
