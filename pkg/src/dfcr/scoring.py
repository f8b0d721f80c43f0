"""Security-inclusive confidence scoring.

Each contact's detector confidence is adjusted sequentially by the three
validation components. Component k adds delta_k * s_k, where s_k is the
passing indicator (+1 pass, -1 fail, 0 not applicable), and the score is
clamped back into [0, 1] after every step. Scores annotate contacts; nothing
is ever dropped or blocked.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .core import DetectionVector
from .geometry import GaussianGate, Homography
from .validation import (
    MatchRecord,
    SensorExpectations,
    SvmModel,
    associate_contacts,
    metadata_pass,
    multisensor_pass,
    position_pass,
    record_chart_position,
)

DEFAULT_DELTAS = (0.4, 0.3, 0.3)


@dataclass(frozen=True)
class DeltaConfig:
    """Fixed per-component adjustment magnitudes (all positive).

    The defaults sum to 1.0 so a contact that fails every applicable check
    is driven to exactly zero regardless of its initial confidence.
    """

    delta: tuple[float, float, float] = DEFAULT_DELTAS

    def __post_init__(self) -> None:
        if len(self.delta) != 3 or any(d <= 0 for d in self.delta):
            raise ValueError(f"deltas must be 3 positive reals, got {self.delta}")


@dataclass(frozen=True)
class ConfidenceTrace:
    """Audit record of one contact's confidence through the pipeline."""

    initial: float
    indicators: tuple[int, int, int]
    per_step: tuple[float, float, float]
    final: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.initial <= 1.0:
            raise ValueError("initial confidence must be in [0, 1]")
        if any(s not in (-1, 0, 1) for s in self.indicators):
            raise ValueError(f"indicators must be in {{-1, 0, +1}}: {self.indicators}")
        if any(not 0.0 <= c <= 1.0 for c in self.per_step):
            raise ValueError("per-step confidences must stay in [0, 1]")
        if self.final != self.per_step[2]:
            raise ValueError("final must equal the last per-step value")


def _clamp(value: float) -> float:
    return min(max(value, 0.0), 1.0)


def adjust_confidence(
    initial: float,
    indicators: Sequence[int],
    deltas: DeltaConfig = DeltaConfig(),
) -> ConfidenceTrace:
    """Sequential adjustment with a clamp after every component step."""
    if len(indicators) != 3:
        raise ValueError("exactly three component indicators required")
    c = float(initial)
    steps: list[float] = []
    for k in range(3):
        c = _clamp(c + deltas.delta[k] * indicators[k])
        steps.append(c)
    return ConfidenceTrace(
        initial=float(initial),
        indicators=tuple(int(s) for s in indicators),
        per_step=(steps[0], steps[1], steps[2]),
        final=steps[2],
    )


def component_indicators(
    records: Sequence[MatchRecord],
    gate: GaussianGate,
    svm: SvmModel,
    expectations: SensorExpectations,
    hom: Homography,
) -> dict[DetectionVector, tuple[int, int, int]]:
    """Indicator triple for every detection across the three components.

    Position validation needs a second member to compare against; for a
    singleton record it fails when corroboration was expected (the missing
    pair is the anomaly) and is not applicable otherwise. Metadata follows
    the same expectation rule when the AIS+radar pairing is absent: a
    contact lacking signatures it should physically produce fails, one with
    no expected pairing is simply not checkable.
    """
    out: dict[DetectionVector, tuple[int, int, int]] = {}
    for record in records:
        east, north = expectations.chart_frame.px_to_enu(
            *record_chart_position(record, hom)
        )
        missing_expected = expectations.expected_sensors(east, north) - record.sensors
        s1 = multisensor_pass(record, expectations, hom)
        if len(record.members) >= 2:
            s2 = position_pass(record, gate)
        else:
            s2 = [-1 if missing_expected else 0 for _ in record.members]
        s3 = metadata_pass(record, svm)
        if all(v == 0 for v in s3):
            s3 = [-1 if missing_expected else 0 for _ in record.members]
        for member, a, b, c in zip(record.members, s1, s2, s3):
            out[member] = (a, b, c)
    return out


def run_pipeline(
    detections: Sequence[DetectionVector],
    homography: Homography,
    gate: GaussianGate,
    svm: SvmModel,
    deltas: DeltaConfig,
    expectations: SensorExpectations,
) -> tuple[list[ConfidenceTrace], list[MatchRecord]]:
    """Full scoring pass: association, three validations, adjustment.

    Returns one trace per detection (aligned with the input order) plus the
    match records for audit.
    """
    if not detections:
        return [], []
    records = associate_contacts(detections, homography, gate)
    indicators = component_indicators(records, gate, svm, expectations, homography)
    traces = [
        adjust_confidence(det.confidence, indicators[det], deltas)
        for det in detections
    ]
    return traces, records
