"""Core domain model: sensors, contacts, ground truth, and scenarios."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

# Simulated world constants. Positions are local ENU meters relative to
# own-ship; the chart display covers [-range, +range] in both axes.
CHART_SIZE_PX = 64
OPTICAL_FRAME_W = 128
OPTICAL_FRAME_H = 96
OPTICAL_RANGE_FACTOR = 1.5  # camera usable range relative to radar range
DETECT_THRESHOLD = 0.3

# Own-ship geographic origin for the flat-earth lat/lon <-> ENU conversion
# used at the AIS wire boundary.
OWN_SHIP_LAT = 50.33
OWN_SHIP_LON = -4.16
_M_PER_DEG_LAT = 60.0 * 1852.0

# Ground-truth camera calibration: maps chart pixels to optical-frame pixels
# with a mild perspective component. Calibration point pairs in scenario
# files are generated from this map, so homography estimation can recover it.
TRUE_CHART_TO_OPTICAL = np.array(
    [
        [1.90, 0.05, 2.0],
        [0.04, 1.45, 1.5],
        [2.0e-4, 1.0e-4, 1.0],
    ]
)


class SensorKind(enum.Enum):
    """The three fused sensor models; the value is the fixed model index."""

    AIS = 1
    RADAR = 2
    OPTICAL = 3

    @property
    def index(self) -> int:
        return self.value


class ClassLabel(enum.Enum):
    BOAT = "boat"
    TANKER = "tanker"
    BUOY = "buoy"
    AIS_CONTACT = "ais_contact"
    RADAR_CONTACT = "radar_contact"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box in the owning sensor's coordinate space."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"bounding box coordinates must be finite: {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate bounding box: {vals}")

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min


@dataclass(frozen=True)
class AisStaticData:
    """Static/voyage fields carried by an AIS contact."""

    mmsi: int
    ship_type: int
    dim_to_bow: int
    dim_to_stern: int
    dim_to_port: int
    dim_to_starboard: int

    def __post_init__(self) -> None:
        if not 0 <= self.mmsi < 10**9:
            raise ValueError(f"mmsi must be a 9-decimal-digit integer, got {self.mmsi}")
        for name in ("dim_to_bow", "dim_to_stern", "dim_to_port", "dim_to_starboard"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def reported_length(self) -> int:
        return self.dim_to_bow + self.dim_to_stern

    @property
    def reported_width(self) -> int:
        return self.dim_to_port + self.dim_to_starboard


@dataclass(frozen=True)
class RadarBlob:
    """Radar signature: centroid in ENU meters plus extent estimates."""

    centroid: tuple[float, float]
    extent_major: float
    extent_minor: float

    def __post_init__(self) -> None:
        if self.extent_major <= 0 or self.extent_minor <= 0:
            raise ValueError("radar extents must be positive")
        if self.extent_major < self.extent_minor:
            raise ValueError("extent_major must be >= extent_minor")


@dataclass(frozen=True)
class DetectionVector:
    """One detection's feature vector from one sensor model.

    ``ais_static`` is populated for AIS contacts whose wire message could be
    decoded; ``radar_blob`` for radar contacts with a measured signature.
    Both stay ``None`` for detections that arrive without that side channel
    (e.g. raster-induced false detections).
    """

    sensor: SensorKind
    contact_index: int
    confidence: float
    bbox: BoundingBox
    class_label: ClassLabel
    ais_static: AisStaticData | None = None
    radar_blob: RadarBlob | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.contact_index < 0:
            raise ValueError("contact_index must be non-negative")


@dataclass(frozen=True)
class GroundTruthObject:
    """Truth-side description of one object (genuine or injected).

    ``radar_signature`` overrides the physically derived radar extents; spoof
    generators use it to plant attacker-chosen blob sizes.
    """

    id: str
    class_label: ClassLabel
    position: tuple[float, float]  # ENU meters (east, north)
    length: float
    width: float
    carries_ais: bool = False
    ais_static: AisStaticData | None = None
    radar_reflective: bool = True
    optically_visible: bool = True
    radar_signature: RadarBlob | None = None

    def __post_init__(self) -> None:
        if self.length <= 0 or self.width <= 0:
            raise ValueError("object length and width must be positive")
        if self.carries_ais and self.ais_static is None:
            raise ValueError(f"object {self.id} carries AIS but has no static data")

    @property
    def distance_m(self) -> float:
        return math.hypot(self.position[0], self.position[1])

    @property
    def bearing_deg(self) -> float:
        """Bearing from own-ship, degrees clockwise from north."""
        return math.degrees(math.atan2(self.position[0], self.position[1]))


@dataclass(frozen=True)
class CalibrationPoint:
    chart: tuple[float, float]
    optical: tuple[float, float]


@dataclass(frozen=True)
class SensorConfig:
    radar_range_m: float = 1000.0
    camera_fov_deg: float = 90.0
    calibration_points: tuple[CalibrationPoint, ...] = ()

    def __post_init__(self) -> None:
        if self.radar_range_m <= 0:
            raise ValueError("radar_range_m must be positive")
        if not 0 < self.camera_fov_deg <= 360:
            raise ValueError("camera_fov_deg must be in (0, 360]")

    @property
    def optical_range_m(self) -> float:
        return OPTICAL_RANGE_FACTOR * self.radar_range_m


class ChartFrame:
    """Linear map between ENU meters and chart-display pixels (north up)."""

    def __init__(self, range_m: float, size_px: int = CHART_SIZE_PX):
        self.range_m = float(range_m)
        self.size_px = int(size_px)

    def enu_to_px(self, east: float, north: float) -> tuple[float, float]:
        half = self.size_px / 2.0
        scale = half / self.range_m
        return (half + east * scale, half - north * scale)

    def px_to_enu(self, x: float, y: float) -> tuple[float, float]:
        half = self.size_px / 2.0
        scale = self.range_m / half
        return ((x - half) * scale, (half - y) * scale)

    @property
    def meters_per_px(self) -> float:
        return 2.0 * self.range_m / self.size_px


@dataclass(frozen=True)
class Scenario:
    """Ground truth plus sensor configuration; the unit of every experiment."""

    seed: int
    objects: tuple[GroundTruthObject, ...]
    spoofed: tuple[GroundTruthObject, ...]
    sensor_config: SensorConfig

    @property
    def all_objects(self) -> tuple[GroundTruthObject, ...]:
        return self.objects + self.spoofed

    @property
    def truth_labels(self) -> dict[str, float]:
        labels = {obj.id: 1.0 for obj in self.objects}
        labels.update({obj.id: 0.0 for obj in self.spoofed})
        return labels

    @property
    def chart_frame(self) -> ChartFrame:
        return ChartFrame(self.sensor_config.radar_range_m)


def enu_from_latlon(lat: float, lon: float,
                    origin: tuple[float, float] = (OWN_SHIP_LAT, OWN_SHIP_LON)
                    ) -> tuple[float, float]:
    """Flat-earth conversion of geographic coordinates to ENU meters."""
    lat0, lon0 = origin
    east = (lon - lon0) * _M_PER_DEG_LAT * math.cos(math.radians(lat0))
    north = (lat - lat0) * _M_PER_DEG_LAT
    return (east, north)


def latlon_from_enu(east: float, north: float,
                    origin: tuple[float, float] = (OWN_SHIP_LAT, OWN_SHIP_LON)
                    ) -> tuple[float, float]:
    lat0, lon0 = origin
    lat = lat0 + north / _M_PER_DEG_LAT
    lon = lon0 + east / (_M_PER_DEG_LAT * math.cos(math.radians(lat0)))
    return (lat, lon)


def build_feature_vectors(
    raw_detections: Iterable[tuple[SensorKind, float, BoundingBox | tuple, ClassLabel]],
) -> list[DetectionVector]:
    """Pack raw detector output into feature vectors.

    Contact indices are assigned densely per sensor in input order. Rejects
    out-of-range confidences and degenerate boxes via the type validators.
    """
    counters: dict[SensorKind, int] = {kind: 0 for kind in SensorKind}
    out: list[DetectionVector] = []
    for sensor, confidence, bbox, class_label in raw_detections:
        if not isinstance(bbox, BoundingBox):
            bbox = BoundingBox(*bbox)
        out.append(
            DetectionVector(
                sensor=sensor,
                contact_index=counters[sensor],
                confidence=float(confidence),
                bbox=bbox,
                class_label=class_label,
            )
        )
        counters[sensor] += 1
    return out


def truth_vector(
    scenario: Scenario,
    detections: Sequence[DetectionVector],
    association: Mapping[DetectionVector, GroundTruthObject | None],
) -> list[float]:
    """Per-detection truth labels aligned index-for-index with ``detections``.

    A detection associated with a genuine object is true (1.0); one associated
    with a spoofed object, or with nothing at all, is false (0.0).
    """
    genuine_ids = {obj.id for obj in scenario.objects}
    labels: list[float] = []
    for det in detections:
        obj = association.get(det)
        labels.append(1.0 if obj is not None and obj.id in genuine_ids else 0.0)
    return labels


# ---------------------------------------------------------------------------
# Scenario generation


@dataclass(frozen=True)
class ScenarioGenConfig:
    """Knobs for the synthetic scenario generator."""

    n_objects_min: int = 2
    n_objects_max: int = 5
    boat_ais_fraction: float = 0.6
    beyond_radar_fraction: float = 0.15
    min_separation_m: float = 400.0

    def __post_init__(self) -> None:
        if self.n_objects_min < 0 or self.n_objects_max < self.n_objects_min:
            raise ValueError("invalid object count range")
        if not 0.0 <= self.boat_ais_fraction <= 1.0:
            raise ValueError("boat_ais_fraction must be in [0, 1]")
        if not 0.0 <= self.beyond_radar_fraction < 1.0:
            raise ValueError("beyond_radar_fraction must be in [0, 1)")


def make_ais_static_for(length: float, width: float, ship_type: int, mmsi: int) -> AisStaticData:
    bow = int(round(length / 2.0))
    stern = max(0, int(round(length)) - bow)
    port = int(round(width / 2.0))
    starboard = max(0, int(round(width)) - port)
    return AisStaticData(
        mmsi=mmsi,
        ship_type=ship_type,
        dim_to_bow=bow,
        dim_to_stern=stern,
        dim_to_port=port,
        dim_to_starboard=starboard,
    )


def default_calibration_points(n_grid: int = 3) -> tuple[CalibrationPoint, ...]:
    """Grid of chart/optical pairs generated by the true camera calibration."""
    points = []
    coords = np.linspace(4.0, CHART_SIZE_PX - 4.0, n_grid)
    for cy in coords:
        for cx in coords:
            p = TRUE_CHART_TO_OPTICAL @ np.array([cx, cy, 1.0])
            points.append(
                CalibrationPoint(chart=(float(cx), float(cy)),
                                 optical=(float(p[0] / p[2]), float(p[1] / p[2])))
            )
    return tuple(points)


def default_sensor_config(radar_range_m: float = 1000.0,
                          camera_fov_deg: float = 90.0) -> SensorConfig:
    return SensorConfig(
        radar_range_m=radar_range_m,
        camera_fov_deg=camera_fov_deg,
        calibration_points=default_calibration_points(),
    )


def _draw_position(rng: np.random.Generator, cfg: ScenarioGenConfig,
                   sensor_config: SensorConfig, beyond_radar: bool,
                   taken: list[tuple[float, float]]) -> tuple[float, float]:
    radar_range = sensor_config.radar_range_m
    half_fov = sensor_config.camera_fov_deg / 2.0
    for _ in range(500):
        if beyond_radar:
            # Must stay optically visible, so keep it inside the camera cone.
            dist = radar_range * rng.uniform(1.05, 1.4)
            bearing = rng.uniform(-0.9 * half_fov, 0.9 * half_fov)
        else:
            dist = radar_range * rng.uniform(0.15, 0.9)
            bearing = rng.uniform(-180.0, 180.0)
        east = dist * math.sin(math.radians(bearing))
        north = dist * math.cos(math.radians(bearing))
        if all(math.hypot(east - e, north - n) >= cfg.min_separation_m for e, n in taken):
            return (east, north)
    raise RuntimeError("could not place object with required separation")


def generate_scenario(seed: int,
                      gen_cfg: ScenarioGenConfig | None = None,
                      sensor_config: SensorConfig | None = None) -> Scenario:
    """Seeded synthetic scenario; identical seeds yield identical scenarios."""
    gen_cfg = gen_cfg or ScenarioGenConfig()
    sensor_config = sensor_config or default_sensor_config()
    rng = np.random.default_rng(seed)
    n = int(rng.integers(gen_cfg.n_objects_min, gen_cfg.n_objects_max + 1))
    taken: list[tuple[float, float]] = []
    objects: list[GroundTruthObject] = []
    for i in range(n):
        beyond = bool(rng.random() < gen_cfg.beyond_radar_fraction)
        position = _draw_position(rng, gen_cfg, sensor_config, beyond, taken)
        taken.append(position)
        kind_draw = rng.random()
        if kind_draw < 0.2:
            class_label = ClassLabel.TANKER
            length = float(rng.uniform(150.0, 300.0))
            width = length * 0.15
            carries_ais = True
            ship_type = 80
        elif kind_draw < 0.8:
            class_label = ClassLabel.BOAT
            length = float(rng.uniform(6.0, 30.0))
            width = length * 0.3
            carries_ais = bool(rng.random() < gen_cfg.boat_ais_fraction)
            ship_type = 37
        else:
            class_label = ClassLabel.BUOY
            length = float(rng.uniform(1.5, 4.0))
            width = length
            carries_ais = False
            ship_type = 0
        static = None
        if carries_ais:
            mmsi = int(rng.integers(200_000_000, 800_000_000))
            static = make_ais_static_for(length, width, ship_type, mmsi)
        objects.append(
            GroundTruthObject(
                id=f"obj-{i}",
                class_label=class_label,
                position=position,
                length=length,
                width=width,
                carries_ais=carries_ais,
                ais_static=static,
                radar_reflective=True,
                optically_visible=True,
            )
        )
    return Scenario(
        seed=int(seed),
        objects=tuple(objects),
        spoofed=(),
        sensor_config=sensor_config,
    )


# ---------------------------------------------------------------------------
# Scenario file format (JSON, UTF-8)


def _object_to_dict(obj: GroundTruthObject) -> dict:
    d: dict = {
        "id": obj.id,
        "class": obj.class_label.value,
        "position": [obj.position[0], obj.position[1]],
        "length": obj.length,
        "width": obj.width,
        "carries_ais": obj.carries_ais,
        "radar_reflective": obj.radar_reflective,
        "optically_visible": obj.optically_visible,
    }
    if obj.ais_static is not None:
        s = obj.ais_static
        d["ais_static"] = {
            "mmsi": s.mmsi,
            "ship_type": s.ship_type,
            "dim_to_bow": s.dim_to_bow,
            "dim_to_stern": s.dim_to_stern,
            "dim_to_port": s.dim_to_port,
            "dim_to_starboard": s.dim_to_starboard,
        }
    if obj.radar_signature is not None:
        b = obj.radar_signature
        d["radar_signature"] = {
            "centroid": [b.centroid[0], b.centroid[1]],
            "extent_major": b.extent_major,
            "extent_minor": b.extent_minor,
        }
    return d


def _object_from_dict(d: Mapping) -> GroundTruthObject:
    static = None
    if d.get("ais_static") is not None:
        s = d["ais_static"]
        static = AisStaticData(
            mmsi=int(s["mmsi"]),
            ship_type=int(s["ship_type"]),
            dim_to_bow=int(s["dim_to_bow"]),
            dim_to_stern=int(s["dim_to_stern"]),
            dim_to_port=int(s["dim_to_port"]),
            dim_to_starboard=int(s["dim_to_starboard"]),
        )
    signature = None
    if d.get("radar_signature") is not None:
        b = d["radar_signature"]
        signature = RadarBlob(
            centroid=(float(b["centroid"][0]), float(b["centroid"][1])),
            extent_major=float(b["extent_major"]),
            extent_minor=float(b["extent_minor"]),
        )
    return GroundTruthObject(
        id=str(d["id"]),
        class_label=ClassLabel(d["class"]),
        position=(float(d["position"][0]), float(d["position"][1])),
        length=float(d["length"]),
        width=float(d["width"]),
        carries_ais=bool(d["carries_ais"]),
        ais_static=static,
        radar_reflective=bool(d.get("radar_reflective", True)),
        optically_visible=bool(d.get("optically_visible", True)),
        radar_signature=signature,
    )


def scenario_to_json(scenario: Scenario) -> str:
    doc = {
        "seed": scenario.seed,
        "objects": [_object_to_dict(o) for o in scenario.objects],
        "spoofed": [_object_to_dict(o) for o in scenario.spoofed],
        "sensor_config": {
            "radar_range_m": scenario.sensor_config.radar_range_m,
            "camera_fov_deg": scenario.sensor_config.camera_fov_deg,
            "calibration_points": [
                {"chart": list(p.chart), "optical": list(p.optical)}
                for p in scenario.sensor_config.calibration_points
            ],
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    sc = doc["sensor_config"]
    config = SensorConfig(
        radar_range_m=float(sc["radar_range_m"]),
        camera_fov_deg=float(sc["camera_fov_deg"]),
        calibration_points=tuple(
            CalibrationPoint(
                chart=(float(p["chart"][0]), float(p["chart"][1])),
                optical=(float(p["optical"][0]), float(p["optical"][1])),
            )
            for p in sc["calibration_points"]
        ),
    )
    return Scenario(
        seed=int(doc["seed"]),
        objects=tuple(_object_from_dict(o) for o in doc["objects"]),
        spoofed=tuple(_object_from_dict(o) for o in doc["spoofed"]),
        sensor_config=config,
    )
