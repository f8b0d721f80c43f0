import itertools
import math

import numpy as np
import pytest

from dfcr.core import (
    AisStaticData,
    BoundingBox,
    ChartFrame,
    ClassLabel,
    DetectionVector,
    RadarBlob,
    SensorKind,
    TRUE_CHART_TO_OPTICAL,
)
from dfcr.geometry import Homography, default_gate, position_likelihood
from dfcr.validation import (
    DimensionMismatch,
    METADATA_FEATURES,
    MatchRecord,
    SensorExpectations,
    SingleClassTraining,
    SvmModel,
    associate_contacts,
    build_metadata_matrix,
    make_metadata_training_set,
    metadata_pass,
    multisensor_pass,
    position_pass,
    svm_decide,
    svm_objective,
    train_default_metadata_model,
    train_svm,
)

HOM = Homography(TRUE_CHART_TO_OPTICAL.copy())
GATE = default_gate()
EXPECTATIONS = SensorExpectations(
    radar_range_m=1000.0,
    camera_fov_deg=90.0,
    optical_range_m=1500.0,
    chart_frame=ChartFrame(1000.0),
)
CHART = EXPECTATIONS.chart_frame


def detection(sensor, index, chart_pos=None, optical_pos=None, confidence=0.8,
              static=None, blob=None, label=None):
    if sensor is SensorKind.OPTICAL:
        cx, cy = optical_pos
    else:
        cx, cy = chart_pos
    if label is None:
        label = {
            SensorKind.AIS: ClassLabel.AIS_CONTACT,
            SensorKind.RADAR: ClassLabel.RADAR_CONTACT,
            SensorKind.OPTICAL: ClassLabel.BOAT,
        }[sensor]
    return DetectionVector(
        sensor=sensor,
        contact_index=index,
        confidence=confidence,
        bbox=BoundingBox(cx - 1, cy - 1, cx + 1, cy + 1),
        class_label=label,
        ais_static=static,
        radar_blob=blob,
    )


def optical_of(chart_pos):
    p = TRUE_CHART_TO_OPTICAL @ np.array([chart_pos[0], chart_pos[1], 1.0])
    return (p[0] / p[2], p[1] / p[2])


def tanker_static(length=250, width=40, mmsi=235000001):
    bow = length // 2
    return AisStaticData(mmsi=mmsi, ship_type=80, dim_to_bow=bow,
                         dim_to_stern=length - bow, dim_to_port=width // 2,
                         dim_to_starboard=width - width // 2)


class TestAssociation:
    def test_coincident_ais_radar_pair(self):
        pos = CHART.enu_to_px(200.0, 300.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=pos),
            detection(SensorKind.RADAR, 0, chart_pos=pos),
        ]
        records = associate_contacts(dets, HOM, GATE)
        assert len(records) == 1
        assert records[0].sensors == {SensorKind.AIS, SensorKind.RADAR}
        assert records[0].position_score == pytest.approx(1.0)

    def test_lone_spoofed_ais_stays_singleton(self):
        far_a = CHART.enu_to_px(-600.0, -600.0)
        far_b = CHART.enu_to_px(600.0, 500.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=far_a),
            detection(SensorKind.RADAR, 0, chart_pos=far_b),
        ]
        records = associate_contacts(dets, HOM, GATE)
        assert len(records) == 2
        assert all(len(r.members) == 1 for r in records)

    def test_three_sensor_merge(self):
        pos = CHART.enu_to_px(100.0, 400.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=pos),
            detection(SensorKind.RADAR, 0, chart_pos=pos),
            detection(SensorKind.OPTICAL, 0, optical_pos=optical_of(pos)),
        ]
        records = associate_contacts(dets, HOM, GATE)
        assert len(records) == 1
        assert len(records[0].members) == 3

    def test_greedy_matches_bruteforce_on_small_instances(self):
        # Two well-separated clusters of cross-sensor contacts plus one
        # straggler; enumerate every valid association hypothesis and check
        # greedy lands on the total-likelihood maximizer.
        pos1 = CHART.enu_to_px(150.0, 350.0)
        pos2 = CHART.enu_to_px(-500.0, -200.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=pos1),
            detection(SensorKind.RADAR, 0, chart_pos=pos1),
            detection(SensorKind.RADAR, 1, chart_pos=pos2),
            detection(SensorKind.OPTICAL, 0, optical_pos=optical_of(pos2)),
        ]
        records = associate_contacts(dets, HOM, GATE)
        greedy = {frozenset(id(m) for m in r.members) for r in records}

        positions = [
            d.bbox.center if d.sensor is not SensorKind.OPTICAL else d.bbox.center
            for d in dets
        ]
        shared = []
        for d in dets:
            if d.sensor is SensorKind.OPTICAL:
                shared.append(d.bbox.center)
            else:
                p = TRUE_CHART_TO_OPTICAL @ np.array([*d.bbox.center, 1.0])
                shared.append((p[0] / p[2], p[1] / p[2]))

        def valid(block):
            sensors = [dets[i].sensor for i in block]
            if len(set(sensors)) != len(sensors):
                return False
            return all(
                position_likelihood(shared[a], shared[b], GATE) >= GATE.accept_threshold
                for a, b in itertools.combinations(block, 2)
            )

        def partitions(items):
            if not items:
                yield []
                return
            first, rest = items[0], items[1:]
            for sub in partitions(rest):
                yield [[first]] + sub
                for i, block in enumerate(sub):
                    yield sub[:i] + [[first] + block] + sub[i + 1 :]

        def score(partition):
            total = 0.0
            for block in partition:
                for a, b in itertools.combinations(block, 2):
                    total += position_likelihood(shared[a], shared[b], GATE)
            return total

        best = max(
            (p for p in partitions(list(range(4))) if all(valid(b) for b in p)),
            key=score,
        )
        oracle = {frozenset(id(dets[i]) for i in block) for block in best}
        assert greedy == oracle

    def test_partition_property(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            dets = []
            for k in range(int(rng.integers(1, 9))):
                sensor = list(SensorKind)[int(rng.integers(0, 3))]
                pos = (float(rng.uniform(5, 60)), float(rng.uniform(5, 60)))
                if sensor is SensorKind.OPTICAL:
                    dets.append(detection(sensor, k, optical_pos=optical_of(pos)))
                else:
                    dets.append(detection(sensor, k, chart_pos=pos))
            records = associate_contacts(dets, HOM, GATE)
            seen = [m for r in records for m in r.members]
            assert len(seen) == len(dets)
            assert {id(m) for m in seen} == {id(d) for d in dets}


class TestMultisensorPass:
    def test_fully_matched_record_all_pass(self):
        pos = CHART.enu_to_px(100.0, 400.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=pos),
            detection(SensorKind.RADAR, 0, chart_pos=pos),
            detection(SensorKind.OPTICAL, 0, optical_pos=optical_of(pos)),
        ]
        record = associate_contacts(dets, HOM, GATE)[0]
        assert multisensor_pass(record, EXPECTATIONS, HOM) == [1, 1, 1]

    def test_lone_ais_in_radar_range_fails(self):
        pos = CHART.enu_to_px(-300.0, -300.0)  # in range, out of FOV
        record = associate_contacts([detection(SensorKind.AIS, 0, chart_pos=pos)],
                                    HOM, GATE)[0]
        assert multisensor_pass(record, EXPECTATIONS, HOM) == [-1]

    def test_lone_optical_beyond_radar_range_passes(self):
        east, north = 100.0, 1200.0  # beyond radar, inside FOV and camera range
        opt = optical_of(CHART.enu_to_px(east, north))
        record = associate_contacts(
            [detection(SensorKind.OPTICAL, 0, optical_pos=opt)], HOM, GATE
        )[0]
        assert multisensor_pass(record, EXPECTATIONS, HOM) == [1]

    def test_range_gate_case_enumeration(self):
        # Enumerate lone-contact cases across the range/FOV boundary.
        cases = [
            (SensorKind.OPTICAL, (100.0, 500.0), -1),  # in radar range: radar silent
            (SensorKind.OPTICAL, (100.0, 1200.0), 1),  # beyond radar: nothing expected
            (SensorKind.RADAR, (100.0, 500.0), -1),  # in FOV: camera silent
            (SensorKind.RADAR, (-500.0, -300.0), 1),  # out of FOV: nothing expected
        ]
        for sensor, enu, expected in cases:
            chart_pos = CHART.enu_to_px(*enu)
            if sensor is SensorKind.OPTICAL:
                det = detection(sensor, 0, optical_pos=optical_of(chart_pos))
            else:
                det = detection(sensor, 0, chart_pos=chart_pos)
            record = associate_contacts([det], HOM, GATE)[0]
            assert multisensor_pass(record, EXPECTATIONS, HOM) == [expected], (sensor, enu)


class TestPositionPass:
    def test_coincident_pair_passes(self):
        pos = CHART.enu_to_px(50.0, 600.0)
        dets = [
            detection(SensorKind.AIS, 0, chart_pos=pos),
            detection(SensorKind.RADAR, 0, chart_pos=pos),
        ]
        record = associate_contacts(dets, HOM, GATE)[0]
        assert position_pass(record, GATE) == [1, 1]

    def test_singleton_rejected(self):
        record = MatchRecord(
            members=[detection(SensorKind.AIS, 0, chart_pos=(10, 10))],
            projected_positions=[(10.0, 10.0)],
            position_score=1.0,
        )
        with pytest.raises(ValueError):
            position_pass(record, GATE)

    def test_threshold_boundary_sides(self):
        # Solve exp(-d^2 / (2 sigma^2)) = threshold for the boundary offset,
        # then probe just inside and just outside.
        sigma = math.sqrt(GATE.covariance[0, 0])
        d_star = sigma * math.sqrt(-2.0 * math.log(GATE.accept_threshold))
        for offset, expected in ((d_star - 1e-6, 1), (d_star + 1e-6, -1)):
            record = MatchRecord(
                members=[
                    detection(SensorKind.AIS, 0, chart_pos=(10, 10)),
                    detection(SensorKind.RADAR, 0, chart_pos=(11, 11)),
                ],
                projected_positions=[(0.0, 0.0), (offset, 0.0)],
                position_score=1.0,
            )
            assert position_pass(record, GATE) == [expected, expected]


class TestMetadataMatrix:
    def _pair(self, length, extent, width=40):
        pos = CHART.enu_to_px(100.0, 200.0)
        ais = detection(SensorKind.AIS, 0, chart_pos=pos,
                        static=tanker_static(length=length, width=width))
        radar = detection(SensorKind.RADAR, 0, chart_pos=pos,
                          blob=RadarBlob(centroid=(100.0, 200.0),
                                         extent_major=extent,
                                         extent_minor=extent * 0.3))
        return associate_contacts([ais, radar], HOM, GATE)[0]

    def test_size_gap_feature(self):
        record = self._pair(length=250, extent=240.0)
        matrix = build_metadata_matrix([record])
        assert matrix.rows.shape == (1, len(METADATA_FEATURES))
        assert matrix.rows[0][4] == pytest.approx(10.0)

    def test_spoofed_gap_feature(self):
        record = self._pair(length=250, extent=3.0)
        matrix = build_metadata_matrix([record])
        assert matrix.rows[0][4] == pytest.approx(247.0)

    def test_record_without_radar_not_applicable(self):
        opt = detection(SensorKind.OPTICAL, 0, optical_pos=(30.0, 30.0))
        matrix = build_metadata_matrix(
            associate_contacts([opt], HOM, GATE)
        )
        assert matrix.rows.shape[0] == 0
        assert matrix.not_applicable == [0]


class TestSvmTraining:
    def test_two_point_maximum_margin(self):
        rows = np.array([[1.0, 0.0], [-1.0, 0.0]])
        labels = [1.0, -1.0]
        model, history = train_svm(rows, labels, C=1.0, epochs=600, seed=0,
                                   batch_size=2)
        assert svm_decide(model, model.standardize(np.array([1.0, 0.0]))) == 1
        assert svm_decide(model, model.standardize(np.array([-1.0, 0.0]))) == -1
        # Boundary is x1 = 0: tiny |b| relative to w1.
        assert abs(model.bias) < 0.05 * abs(model.weights[0])

    def test_objective_close_to_grid_oracle(self):
        rows = np.array([[1.0, 0.0], [-1.0, 0.0]])
        labels = np.array([1.0, -1.0])
        model, _ = train_svm(rows, labels, C=1.0, epochs=800, seed=0, batch_size=2)
        Xs = (rows - model.feature_means) / model.feature_scales
        trained_obj = svm_objective(model.weights, model.bias, Xs, labels, 1.0)
        # Coarse-to-fine grid over (w1, w2, b).
        lo, hi = -3.0, 3.0
        center = np.zeros(3)
        best = np.inf
        span = hi - lo
        for _ in range(6):
            grid = [np.linspace(c - span / 2, c + span / 2, 13) for c in center]
            for w1 in grid[0]:
                for w2 in grid[1]:
                    for b in grid[2]:
                        val = svm_objective(np.array([w1, w2]), b, Xs, labels, 1.0)
                        if val < best:
                            best = val
                            center = np.array([w1, w2, b])
            span /= 4.0
        assert trained_obj <= best * 1.01 + 1e-9

    def test_small_c_shrinks_weights(self):
        rows, labels = make_metadata_training_set(40, 40, seed=1)
        model, _ = train_svm(rows, labels, C=1e-6, epochs=200, seed=0)
        assert np.linalg.norm(model.weights) < 0.05

    def test_metadata_set_fully_separable(self):
        rows, labels = make_metadata_training_set(seed=2)
        model, _ = train_svm(rows, labels, C=1.0, epochs=400, seed=0)
        predictions = [svm_decide(model, model.standardize(r)) for r in rows]
        assert all(p == y for p, y in zip(predictions, labels))

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassTraining):
            train_svm(np.array([[1.0], [2.0]]), [1.0, 1.0])

    def test_objective_nonincreasing_on_moving_average(self):
        rows, labels = make_metadata_training_set(60, 60, seed=3)
        _, history = train_svm(rows, labels, C=1.0, epochs=200, seed=0)
        window = 10
        avg = [np.mean(history[i : i + window]) for i in range(0, len(history) - window)]
        # Allow stochastic jitter but require the trend to never regress.
        assert all(b <= a * 1.02 + 1e-9 for a, b in zip(avg, avg[window:]))


class TestSvmDecide:
    def _model(self, weights, bias):
        n = len(weights)
        return SvmModel(
            weights=np.array(weights, dtype=float), bias=bias, regularization=1.0,
            feature_means=np.zeros(n), feature_scales=np.ones(n),
        )

    def test_positive_side(self):
        model = self._model([1.0, 0.0], 0.0)
        assert svm_decide(model, np.array([2.0, 0.0])) == 1

    def test_negative_side(self):
        model = self._model([1.0, 0.0], 0.0)
        assert svm_decide(model, np.array([-2.0, 0.0])) == -1

    def test_tie_resolves_positive(self):
        model = self._model([1.0, 0.0], 0.0)
        assert svm_decide(model, np.array([0.0, 5.0])) == 1

    def test_matches_dot_product_oracle(self):
        rng = np.random.default_rng(9)
        model = self._model(rng.normal(0, 1, 6), float(rng.normal()))
        for _ in range(1000):
            row = rng.normal(0, 2, 6)
            expected = 1 if float(np.dot(model.weights, row)) + model.bias >= 0 else -1
            assert svm_decide(model, row) == expected

    def test_invariant_under_positive_rescaling(self):
        rng = np.random.default_rng(10)
        w = rng.normal(0, 1, 4)
        b = 0.37
        for scale in (0.5, 2.0, 17.0):
            m1 = self._model(w, b)
            m2 = self._model(w * scale, b * scale)
            for _ in range(50):
                row = rng.normal(0, 1, 4)
                assert svm_decide(m1, row) == svm_decide(m2, row)

    def test_dimension_mismatch(self):
        model = self._model([1.0, 0.0], 0.0)
        with pytest.raises(DimensionMismatch):
            svm_decide(model, np.array([1.0, 2.0, 3.0]))


class TestMetadataPass:
    MODEL = train_default_metadata_model(seed=0)

    def _record(self, length, extent):
        pos = CHART.enu_to_px(100.0, 200.0)
        ais = detection(SensorKind.AIS, 0, chart_pos=pos,
                        static=tanker_static(length=length))
        radar = detection(SensorKind.RADAR, 0, chart_pos=pos,
                          blob=RadarBlob(centroid=(100.0, 200.0),
                                         extent_major=extent,
                                         extent_minor=extent * 0.3))
        return associate_contacts([ais, radar], HOM, GATE)[0]

    def test_matching_sizes_pass(self):
        assert metadata_pass(self._record(250, 245.0), self.MODEL) == [1, 1]

    def test_tanker_claim_over_buoy_return_fails(self):
        assert metadata_pass(self._record(250, 3.0), self.MODEL) == [-1, -1]

    def test_optical_only_not_applicable(self):
        opt = detection(SensorKind.OPTICAL, 0, optical_pos=(30.0, 30.0))
        record = associate_contacts([opt], HOM, GATE)[0]
        assert metadata_pass(record, self.MODEL) == [0]

    def test_ais_without_static_block_fails(self):
        pos = CHART.enu_to_px(100.0, 200.0)
        ais = detection(SensorKind.AIS, 0, chart_pos=pos, static=None)
        radar = detection(SensorKind.RADAR, 0, chart_pos=pos,
                          blob=RadarBlob(centroid=(100.0, 200.0),
                                         extent_major=10.0, extent_minor=3.0))
        record = associate_contacts([ais, radar], HOM, GATE)[0]
        assert metadata_pass(record, self.MODEL) == [-1, -1]

    def test_model_json_roundtrip(self):
        restored = SvmModel.from_json(self.MODEL.to_json())
        assert np.array_equal(restored.weights, self.MODEL.weights)
        assert restored.bias == self.MODEL.bias
        assert np.array_equal(restored.feature_means, self.MODEL.feature_means)
