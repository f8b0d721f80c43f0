import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfcr.attacks import (
    EaConfig,
    PgdConfig,
    das_dennis_directions,
    evolve_perturbation,
    inject_spoofs,
    nondominated_sort,
    pgd_patch,
)
from dfcr.core import ScenarioGenConfig, SensorKind, default_sensor_config, generate_scenario
from dfcr.detectors import (
    NO_NOISE,
    ToyDetectorParams,
    make_raster,
    simulate_detections,
    toy_optical_gradient,
    window_confidence,
)


class TestNondominatedSort:
    def test_basic_two_fronts(self):
        fronts = nondominated_sort([(1.0, 2.0), (2.0, 1.0), (0.0, 0.0)])
        assert sorted(fronts[0]) == [0, 1]
        assert fronts[1] == [2]

    def test_identical_points_single_front(self):
        fronts = nondominated_sort([(1.0, 1.0)] * 5)
        assert len(fronts) == 1
        assert sorted(fronts[0]) == [0, 1, 2, 3, 4]

    def test_matches_bruteforce_dominance_oracle(self):
        rng = np.random.default_rng(0)
        pts = rng.uniform(0, 1, size=(20, 3))
        fronts = nondominated_sort(pts)

        def dominates(i, j):
            return bool(np.all(pts[i] >= pts[j]) and np.any(pts[i] > pts[j]))

        remaining = set(range(20))
        for front in fronts:
            expected = {
                i for i in remaining
                if not any(dominates(j, i) for j in remaining if j != i)
            }
            assert set(front) == expected
            remaining -= expected
        assert not remaining

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)),
                    min_size=1, max_size=25))
    def test_fronts_disjoint_and_cover(self, pts):
        fronts = nondominated_sort(pts)
        flat = [i for front in fronts for i in front]
        assert sorted(flat) == list(range(len(pts)))

    def test_das_dennis_directions(self):
        dirs = das_dennis_directions(12, m=2)
        assert dirs.shape == (13, 2)
        assert np.allclose(dirs.sum(axis=1), 1.0)


def mean_pixel_objective(image):
    return float(np.mean(image.data)) / 255.0


class TestEvolvePerturbation:
    def test_monotone_objective_climbs_toward_clip(self):
        cfg = EaConfig(max_iterations=120, min_iterations=120, population_size=10,
                       epsilon_decay=1.0, objective_count=1)
        image = make_raster(np.full((8, 8), 128.0))
        result = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=0)
        assert float(np.mean(result.adversarial.data)) > 128.0 + 60.0
        assert all(b <= a + 1e-12 for b, a in zip(result.best_history,
                                                  result.best_history[1:]))

    def test_zero_epsilon_returns_input(self):
        cfg = EaConfig(max_iterations=55, min_iterations=50, population_size=4,
                       perturbation_epsilon=0.0, objective_count=1)
        image = make_raster(np.full((6, 6), 77.0))
        result = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=1)
        assert np.array_equal(result.adversarial.data, image.data)

    def test_frozen_objective_early_stop(self):
        cfg = EaConfig(max_iterations=500, min_iterations=50, population_size=6,
                       objective_count=1)
        image = make_raster(np.full((4, 4), 100.0))
        result = evolve_perturbation(image, [lambda img: 0.5], cfg, seed=2)
        assert result.generations_run <= cfg.min_iterations + cfg.no_improvement_threshold
        assert result.generations_run >= cfg.min_iterations

    def test_outputs_respect_pixel_bounds(self):
        cfg = EaConfig(max_iterations=60, min_iterations=50, population_size=8,
                       objective_count=1)
        image = make_raster(np.full((6, 6), 250.0))
        result = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=3)
        assert result.adversarial.data.min() >= 0.0
        assert result.adversarial.data.max() <= 255.0

    def test_budget_drawn_within_configured_range(self):
        cfg = EaConfig(max_iterations=80, min_iterations=50, population_size=4,
                       objective_count=1)
        image = make_raster(np.full((4, 4), 10.0))
        result = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=4)
        assert 50 <= result.generations_run <= 80

    def test_objective_count_must_match(self):
        cfg = EaConfig(objective_count=2)
        with pytest.raises(ValueError):
            evolve_perturbation(make_raster(np.zeros((4, 4))),
                                [mean_pixel_objective], cfg, seed=0)

    def test_deterministic_for_fixed_seed(self):
        cfg = EaConfig(max_iterations=55, min_iterations=50, population_size=6,
                       objective_count=1)
        image = make_raster(np.full((5, 5), 90.0))
        a = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=7)
        b = evolve_perturbation(image, [mean_pixel_objective], cfg, seed=7)
        assert np.array_equal(a.adversarial.data, b.adversarial.data)
        assert a.history == b.history


class TestPgdPatch:
    def _positive_detector(self):
        return ToyDetectorParams(window=(4, 4), weights=np.full(16, 0.2), bias=-2.0)

    def test_zero_gradient_identity(self):
        cfg = PgdConfig(patch_region=(0, 0, 4, 4))
        image = make_raster(np.full((8, 8), 100.0))
        out = pgd_patch(image, cfg, lambda img: np.zeros((8, 8)))
        assert np.array_equal(out.data, image.data)

    def test_projection_contract(self):
        params = self._positive_detector()
        cfg = PgdConfig(alpha=0.05, iterations=10, epsilon=0.3,
                        patch_region=(4, 0, 8, 4))
        rng = np.random.default_rng(5)
        image = make_raster(rng.uniform(80, 170, size=(8, 8)))
        out = pgd_patch(image, cfg, lambda img: toy_optical_gradient(img, params, (0, 1)))
        delta = (out.data - image.data) / 255.0
        assert np.max(np.abs(delta)) <= cfg.epsilon + 1e-9
        outside = np.ones((8, 8), dtype=bool)
        outside[0:4, 4:8] = False
        assert np.all(out.data[outside] == image.data[outside])
        assert out.data.min() >= 0.0 and out.data.max() <= 255.0

    def test_confidence_strictly_increases_until_saturation(self):
        params = self._positive_detector()
        image = make_raster(np.full((4, 4), 120.0))
        previous = window_confidence(image, params, (0, 0))
        confidences = [previous]
        for iters in range(1, 7):
            cfg = PgdConfig(alpha=0.05, iterations=iters, epsilon=0.3,
                            patch_region=(0, 0, 4, 4))
            adv = pgd_patch(image, cfg, lambda img: toy_optical_gradient(img, params, (0, 0)))
            confidences.append(window_confidence(adv, params, (0, 0)))
        saturated = 6 * 0.05 >= 0.3
        assert all(b > a for a, b in zip(confidences[:6], confidences[1:6]))
        assert saturated and confidences[6] >= confidences[5]

    def test_patch_region_must_fit(self):
        cfg = PgdConfig(patch_region=(0, 0, 32, 32))
        with pytest.raises(ValueError):
            pgd_patch(make_raster(np.zeros((8, 8))), cfg, lambda img: np.zeros((8, 8)))


class TestInjectSpoofs:
    BASE = generate_scenario(5, ScenarioGenConfig(n_objects_min=0, n_objects_max=0),
                             default_sensor_config())

    def test_input_scenario_not_mutated(self):
        before = self.BASE.spoofed
        inject_spoofs(self.BASE, 3, kind="ais", seed=0)
        assert self.BASE.spoofed == before

    def test_exact_count_added(self):
        for count in (1, 3, 5):
            spoofed = inject_spoofs(self.BASE, count, kind="ais", seed=1)
            assert len(spoofed.spoofed) == count
            assert all(spoofed.truth_labels[o.id] == 0.0 for o in spoofed.spoofed)

    def test_invalid_count_rejected(self):
        with pytest.raises(ValueError):
            inject_spoofs(self.BASE, 2, kind="ais", seed=0)

    def test_ais_spoof_yields_only_ais_detection(self):
        scenario = inject_spoofs(self.BASE, 1, kind="ais", seed=2)
        ais = simulate_detections(scenario, SensorKind.AIS, NO_NOISE, 0)
        radar = simulate_detections(scenario, SensorKind.RADAR, NO_NOISE, 0)
        optical = simulate_detections(scenario, SensorKind.OPTICAL, NO_NOISE, 0)
        assert len(ais) == 1 and len(radar) == 0 and len(optical) == 0
        assert ais[0].ais_static is not None  # static block came off the wire

    def test_radar_spoof_uses_attacker_extents(self):
        scenario = inject_spoofs(self.BASE, 1, kind="radar", seed=3)
        radar = simulate_detections(scenario, SensorKind.RADAR, NO_NOISE, 0)
        assert len(radar) == 1
        obj = scenario.spoofed[0]
        assert radar[0].radar_blob == obj.radar_signature

    def test_spoofs_stay_within_radar_coverage(self):
        scenario = inject_spoofs(self.BASE, 5, kind="ais", seed=4)
        radar_range = scenario.sensor_config.radar_range_m
        for obj in scenario.spoofed:
            assert math.hypot(*obj.position) <= 0.91 * radar_range

    def test_both_kind_mismatched_sizes_fail_metadata_downstream(self):
        from dfcr.core import ChartFrame, TRUE_CHART_TO_OPTICAL
        from dfcr.geometry import Homography, default_gate
        from dfcr.scoring import DeltaConfig, run_pipeline
        from dfcr.validation import SensorExpectations, train_default_metadata_model

        scenario = inject_spoofs(self.BASE, 1, kind="both", seed=5)
        dets = []
        for sensor in (SensorKind.AIS, SensorKind.RADAR, SensorKind.OPTICAL):
            dets.extend(simulate_detections(scenario, sensor, NO_NOISE, 0))
        assert {d.sensor for d in dets} == {SensorKind.AIS, SensorKind.RADAR}
        traces, _ = run_pipeline(
            dets,
            Homography(TRUE_CHART_TO_OPTICAL.copy()),
            default_gate(),
            train_default_metadata_model(seed=0),
            DeltaConfig(),
            SensorExpectations(
                radar_range_m=scenario.sensor_config.radar_range_m,
                camera_fov_deg=scenario.sensor_config.camera_fov_deg,
                optical_range_m=scenario.sensor_config.optical_range_m,
                chart_frame=ChartFrame(scenario.sensor_config.radar_range_m),
            ),
        )
        assert all(t.indicators[2] == -1 for t in traces)

    def test_deterministic_for_fixed_seed(self):
        a = inject_spoofs(self.BASE, 3, kind="both", seed=9)
        b = inject_spoofs(self.BASE, 3, kind="both", seed=9)
        assert a == b
