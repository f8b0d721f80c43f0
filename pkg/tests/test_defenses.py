import math

import numpy as np
import pytest

from dfcr.defenses import (
    CompressionConfig,
    NoiseConfig,
    add_noise,
    adversarial_train,
    compress,
    dct_matrix,
    quantization_table,
)
from dfcr.detectors import make_raster, make_window_dataset, train_toy_detector
from dfcr.experiments import make_pgd_window_attack
from dfcr.attacks import PgdConfig


def naive_dct2(block):
    """O(n^4) direct evaluation of the orthonormal 2-D DCT."""
    n = block.shape[0]
    out = np.zeros((n, n))
    for u in range(n):
        for v in range(n):
            cu = math.sqrt(1.0 / n) if u == 0 else math.sqrt(2.0 / n)
            cv = math.sqrt(1.0 / n) if v == 0 else math.sqrt(2.0 / n)
            acc = 0.0
            for y in range(n):
                for x in range(n):
                    acc += (
                        block[y, x]
                        * math.cos((2 * y + 1) * u * math.pi / (2 * n))
                        * math.cos((2 * x + 1) * v * math.pi / (2 * n))
                    )
            out[u, v] = cu * cv * acc
    return out


class TestDctTransform:
    def test_matrix_form_matches_naive_oracle(self):
        rng = np.random.default_rng(0)
        block = rng.uniform(-128, 127, size=(8, 8))
        m = dct_matrix(8)
        assert np.allclose(m @ block @ m.T, naive_dct2(block), atol=1e-10)

    def test_orthonormality(self):
        m = dct_matrix(8)
        assert np.allclose(m @ m.T, np.eye(8), atol=1e-12)

    def test_quality_scaling_endpoints(self):
        assert np.all(quantization_table(100) == 1.0)
        assert np.all(quantization_table(1) >= quantization_table(50))


class TestCompress:
    def test_quality_100_nearly_lossless_on_smooth_gradient(self):
        x = np.linspace(40, 210, 32)
        image = make_raster(np.tile(x, (24, 1)))
        out = compress(image, CompressionConfig(quality=100))
        assert np.max(np.abs(out.data - image.data)) <= 2.0

    def test_constant_image_unchanged_up_to_rounding(self):
        image = make_raster(np.full((16, 16), 137.0))
        out = compress(image, CompressionConfig(quality=50))
        assert np.max(np.abs(out.data - image.data)) <= 1.0

    def test_small_checkerboard_high_frequency_removed(self):
        yy, xx = np.mgrid[0:24, 0:24]
        image = make_raster(128.0 + 10.0 * ((-1.0) ** (yy + xx)))
        out = compress(image, CompressionConfig(quality=10))
        m = dct_matrix(8)

        def high_freq_energy(data):
            total = 0.0
            for by in range(0, 24, 8):
                for bx in range(0, 24, 8):
                    coef = m @ (data[by : by + 8, bx : bx + 8] - 128.0) @ m.T
                    mask = np.add.outer(np.arange(8), np.arange(8)) >= 8
                    total += float(np.sum(coef[mask] ** 2))
            return total

        before = high_freq_energy(image.data)
        after = high_freq_energy(out.data)
        assert before > 0
        assert after <= 0.5 * before

    def test_dimensions_and_bounds_preserved(self):
        rng = np.random.default_rng(1)
        image = make_raster(rng.uniform(0, 255, size=(13, 21)))  # non-multiple of 8
        out = compress(image, CompressionConfig(quality=30))
        assert (out.height, out.width) == (13, 21)
        assert out.data.min() >= 0.0 and out.data.max() <= 255.0

    @pytest.mark.parametrize("quality", [10, 50, 90])
    def test_idempotent_within_tolerance(self, quality):
        rng = np.random.default_rng(2)
        image = make_raster(rng.uniform(0, 255, size=(32, 32)))
        once = compress(image, CompressionConfig(quality=quality))
        twice = compress(once, CompressionConfig(quality=quality))
        assert np.max(np.abs(twice.data - once.data)) <= 4.0

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        image = make_raster(rng.uniform(0, 255, size=(16, 16)))
        a = compress(image, CompressionConfig(quality=40))
        b = compress(image, CompressionConfig(quality=40))
        assert np.array_equal(a.data, b.data)


class TestAddNoise:
    def test_sigma_zero_identity(self):
        image = make_raster(np.full((8, 8), 90.0))
        out = add_noise(image, NoiseConfig(sigma=0.0), seed=0)
        assert np.array_equal(out.data, image.data)

    def test_same_seed_identical(self):
        image = make_raster(np.full((8, 8), 90.0))
        a = add_noise(image, NoiseConfig(sigma=10.0), seed=1)
        b = add_noise(image, NoiseConfig(sigma=10.0), seed=1)
        assert np.array_equal(a.data, b.data)

    def test_mean_preserved_within_lln_bound(self):
        image = make_raster(np.full((1000, 1000), 128.0))
        out = add_noise(image, NoiseConfig(sigma=10.0), seed=2)
        n = image.data.size
        assert abs(float(np.mean(out.data)) - 128.0) <= 3.0 * 10.0 / math.sqrt(n)

    def test_bounds_clipped(self):
        image = make_raster(np.full((32, 32), 2.0))
        out = add_noise(image, NoiseConfig(sigma=50.0), seed=3)
        assert out.data.min() >= 0.0 and out.data.max() <= 255.0


@pytest.fixture(scope="module")
def hardening_setup():
    clean = make_window_dataset(40, 40, window=(16, 16), seed=11)
    model, _ = train_toy_detector(clean, epochs=100, batch_size=8,
                                  learning_rate=0.5, seed=11, window=(16, 16))
    attack_fn = make_pgd_window_attack(PgdConfig())
    return model, clean, attack_fn


class TestAdversarialTrain:
    @pytest.fixture
    def setup(self, hardening_setup):
        return hardening_setup

    def test_zero_mix_matches_plain_retraining(self, setup):
        model, clean, attack_fn = setup
        trained, report = adversarial_train(model, clean, attack_fn,
                                            mix_fraction=0.0, epochs=5, seed=21)
        plain, _ = train_toy_detector(clean, epochs=5, batch_size=8,
                                      learning_rate=0.5, seed=21, init=model)
        assert np.array_equal(trained.weights, plain.weights)
        assert trained.bias == plain.bias
        assert report.attack_confidence_after == pytest.approx(
            report.attack_confidence_before, abs=0.2
        )

    def test_hardening_reduces_transfer_attack_confidence(self, setup):
        model, clean, attack_fn = setup
        _, report = adversarial_train(model, clean, attack_fn,
                                      mix_fraction=0.10, epochs=100, seed=21)
        assert report.attack_confidence_after < report.attack_confidence_before
        assert report.attack_confidence_before > 0.9

    def test_clean_accuracy_degradation_bounded(self, setup):
        model, clean, attack_fn = setup
        _, report = adversarial_train(model, clean, attack_fn,
                                      mix_fraction=0.10, epochs=100, seed=21)
        assert report.clean_accuracy_after >= report.clean_accuracy_before - 0.05

    def test_reproducible_for_fixed_seed(self, setup):
        model, clean, attack_fn = setup
        a, _ = adversarial_train(model, clean, attack_fn, mix_fraction=0.10,
                                 epochs=20, seed=33)
        b, _ = adversarial_train(model, clean, attack_fn, mix_fraction=0.10,
                                 epochs=20, seed=33)
        assert np.array_equal(a.weights, b.weights)
        assert a.bias == b.bias
