import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dfcr.metrics import (
    AllZeroDifferences,
    EmptyInput,
    compute_metrics,
    wilcoxon_signed_rank,
)


def enumeration_wilcoxon_p(diffs):
    """Literal 2^n enumeration over sign assignments (two-sided)."""
    diffs = np.asarray(diffs, dtype=float)
    diffs = diffs[diffs != 0]
    abs_d = np.abs(diffs)
    order = np.argsort(abs_d, kind="stable")
    ranks = np.empty(len(diffs))
    sorted_abs = abs_d[order]
    i = 0
    while i < len(diffs):
        j = i
        while j + 1 < len(diffs) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    w_obs = float(ranks[diffs > 0].sum())
    le = ge = 0
    for signs in itertools.product((0, 1), repeat=len(diffs)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        le += w <= w_obs
        ge += w >= w_obs
    return min(1.0, 2.0 * min(le, ge) / 2.0 ** len(diffs))


class TestComputeMetrics:
    def test_half_confidence_arithmetic(self):
        m = compute_metrics([0.5, 0.5], [1.0, 1.0])
        assert m.mse == pytest.approx(0.25)
        assert m.rmse == pytest.approx(0.5)
        assert m.mae == pytest.approx(0.5)

    def test_perfect_prediction_all_zero(self):
        m = compute_metrics([0.2, 0.8, 1.0], [0.2, 0.8, 1.0])
        assert m.mse == m.rmse == m.mae == m.median_diff == m.range_diff == m.std_diff == 0.0

    def test_matches_two_pass_reference(self):
        rng = np.random.default_rng(0)
        p = rng.uniform(0, 1, 100)
        t = rng.integers(0, 2, 100).astype(float)
        m = compute_metrics(p, t)
        d = [abs(a - b) for a, b in zip(t, p)]
        n = len(d)
        mse = sum(x * x for x in d) / n
        mean = sum(d) / n
        var = sum((x - mean) ** 2 for x in d) / n
        ds = sorted(d)
        median = (ds[n // 2 - 1] + ds[n // 2]) / 2 if n % 2 == 0 else ds[n // 2]
        assert m.mse == pytest.approx(mse, abs=1e-12)
        assert m.rmse == pytest.approx(math.sqrt(mse), abs=1e-12)
        assert m.mae == pytest.approx(mean, abs=1e-12)
        assert m.median_diff == pytest.approx(median, abs=1e-12)
        assert m.range_diff == pytest.approx(max(d) - min(d), abs=1e-12)
        assert m.std_diff == pytest.approx(math.sqrt(var), abs=1e-12)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            compute_metrics([], [])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            compute_metrics([1.0], [1.0, 2.0])

    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0, allow_nan=False),
                 min_size=1, max_size=30),
    )
    def test_rmse_squared_is_mse_and_mae_bounded(self, predicted):
        truth = [1.0] * len(predicted)
        m = compute_metrics(predicted, truth)
        assert m.rmse**2 == pytest.approx(m.mse, abs=1e-12)
        assert m.mae <= m.rmse + 1e-12


class TestWilcoxon:
    def test_three_positive_differences_exact_quarter(self):
        result = wilcoxon_signed_rank([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
        assert result.p_value == 0.25
        assert result.method == "exact"
        assert result.n_effective == 3

    def test_antisymmetric_tied_pair_p_one(self):
        result = wilcoxon_signed_rank([1.0, 0.0], [0.0, 1.0])
        assert result.p_value == 1.0

    def test_zero_differences_dropped(self):
        result = wilcoxon_signed_rank([1.0, 5.0, 5.0, 2.0], [0.0, 5.0, 5.0, 0.0])
        assert result.n_effective == 2

    def test_all_zero_differences_raises(self):
        with pytest.raises(AllZeroDifferences):
            wilcoxon_signed_rank([1.0, 2.0], [1.0, 2.0])

    def test_empty_raises(self):
        with pytest.raises(EmptyInput):
            wilcoxon_signed_rank([], [])

    def test_exact_matches_enumeration_small_n(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            n = int(rng.integers(3, 13))
            a = np.round(rng.normal(0.3, 1.0, n), 3)
            b = np.round(rng.normal(0.0, 1.0, n), 3)
            if np.all(a == b):
                continue
            result = wilcoxon_signed_rank(a, b)
            assert result.method == "exact"
            assert result.p_value == pytest.approx(enumeration_wilcoxon_p(a - b),
                                                   abs=1e-12)

    def test_large_n_uses_normal_approximation(self):
        rng = np.random.default_rng(2)
        a = rng.normal(0.5, 1.0, 30)
        b = rng.normal(0.0, 1.0, 30)
        result = wilcoxon_signed_rank(a, b)
        assert result.method == "normal-approximation"
        assert 0.0 < result.p_value <= 1.0

    def test_methods_agree_near_boundary(self):
        from dfcr.metrics import _exact_two_sided_p, _normal_two_sided_p, _signed_ranks

        rng = np.random.default_rng(3)
        for _ in range(20):
            diffs = rng.normal(0.3, 1.0, 25)
            diffs = diffs[diffs != 0]
            ranks, signs = _signed_ranks(diffs)
            w_plus = float(ranks[signs > 0].sum())
            exact = _exact_two_sided_p(ranks, w_plus)
            approx = _normal_two_sided_p(ranks, signs, w_plus)
            assert abs(exact - approx) < 0.01

    def test_statistic_is_smaller_rank_sum(self):
        result = wilcoxon_signed_rank([3.0, 4.0, 5.0, 0.5], [0.0, 0.0, 0.0, 1.0])
        # |d| = 3, 4, 5, 0.5 -> ranks 2, 3, 4, 1; W- = 1.
        assert result.statistic == 1.0

    def test_ties_use_midranks(self):
        # Differences 1, 1, -1: all |d| tie at midrank 2.
        result = wilcoxon_signed_rank([1.0, 1.0, 0.0], [0.0, 0.0, 1.0])
        assert result.p_value == pytest.approx(enumeration_wilcoxon_p([1.0, 1.0, -1.0]),
                                               abs=1e-12)
