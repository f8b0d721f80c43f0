"""Loss metrics and the paired Wilcoxon signed-rank test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

EXACT_WILCOXON_LIMIT = 25


class EmptyInput(ValueError):
    pass


class AllZeroDifferences(ValueError):
    pass


@dataclass(frozen=True)
class MetricSet:
    """Loss summary over absolute prediction-truth differences."""

    mse: float
    rmse: float
    mae: float
    median_diff: float
    range_diff: float
    std_diff: float

    def as_dict(self) -> dict[str, float]:
        return {
            "mse": self.mse,
            "rmse": self.rmse,
            "mae": self.mae,
            "median_diff": self.median_diff,
            "range_diff": self.range_diff,
            "std_diff": self.std_diff,
        }


def compute_metrics(predicted: Sequence[float], truth: Sequence[float]) -> MetricSet:
    """Metrics over d_i = |truth_i - predicted_i| (population statistics)."""
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.size == 0 or t.size == 0:
        raise EmptyInput("metric inputs must be non-empty")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    d = np.abs(t - p)
    mse = float(np.mean(d**2))
    return MetricSet(
        mse=mse,
        rmse=math.sqrt(mse),
        mae=float(np.mean(d)),
        median_diff=float(np.median(d)),
        range_diff=float(d.max() - d.min()),
        std_diff=float(d.std()),
    )


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    n_effective: int
    method: str  # "exact" or "normal-approximation"


def _signed_ranks(diffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midranks of |d| and the sign of each difference (zeros pre-dropped)."""
    abs_d = np.abs(diffs)
    order = np.argsort(abs_d, kind="stable")
    ranks = np.empty(len(diffs), dtype=float)
    sorted_abs = abs_d[order]
    i = 0
    while i < len(diffs):
        j = i
        while j + 1 < len(diffs) and sorted_abs[j + 1] == sorted_abs[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks, np.sign(diffs)


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    """Exact two-sided p over all 2^n sign assignments.

    Computed by dynamic programming over the distribution of W+ (ranks are
    doubled so midranks become integers); identical to full enumeration.
    """
    doubled = np.rint(2.0 * ranks).astype(int)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    n_assignments = float(2 ** len(ranks))
    w2 = int(round(2.0 * w_plus))
    p_le = counts[: w2 + 1].sum() / n_assignments
    p_ge = counts[w2:].sum() / n_assignments
    return min(1.0, 2.0 * min(p_le, p_ge))


def _normal_two_sided_p(ranks: np.ndarray, signs: np.ndarray, w_plus: float) -> float:
    """Normal approximation with tie and continuity corrections."""
    n = len(ranks)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0:
        return 1.0
    delta = w_plus - mu
    correction = 0.5 * np.sign(delta)
    z = (delta - correction) / math.sqrt(var)
    return float(math.erfc(abs(z) / math.sqrt(2.0)))


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test on a - b.

    Zero differences are dropped. The p-value is exact (full sign-assignment
    distribution) for up to 25 effective pairs, then the tie- and
    continuity-corrected normal approximation takes over.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"paired samples must align: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise EmptyInput("paired samples are empty")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = diffs.size
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks, signs = _signed_ranks(diffs)
    w_plus = float(ranks[signs > 0].sum())
    w_minus = float(ranks[signs < 0].sum())
    if n <= EXACT_WILCOXON_LIMIT:
        p = _exact_two_sided_p(ranks, w_plus)
        method = "exact"
    else:
        p = _normal_two_sided_p(ranks, signs, w_plus)
        method = "normal-approximation"
    return WilcoxonResult(
        statistic=min(w_plus, w_minus),
        p_value=max(p, math.ulp(0.0)),
        n_effective=int(n),
        method=method,
    )
