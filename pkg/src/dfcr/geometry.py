"""Projective mapping between sensor spaces and position agreement scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import OPTICAL_FRAME_W


class PointAtInfinity(ValueError):
    """Projection produced a point with a vanishing homogeneous coordinate."""


class DegenerateConfiguration(ValueError):
    """Correspondence set does not determine a unique homography."""


class OutOfFrame(ValueError):
    """Point lies outside the sector grid's frame."""


@dataclass
class Homography:
    """3x3 invertible projective map, normalized so h33 = 1 where possible."""

    h: np.ndarray

    def __post_init__(self) -> None:
        self.h = np.asarray(self.h, dtype=float)
        if self.h.shape != (3, 3):
            raise ValueError(f"homography must be 3x3, got {self.h.shape}")
        if abs(np.linalg.det(self.h)) < 1e-15:
            raise ValueError("homography must be invertible")
        if abs(self.h[2, 2]) > 1e-12:
            self.h = self.h / self.h[2, 2]

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.h))

    @staticmethod
    def identity() -> "Homography":
        return Homography(np.eye(3))


def project_point(hom: Homography, p: Sequence[float] | np.ndarray) -> np.ndarray:
    """Map a homogeneous point (x, y, 1) through the homography.

    Returns the image rescaled to unit third coordinate. Raises
    PointAtInfinity when the third coordinate all but vanishes.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != (3,):
        raise ValueError("expected a homogeneous 2-D point (x, y, 1)")
    q = hom.h @ p
    if abs(q[2]) < 1e-12:
        raise PointAtInfinity(f"projected point at infinity: {q}")
    return q / q[2]


def project_xy(hom: Homography, xy: tuple[float, float]) -> tuple[float, float]:
    q = project_point(hom, (xy[0], xy[1], 1.0))
    return (float(q[0]), float(q[1]))


def _hartley_normalization(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Similarity transform taking points to centroid 0, mean distance sqrt(2)."""
    centroid = pts.mean(axis=0)
    dists = np.linalg.norm(pts - centroid, axis=1)
    mean_dist = dists.mean()
    scale = math.sqrt(2.0) / mean_dist if mean_dist > 1e-12 else 1.0
    T = np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )
    ones = np.ones((pts.shape[0], 1))
    normed = (T @ np.hstack([pts, ones]).T).T[:, :2]
    return normed, T


def estimate_homography(
    correspondences: Sequence[tuple[tuple[float, float], tuple[float, float]]],
) -> tuple[Homography, float]:
    """Direct linear transform with Hartley normalization.

    Takes >= 4 (source, target) point pairs and returns the least-squares
    homography together with the RMS reprojection error on the inputs.
    Raises DegenerateConfiguration when the design matrix is rank-deficient
    (fewer than 4 pairs, or degenerate geometry such as 3 collinear points).
    """
    if len(correspondences) < 4:
        raise DegenerateConfiguration(
            f"need at least 4 correspondences, got {len(correspondences)}"
        )
    src = np.array([c[0] for c in correspondences], dtype=float)
    dst = np.array([c[1] for c in correspondences], dtype=float)
    src_n, T_src = _hartley_normalization(src)
    dst_n, T_dst = _hartley_normalization(dst)

    rows = []
    for (x, y), (u, v) in zip(src_n, dst_n):
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
        rows.append([x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u])
    A = np.array(rows)

    _, s, vt = np.linalg.svd(A)
    # A unique solution direction needs rank 8: the second-smallest singular
    # value must be clearly nonzero.
    if s[7] < 1e-9 * max(s[0], 1.0):
        raise DegenerateConfiguration("design matrix is rank-deficient")
    h_normed = vt[-1].reshape(3, 3)
    H = np.linalg.inv(T_dst) @ h_normed @ T_src
    hom = Homography(H)

    errs = []
    for (sx, sy), (dx, dy) in zip(src, dst):
        px, py = project_xy(hom, (sx, sy))
        errs.append((px - dx) ** 2 + (py - dy) ** 2)
    rms = math.sqrt(sum(errs) / len(errs))
    return hom, rms


@dataclass
class GaussianGate:
    """Positional agreement gate: peak-normalized 2-D Gaussian score.

    The score is 1 at coincidence and decays with the Mahalanobis distance,
    so ``accept_threshold`` is scale-free in the score domain.
    """

    covariance: np.ndarray
    accept_threshold: float = 0.2

    def __post_init__(self) -> None:
        self.covariance = np.asarray(self.covariance, dtype=float)
        if self.covariance.shape != (2, 2):
            raise ValueError("covariance must be 2x2")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if np.any(np.linalg.eigvalsh(self.covariance) <= 0):
            raise ValueError("covariance must be positive definite")
        if not 0.0 < self.accept_threshold < 1.0:
            raise ValueError("accept_threshold must be in (0, 1)")


def default_gate(frame_width: float = OPTICAL_FRAME_W,
                 accept_threshold: float = 0.2) -> GaussianGate:
    sigma = 0.05 * frame_width
    return GaussianGate(covariance=np.diag([sigma**2, sigma**2]),
                        accept_threshold=accept_threshold)


def position_likelihood(p_expected: Sequence[float], p_observed: Sequence[float],
                        gate: GaussianGate) -> float:
    d = np.asarray(p_observed, dtype=float) - np.asarray(p_expected, dtype=float)
    quad = float(d @ np.linalg.solve(gate.covariance, d))
    return float(math.exp(-0.5 * quad))


@dataclass(frozen=True)
class SectorGrid:
    """rows x cols partition of a bounded frame, row-major indexing."""

    rows: int
    cols: int
    frame_w: float
    frame_h: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must have at least one row and column")
        if self.frame_w <= 0 or self.frame_h <= 0:
            raise ValueError("frame dimensions must be positive")


def default_sector_grid(frame_w: float, frame_h: float) -> SectorGrid:
    return SectorGrid(rows=6, cols=8, frame_w=frame_w, frame_h=frame_h)


def sector_map(point: tuple[float, float], grid: SectorGrid) -> int:
    """Row-major sector index of an in-frame point.

    Interior boundary points belong to the lower-index sector; the frame's
    own left/top edges belong to sector column/row 0.
    """
    x = point[0] - grid.origin[0]
    y = point[1] - grid.origin[1]
    if not (0.0 <= x <= grid.frame_w and 0.0 <= y <= grid.frame_h):
        raise OutOfFrame(f"point {point} outside frame")
    cell_w = grid.frame_w / grid.cols
    cell_h = grid.frame_h / grid.rows
    col = max(0, math.ceil(x / cell_w) - 1)
    row = max(0, math.ceil(y / cell_h) - 1)
    col = min(col, grid.cols - 1)
    row = min(row, grid.rows - 1)
    return row * grid.cols + col
