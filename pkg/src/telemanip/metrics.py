"""Trajectory deviation metrics and small summary statistics.

Deviation follows the mean-absolute-error convention: the reference path is
resampled at 1 cm arc length, each actual sample is matched to its nearest
reference point, and the offset is expressed in that point's tangent/normal
frame (x along the path, y orthogonal to the path arc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

RESAMPLE_STEP_M = 0.01


@dataclass(frozen=True)
class DeviationMetrics:
    mae_x_m: float
    mae_y_m: float
    nav_time_s: float
    manip_time_s: float
    switch_time_s: float
    total_time_s: float
    path_length_m: float
    collision_count: int

    def as_dict(self) -> dict:
        return {
            "mae_x_m": self.mae_x_m, "mae_y_m": self.mae_y_m,
            "nav_time_s": self.nav_time_s, "manip_time_s": self.manip_time_s,
            "switch_time_s": self.switch_time_s,
            "total_time_s": self.total_time_s,
            "path_length_m": self.path_length_m,
            "collision_count": self.collision_count,
        }


def resample_polyline(points: np.ndarray, step: float = RESAMPLE_STEP_M
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Arc-length resampling; returns (points (M,2), unit tangents (M,2))."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("reference must be at least 2 points of (x, y)")
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    keep = seglen > 1e-12
    if not keep.any():
        raise ValueError("reference is degenerate (zero length)")
    pts = np.concatenate([pts[:1], pts[1:][keep]])
    seg = np.diff(pts, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate([[0.0], np.cumsum(seglen)])
    total = s[-1]
    n = max(2, int(math.floor(total / step)) + 1)
    si = np.linspace(0.0, total, n)
    x = np.interp(si, s, pts[:, 0])
    y = np.interp(si, s, pts[:, 1])
    out = np.stack([x, y], axis=1)
    tan = np.empty_like(out)
    tan[1:-1] = out[2:] - out[:-2]
    tan[0] = out[1] - out[0]
    tan[-1] = out[-1] - out[-2]
    norms = np.hypot(tan[:, 0], tan[:, 1])
    norms[norms == 0.0] = 1.0
    tan /= norms[:, None]
    return out, tan


def deviation_mae(actual: np.ndarray, reference: np.ndarray
                  ) -> tuple[float, float]:
    """(mae_x, mae_y): tangential and normal mean absolute deviation of the
    actual trajectory from the reference path."""
    act = np.asarray(actual, dtype=float)
    if act.ndim != 2 or act.shape[0] < 1 or act.shape[1] != 2:
        raise ValueError("actual must be (N, 2)")
    ref, tan = resample_polyline(reference)
    tree = cKDTree(ref)
    _, idx = tree.query(act)
    off = act - ref[idx]
    t = tan[idx]
    tangential = off[:, 0] * t[:, 0] + off[:, 1] * t[:, 1]
    normal = -off[:, 0] * t[:, 1] + off[:, 1] * t[:, 0]
    return float(np.mean(np.abs(tangential))), float(np.mean(np.abs(normal)))


def path_length(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 2:
        return 0.0
    seg = np.diff(pts, axis=0)
    return float(np.hypot(seg[:, 0], seg[:, 1]).sum())


def mean_sem(values) -> tuple[float, float]:
    """Mean and standard error of the mean; SEM is 0 for a single sample."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no samples")
    if v.size == 1:
        return float(v[0]), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def sign_test_less(a, b) -> float:
    """One-sided paired sign test p-value for the hypothesis a < b.

    Ties are dropped; p = P(X >= wins) for X ~ Binomial(n, 1/2).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples must have equal length")
    diffs = b - a
    n = int(np.count_nonzero(diffs != 0.0))
    if n == 0:
        return 1.0
    wins = int(np.count_nonzero(diffs > 0.0))
    p = sum(math.comb(n, k) for k in range(wins, n + 1)) / 2.0 ** n
    return float(p)
