"""Rigid alignment of serial reconstructions and healing-trend derivation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateGeometryError, ValidationError
from .models import BurnMetrics


@dataclass
class RigidTransform:
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equal to applying ``other`` first, then ``self``."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)


def rigid_fit_svd(
    source: np.ndarray,
    target: np.ndarray,
    correspondences: Optional[np.ndarray] = None,
) -> RigidTransform:
    """Least-squares rigid transform taking source points onto target points.

    Uses the SVD of the centered cross-covariance; if the naive rotation
    comes out as a reflection, the last column of V is negated so the
    result is a proper rotation.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if correspondences is not None:
        correspondences = np.asarray(correspondences, dtype=np.int64)
        source = source[correspondences[:, 0]]
        target = target[correspondences[:, 1]]
    if len(source) != len(target):
        raise ValidationError("source and target correspondence counts differ")
    if len(source) < 3:
        raise DegenerateGeometryError("rigid fit needs >= 3 corresponding pairs")

    s_mean = source.mean(axis=0)
    t_mean = target.mean(axis=0)
    s_centered = source - s_mean
    # collinear sources leave a rotation about the line unconstrained
    sv = np.linalg.svd(s_centered, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1.0):
        raise DegenerateGeometryError("rigid fit needs non-collinear correspondences")

    h = s_centered.T @ (target - t_mean)
    u, _, vt = np.linalg.svd(h)
    v = vt.T
    rotation = v @ u.T
    if np.linalg.det(rotation) < 0:
        v = v.copy()
        v[:, -1] = -v[:, -1]
        rotation = v @ u.T
    return RigidTransform(rotation, t_mean - rotation @ s_mean)


@dataclass
class IcpParams:
    max_iterations: int = 50
    tolerance: float = 1e-8  # stop when the RMS improvement falls below this
    trim: bool = False  # drop pairs with distance > trim_factor x median
    trim_factor: float = 3.0


@dataclass
class IcpResult:
    transform: RigidTransform
    rms: float
    rms_trace: list
    iterations: int
    converged: bool


def icp_align(
    source: np.ndarray,
    target: np.ndarray,
    params: IcpParams = IcpParams(),
    init: Optional[RigidTransform] = None,
) -> IcpResult:
    """Iterative closest point: nearest-neighbour correspondences then SVD fit.

    The recorded RMS trace (nearest-neighbour RMS after each transform
    update) is non-increasing when trimming is disabled.
    """
    source = np.asarray(source, dtype=np.float64).reshape(-1, 3)
    target = np.asarray(target, dtype=np.float64).reshape(-1, 3)
    if len(source) == 0 or len(target) == 0:
        raise ValidationError("icp_align requires non-empty point clouds")

    transform = init if init is not None else RigidTransform.identity()
    tree = cKDTree(target)
    trace: list[float] = []
    converged = False
    prev_rms = np.inf
    iterations = 0

    for iterations in range(1, params.max_iterations + 1):
        moved = transform.apply(source)
        dists, nn = tree.query(moved)
        if params.trim:
            cutoff = params.trim_factor * np.median(dists)
            keep = dists <= cutoff
            if keep.sum() < 3:
                keep = np.ones(len(dists), dtype=bool)
        else:
            keep = np.ones(len(dists), dtype=bool)
        step = rigid_fit_svd(moved[keep], target[nn[keep]])
        transform = step.compose(transform)
        moved = transform.apply(source)
        dists, nn = tree.query(moved)
        rms = float(np.sqrt(np.mean(dists**2)))
        trace.append(rms)
        if rms < 1e-15:
            converged = True
            break
        if prev_rms - rms < params.tolerance:
            converged = True
            break
        prev_rms = rms

    return IcpResult(
        transform=transform,
        rms=trace[-1],
        rms_trace=trace,
        iterations=iterations,
        converged=converged,
    )


@dataclass
class HealingPoint:
    """One timepoint in a healing series; days are measured from baseline."""

    day: float
    metrics: BurnMetrics
    delta_area_cm2: float = 0.0
    delta_d_max_mm: float = 0.0
    delta_volume_cm3: float = 0.0
    percent_area_change: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "day": self.day,
            "metrics": self.metrics.to_dict(),
            "delta_area_cm2": self.delta_area_cm2,
            "delta_d_max_mm": self.delta_d_max_mm,
            "delta_volume_cm3": self.delta_volume_cm3,
            "percent_area_change": self.percent_area_change,
        }


@dataclass
class HealingSeries:
    """Aligned per-timepoint metrics with deltas, rate, and recovery projection."""

    points: list  # [HealingPoint], strictly increasing days
    healing_rate_cm2_per_day: Optional[float] = None  # positive when shrinking
    projected_recovery_days: Optional[float] = None  # days from baseline
    baseline_zero_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "points": [p.to_dict() for p in self.points],
            "healing_rate_cm2_per_day": self.healing_rate_cm2_per_day,
            "projected_recovery_days": self.projected_recovery_days,
            "baseline_zero_warning": self.baseline_zero_warning,
        }

    def to_delimited(self, sep: str = ",") -> str:
        """Tabular export: day, area, d_max, volume, delta area, percent change."""
        header = sep.join(
            ["day", "area_cm2", "d_max_mm", "volume_proxy_cm3", "delta_area_cm2", "percent_area_change"]
        )
        rows = [header]
        for p in self.points:
            pct = "" if p.percent_area_change is None else repr(p.percent_area_change)
            rows.append(
                sep.join(
                    [
                        repr(p.day),
                        repr(p.metrics.area_cm2),
                        repr(p.metrics.d_max_mm),
                        repr(p.metrics.volume_proxy_cm3),
                        repr(p.delta_area_cm2),
                        pct,
                    ]
                )
            )
        return "\n".join(rows) + "\n"


def compute_deltas(series: list) -> HealingSeries:
    """Deltas against baseline plus a linear healing rate and recovery projection.

    ``series`` is a list of (day, BurnMetrics) pairs; the earliest entry
    is the baseline. Shifting every day by a constant changes nothing.
    """
    if not series:
        raise ValidationError("healing series needs at least one timepoint")
    ordered = sorted(series, key=lambda pair: pair[0])
    days = np.array([float(day) for day, _ in ordered])
    if len(days) > 1 and np.any(np.diff(days) <= 0):
        raise ValidationError("timepoints must be strictly increasing")
    days = days - days[0]  # translation invariance in time

    baseline = ordered[0][1]
    a0 = baseline.area_cm2
    baseline_zero = a0 == 0 and any(m.area_cm2 != 0 for _, m in ordered[1:])
    if baseline_zero:
        warnings.warn(
            "baseline area is zero with later nonzero areas; percent change omitted",
            stacklevel=2,
        )

    points = []
    for day, (_, metrics) in zip(days, ordered):
        delta_area = metrics.area_cm2 - a0
        percent = 100.0 * delta_area / a0 if a0 > 0 else None
        points.append(
            HealingPoint(
                day=float(day),
                metrics=metrics,
                delta_area_cm2=delta_area,
                delta_d_max_mm=metrics.d_max_mm - baseline.d_max_mm,
                delta_volume_cm3=metrics.volume_proxy_cm3 - baseline.volume_proxy_cm3,
                percent_area_change=percent,
            )
        )

    rate = None
    projection = None
    if len(points) >= 2:
        areas = np.array([p.metrics.area_cm2 for p in points])
        slope, intercept = np.polyfit(days, areas, 1)
        rate = float(-slope)
        if slope < 0:
            projection = float(-intercept / slope)

    return HealingSeries(
        points=points,
        healing_rate_cm2_per_day=rate,
        projected_recovery_days=projection,
        baseline_zero_warning=baseline_zero,
    )
