"""Exact nearest-neighbour descriptor matching with the distance-ratio test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientCandidatesError, ValidationError

DEFAULT_RATIO = 0.75


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: float  # nearest descriptor distance d1
    second_distance: float  # second-nearest distance d2 (d1 <= d2)
    passed_ratio: bool  # d1 / d2 < t


def match_descriptors(
    a: np.ndarray, b: np.ndarray, ratio: float = DEFAULT_RATIO
) -> list:
    """For each descriptor in ``a``: nearest and second-nearest in ``b``.

    Exact brute-force Euclidean search (desk-scale sets make exactness
    affordable and deterministic). The ratio test is evaluated as
    d1 < t * d2, which avoids dividing by a zero second distance.
    """
    if not 0.0 < ratio < 1.0:
        raise ValidationError("ratio threshold must lie strictly between 0 and 1")
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or (a.size and b.size and a.shape[1] != b.shape[1]):
        raise ValidationError("descriptor arrays must be 2-D with equal width")
    if len(b) < 2:
        raise InsufficientCandidatesError(
            f"need >= 2 candidate descriptors for a ratio test, got {len(b)}"
        )
    if len(a) == 0:
        return []

    # |x - y|^2 = |x|^2 + |y|^2 - 2 x.y, clamped against roundoff
    sq = (
        np.sum(a**2, axis=1)[:, None]
        + np.sum(b**2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    np.clip(sq, 0.0, None, out=sq)

    matches = []
    for i in range(len(a)):
        row = sq[i]
        nearest_two = np.argpartition(row, 1)[:2]
        j1, j2 = int(nearest_two[0]), int(nearest_two[1])
        # recompute the two selected distances exactly (the matmul trick
        # carries roundoff, and self-distance must be exactly zero)
        d1 = float(np.linalg.norm(a[i] - b[j1]))
        d2 = float(np.linalg.norm(a[i] - b[j2]))
        if (d2, j2) < (d1, j1):
            j1, j2 = j2, j1
            d1, d2 = d2, d1
        matches.append(
            Match(
                index_a=i,
                index_b=j1,
                distance=d1,
                second_distance=d2,
                passed_ratio=bool(d1 < ratio * d2),
            )
        )
    return matches


def ratio_survivors(matches: list) -> list:
    return [m for m in matches if m.passed_ratio]
