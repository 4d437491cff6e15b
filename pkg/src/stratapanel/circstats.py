"""Circular statistics and rose-diagram geometry for dip azimuths.

Rose diagrams use 24 angular bins of 15 degrees each; frequency is encoded
in sector *area*, so radii grow with the square root of the count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

N_BINS = 24
BIN_WIDTH_DEG = 360.0 / N_BINS

# Resultant vectors shorter than this have no meaningful mean direction.
_RESULTANT_EPS = 1e-9


@dataclass(frozen=True)
class RoseDiagram:
    """Binned azimuth distribution; bin k covers [15k, 15(k+1)) degrees."""

    bin_counts: tuple[int, ...]
    mean_azimuth_deg: float | None
    total: int


def bin_azimuths(azimuths: Iterable[float]) -> tuple[int, ...]:
    """Count azimuths into 24 bins of 15 degrees.

    Values are normalized into [0, 360) first; a value exactly on a bin
    boundary belongs to the upper bin (15.0 -> bin 1).
    """
    counts = [0] * N_BINS
    for a in azimuths:
        k = int((a % 360.0) // BIN_WIDTH_DEG)
        counts[min(k, N_BINS - 1)] += 1
    return tuple(counts)


def mean_azimuth(azimuths: Sequence[float]) -> float | None:
    """Circular mean direction in [0, 360), or None when the resultant
    vector (sum of unit vectors) is shorter than 1e-9 or the input is empty."""
    if not azimuths:
        return None
    sin_sum = 0.0
    cos_sum = 0.0
    for a in azimuths:
        r = math.radians(a)
        sin_sum += math.sin(r)
        cos_sum += math.cos(r)
    if math.hypot(sin_sum, cos_sum) < _RESULTANT_EPS:
        return None
    return math.degrees(math.atan2(sin_sum, cos_sum)) % 360.0


def rose_radii(bin_counts: Sequence[int], max_radius_px: float) -> tuple[float, ...]:
    """Area-true sector radii: r_k = R * sqrt(count_k / max_count).

    All-zero counts map to all-zero radii.
    """
    if max_radius_px <= 0:
        raise ValueError(f"max_radius_px must be > 0 (got {max_radius_px})")
    peak = max(bin_counts, default=0)
    if peak == 0:
        return tuple(0.0 for _ in bin_counts)
    return tuple(max_radius_px * math.sqrt(c / peak) for c in bin_counts)


def rose_diagram(azimuths: Sequence[float]) -> RoseDiagram:
    """Bin azimuths and compute the mean direction in one pass."""
    counts = bin_azimuths(azimuths)
    return RoseDiagram(bin_counts=counts, mean_azimuth_deg=mean_azimuth(azimuths), total=sum(counts))
