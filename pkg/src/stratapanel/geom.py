"""3D geometry kernel: plane fitting, dip/strike extraction, true height.

Coordinates are local ENU meters (x = east, y = north, z = up). Compass
azimuths are degrees clockwise from north: 0 = N, 90 = E, 180 = S, 270 = W.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

Vec3 = tuple[float, float, float]

# Below this dip the plane is treated as horizontal and azimuths are undefined.
HORIZONTAL_DIP_CUTOFF_DEG = 0.5

_COLLINEAR_RTOL = 1e-9


class TooFewPoints(ValueError):
    """Plane fitting needs at least three points."""


class DegenerateGeometry(ValueError):
    """Input points do not span the required dimensions."""


@dataclass(frozen=True)
class Plane:
    """Total-least-squares plane through a point cloud.

    ``origin`` is the centroid of the fitted points, ``normal`` the unit
    normal oriented so that ``normal[2] >= 0``, and ``rms_residual_m`` the
    root-mean-square orthogonal distance of the points to the plane.
    """

    origin: Vec3
    normal: Vec3
    rms_residual_m: float


@dataclass(frozen=True)
class DipStrike:
    """Dip angle plus dip/strike azimuths; azimuths are None when the plane
    is horizontal within :data:`HORIZONTAL_DIP_CUTOFF_DEG`."""

    dip_angle_deg: float
    dip_azimuth_deg: float | None
    strike_azimuth_deg: float | None


def fit_plane(points: Iterable[Sequence[float]]) -> Plane:
    """Fit a plane minimizing the sum of squared orthogonal distances.

    Parameters
    ----------
    points:
        At least three 3D positions, not all collinear.

    Returns
    -------
    Plane
        Origin at the centroid; unit normal along the smallest principal
        direction of the centered points, sign-fixed so normal.z >= 0
        (ties broken toward normal.y >= 0, then normal.x >= 0).

    Raises
    ------
    TooFewPoints
        Fewer than three input points.
    DegenerateGeometry
        Points collinear (or coincident) within 1e-9 relative tolerance.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) point array, got shape {pts.shape}")
    n = pts.shape[0]
    if n < 3:
        raise TooFewPoints(f"plane fit needs >= 3 points, got {n}")

    centroid = pts.mean(axis=0)
    centered = pts - centroid
    # Singular values sorted descending; the smallest right-singular vector
    # is the plane normal. Collinear input leaves only one significant value.
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] == 0.0 or svals[1] <= _COLLINEAR_RTOL * svals[0]:
        raise DegenerateGeometry("points are collinear within tolerance; plane is underdetermined")

    normal = vt[2]
    nx, ny, nz = normal
    if nz < 0.0 or (nz == 0.0 and (ny < 0.0 or (ny == 0.0 and nx < 0.0))):
        normal = -normal

    rms = float(svals[2]) / math.sqrt(n)
    return Plane(
        origin=(float(centroid[0]), float(centroid[1]), float(centroid[2])),
        normal=(float(normal[0]), float(normal[1]), float(normal[2])),
        rms_residual_m=rms,
    )


def dip_and_strike(plane: Plane) -> DipStrike:
    """Extract dip angle and dip/strike azimuths from a plane.

    The dip direction is the normalized projection of straight-down
    (0, 0, -1) onto the plane; for a normal with nz > 0 its horizontal
    component points along (nx, ny). The strike is 90 degrees
    counterclockwise of the dip azimuth.
    """
    nx, ny, nz = plane.normal
    dip_deg = math.degrees(math.acos(min(1.0, max(-1.0, nz))))
    if dip_deg < HORIZONTAL_DIP_CUTOFF_DEG:
        return DipStrike(dip_angle_deg=dip_deg, dip_azimuth_deg=None, strike_azimuth_deg=None)
    dip_az = math.degrees(math.atan2(nx, ny)) % 360.0
    strike_az = (dip_az - 90.0) % 360.0
    return DipStrike(dip_angle_deg=dip_deg, dip_azimuth_deg=dip_az, strike_azimuth_deg=strike_az)


def true_height(plane: Plane, point: Sequence[float]) -> float:
    """Signed orthogonal height of ``point`` above ``plane`` in meters."""
    ox, oy, oz = plane.origin
    nx, ny, nz = plane.normal
    return (point[0] - ox) * nx + (point[1] - oy) * ny + (point[2] - oz) * nz


def horizontal_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance of the (x, y) components, ignoring elevation."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def nearest_point_on_polyline(
    point: Sequence[float], polyline: Sequence[Sequence[float]]
) -> tuple[Vec3, float]:
    """Closest point on a 3D polyline and its distance to ``point``."""
    if not polyline:
        raise ValueError("polyline has no points")
    px, py, pz = float(point[0]), float(point[1]), float(point[2])
    best: Vec3 = (float(polyline[0][0]), float(polyline[0][1]), float(polyline[0][2]))
    best_d2 = (px - best[0]) ** 2 + (py - best[1]) ** 2 + (pz - best[2]) ** 2
    for a, b in zip(polyline, polyline[1:]):
        ax, ay, az = a[0], a[1], a[2]
        vx, vy, vz = b[0] - ax, b[1] - ay, b[2] - az
        vv = vx * vx + vy * vy + vz * vz
        t = 0.0 if vv == 0.0 else ((px - ax) * vx + (py - ay) * vy + (pz - az) * vz) / vv
        t = min(1.0, max(0.0, t))
        qx, qy, qz = ax + t * vx, ay + t * vy, az + t * vz
        d2 = (px - qx) ** 2 + (py - qy) ** 2 + (pz - qz) ** 2
        if d2 < best_d2:
            best = (float(qx), float(qy), float(qz))
            best_d2 = d2
    return best, math.sqrt(best_d2)
