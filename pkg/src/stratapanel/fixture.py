"""Synthetic four-outcrop canyon fixture at the scale of the evaluation
campaign: 4 logs, 62 contacts (58 bounded thickness intervals), 18
cross-bed-bearing strata with 129 measurements, 2 correlations.

Construction is fully deterministic (seeded ``random.Random``, uniform
noise only) and every stored coordinate is rounded to 4 decimals, so the
canonical 9-significant-digit serialization is lossless and golden SVG
files stay stable across runs and processes.
"""

from __future__ import annotations

import math
import random

from . import strata
from .geom import Vec3, fit_plane, dip_and_strike
from .layout import PanelStyle
from .model import (
    Contact,
    Correlation,
    CrossBedMeasurement,
    Dataset,
    DatasetMetadata,
    GeoLog,
    Panel,
    Project,
    default_rock_catalog,
)

_SEED = 8231847

RANK0_COLOR = "#c62828"
RANK1_COLOR = "#ef6c00"

# Outcrops along the canyon; anchor separations are exact (412, 260, 300 m).
_OUTCROPS = (
    ("sol2", "Sol2", (0.0, 0.0), 84.0),
    ("sol3", "Sol3", (412.0, 0.0), 96.0),
    ("sol4", "Sol4", (620.0, 156.0), 78.0),
    ("sol5", "Sol5", (800.0, 396.0), 92.0),
)

# Regional layering: gentle dip toward ESE.
_REGIONAL_DIP_DEG = 4.0
_REGIONAL_DIP_AZIMUTH_DEG = 100.0
_BASE_ELEVATION_M = 1318.0

# Unit (rank 0) boundary heights relative to the reference boundary U2.
_UNIT_OFFSETS = (-7.2, -3.6, 0.0, 4.8, 9.0)
_REFERENCE_UNIT = 2  # U2 defines each log's reference plane

# Bedset (rank 1) boundary heights; logs with 15 picks drop the last one.
_BEDSET_OFFSETS = (-6.3, -5.1, -2.7, -1.8, -0.9, 1.2, 2.1, 3.0, 3.9, 6.0, 7.5)
_BEDSET_COUNTS = {"sol2": 11, "sol3": 10, "sol4": 11, "sol5": 10}

_UNCERTAIN_CONTACTS = frozenset({"sol2-b03", "sol4-b07", "sol5-b01"})

# Cross-bed measurement counts per target stratum (totals 129 over 18 strata).
_CROSSBED_PLAN = {
    "sol2": ((2, 9), (5, 7), (8, 8), (11, 6), (13, 10)),
    "sol3": ((2, 7), (5, 6), (9, 8), (12, 5)),
    "sol4": ((1, 9), (4, 8), (7, 7), (10, 6), (13, 10)),
    "sol5": ((3, 5), (6, 6), (9, 7), (12, 5)),
}
_PALEOCURRENT_AZIMUTH = {"sol2": 105.0, "sol3": 95.0, "sol4": 112.0, "sol5": 88.0}

_WALL_AZIMUTH = {"sol2": 78.0, "sol3": 86.0, "sol4": 64.0, "sol5": 70.0}


def _r4(x: float) -> float:
    return round(x, 4)


def _regional_elevation(x: float, y: float) -> float:
    az = math.radians(_REGIONAL_DIP_AZIMUTH_DEG)
    slope = math.tan(math.radians(_REGIONAL_DIP_DEG))
    return _BASE_ELEVATION_M - slope * (math.sin(az) * x + math.cos(az) * y)


def _boundary_elevation(x: float, y: float, offset_m: float) -> float:
    # offset is perpendicular to the layering; vertical gap = offset / cos(dip)
    return _regional_elevation(x, y) + offset_m / math.cos(math.radians(_REGIONAL_DIP_DEG))


def _reference_contact_points(anchor: tuple[float, float]) -> tuple[Vec3, ...]:
    # Integer vertices, symmetric along east and across the wall, keep the
    # fitted origin's (x, y) exactly at the anchor, which pins the ruler
    # distances of the fixture. The transverse spread keeps the fit
    # well-conditioned (a straight polyline cannot define a plane).
    ax, ay = anchor
    points = []
    for t in (-40, -30, -20, -10, 10, 20, 30, 40):
        x, y = ax + t, ay + (3 if t < 0 else -3)
        points.append((float(x), float(y), _r4(_boundary_elevation(x, y, 0.0))))
    return tuple(points)


def _contact_points(
    rng: random.Random, anchor: tuple[float, float], wall_azimuth_deg: float,
    half_length: float, offset_m: float,
) -> tuple[Vec3, ...]:
    ax, ay = anchor
    az = math.radians(wall_azimuth_deg)
    wx, wy = math.sin(az), math.cos(az)
    px, py = math.cos(az), -math.sin(az)
    points = []
    for i in range(9):
        t = -half_length + i * (2.0 * half_length / 8.0)
        wiggle = rng.uniform(-1.5, 1.5)
        x = ax + t * wx + wiggle * px
        y = ay + t * wy + wiggle * py
        z = _boundary_elevation(x, y, offset_m) + rng.uniform(-0.05, 0.05)
        points.append((_r4(x), _r4(y), _r4(z)))
    return tuple(points)


def _crossbed(
    rng: random.Random, bed_id: str, anchor: tuple[float, float],
    wall_azimuth_deg: float, half_length: float, offset_m: float, mean_azimuth: float,
) -> CrossBedMeasurement:
    az = math.radians(wall_azimuth_deg)
    wx, wy = math.sin(az), math.cos(az)
    t = rng.uniform(-half_length * 0.8, half_length * 0.8)
    cx, cy = anchor[0] + t * wx, anchor[1] + t * wy
    cz = _boundary_elevation(cx, cy, offset_m)

    dip = rng.uniform(12.0, 24.0)
    dip_az = (mean_azimuth + rng.uniform(-15.0, 15.0)) % 360.0
    d, a = math.radians(dip), math.radians(dip_az)
    # In-plane basis: strike direction and down-dip direction.
    strike = (math.sin(a - math.pi / 2.0), math.cos(a - math.pi / 2.0), 0.0)
    downdip = (math.sin(a) * math.cos(d), math.cos(a) * math.cos(d), -math.sin(d))
    points = []
    for u, v in ((-2.0, -1.0), (-2.0, 1.0), (0.0, -1.0), (0.0, 1.0), (2.0, -1.0), (2.0, 1.0)):
        points.append(
            (
                _r4(cx + u * strike[0] + v * downdip[0] + rng.uniform(-0.01, 0.01)),
                _r4(cy + u * strike[1] + v * downdip[1] + rng.uniform(-0.01, 0.01)),
                _r4(cz + u * strike[2] + v * downdip[2] + rng.uniform(-0.01, 0.01)),
            )
        )
    plane = fit_plane(points)
    ds = dip_and_strike(plane)
    return CrossBedMeasurement(
        id=bed_id,
        dip_azimuth_deg=ds.dip_azimuth_deg if ds.dip_azimuth_deg is not None else 0.0,
        dip_angle_deg=ds.dip_angle_deg,
        centroid=plane.origin,
        source_points=tuple(points),
    )


def hbdq_dataset() -> Dataset:
    """The synthetic interpretation input (62 contacts, 129 cross beds)."""
    rng = random.Random(_SEED)
    contacts: list[Contact] = []
    crossbeds: list[CrossBedMeasurement] = []

    for log_id, log_name, anchor, half_length in _OUTCROPS:
        wall_az = _WALL_AZIMUTH[log_id]
        jitter = {off: rng.uniform(-0.15, 0.15) for off in _UNIT_OFFSETS + _BEDSET_OFFSETS}
        jitter[_UNIT_OFFSETS[_REFERENCE_UNIT]] = 0.0

        for k, offset in enumerate(_UNIT_OFFSETS):
            contact_id = f"{log_id}-u{k}"
            if k == _REFERENCE_UNIT:
                points = _reference_contact_points(anchor)
            else:
                points = _contact_points(rng, anchor, wall_az, half_length, offset + jitter[offset])
            contacts.append(
                Contact(
                    id=contact_id,
                    name=f"{log_name} U{k}",
                    rank=0,
                    color=RANK0_COLOR,
                    line_weight=2.5,
                    points=points,
                    uncertain=False,
                )
            )
        for j, offset in enumerate(_BEDSET_OFFSETS[: _BEDSET_COUNTS[log_id]]):
            contact_id = f"{log_id}-b{j:02d}"
            contacts.append(
                Contact(
                    id=contact_id,
                    name=f"{log_name} B{j}",
                    rank=1,
                    color=RANK1_COLOR,
                    line_weight=1.5,
                    points=_contact_points(rng, anchor, wall_az, half_length, offset + jitter[offset]),
                    uncertain=contact_id in _UNCERTAIN_CONTACTS,
                )
            )

        mean_az = _PALEOCURRENT_AZIMUTH[log_id]
        bed_index = 0
        all_offsets = sorted(_UNIT_OFFSETS + _BEDSET_OFFSETS[: _BEDSET_COUNTS[log_id]])
        for leaf_index, count in _CROSSBED_PLAN[log_id]:
            # Bounded leaf i spans all_offsets[i] .. all_offsets[i + 1].
            lo, hi = all_offsets[leaf_index], all_offsets[leaf_index + 1]
            for _ in range(count):
                bed_index += 1
                mid = lo + (hi - lo) * rng.uniform(0.3, 0.7)
                crossbeds.append(
                    _crossbed(
                        rng, f"{log_id}-xb{bed_index:03d}", anchor, _WALL_AZIMUTH[log_id],
                        half_length, mid, mean_az,
                    )
                )

    return Dataset(
        contacts=tuple(contacts),
        crossbeds=tuple(crossbeds),
        metadata=DatasetMetadata(source="HBDQ synthetic fixture", crs_note="local ENU meters, z up"),
    )


def _build_log(log_id: str, log_name: str, dataset: Dataset, rng: random.Random) -> GeoLog:
    own = [c for c in dataset.contacts if c.id.startswith(f"{log_id}-")]
    picks = [(c.id, c.points[4]) for c in own]
    log = strata.derive_log(log_id, log_name, f"{log_id}-u{_REFERENCE_UNIT}", picks, dataset)

    catalog = default_rock_catalog()
    catalog_ids = [r.id for r in catalog]
    known_beds = {m.id for m in dataset.crossbeds}
    tree = log.tree
    bounded = [leaf for leaf in strata.iter_leaves(tree) if leaf.lower_contact_id and leaf.upper_contact_id]
    for leaf in bounded:
        tree = strata.assign_rock_type(
            tree, leaf.id, rng.choice(catalog_ids), rng.random() < 0.18, catalog_ids=catalog_ids
        )

    own_beds = sorted(m.id for m in dataset.crossbeds if m.id.startswith(f"{log_id}-"))
    cursor = 0
    for leaf_index, count in _CROSSBED_PLAN[log_id]:
        beds = own_beds[cursor : cursor + count]
        cursor += count
        tree = strata.assign_crossbeds(tree, bounded[leaf_index].id, beds, known_ids=known_beds)

    return GeoLog(
        id=log.id,
        name=log.name,
        reference_contact_id=log.reference_contact_id,
        reference_plane=log.reference_plane,
        picks=log.picks,
        tree=tree,
        anchor_elevation_m=log.anchor_elevation_m,
    )


def hbdq_project(dataset: Dataset | None = None) -> Project:
    """Full project: four annotated logs plus two panel-wide correlations."""
    if dataset is None:
        dataset = hbdq_dataset()
    rng = random.Random(_SEED + 1)
    logs = tuple(
        _build_log(log_id, log_name, dataset, rng) for log_id, log_name, _, _ in _OUTCROPS
    )
    correlations = (
        Correlation(
            id="corr-1",
            contact_refs=tuple((log.id, f"{log.id}-u4") for log in logs),
            segment_uncertain=(False, False, False),
            color=RANK0_COLOR,
        ),
        Correlation(
            id="corr-2",
            contact_refs=tuple((log.id, f"{log.id}-u1") for log in logs),
            segment_uncertain=(True, False, True),
            color=RANK0_COLOR,
        ),
    )
    panel = Panel(
        id="hbdq",
        log_order=tuple(log.id for log in logs),
        correlations=correlations,
        leveling=None,
        rock_catalog=default_rock_catalog(),
        style=PanelStyle(),
    )
    return Project(dataset=dataset, logs=logs, panel=panel)


def hbdq_initial_project(dataset: Dataset | None = None) -> Project:
    """The same fixture before any logging: dataset only, empty panel."""
    if dataset is None:
        dataset = hbdq_dataset()
    panel = Panel(
        id="hbdq",
        log_order=(),
        correlations=(),
        leveling=None,
        rock_catalog=default_rock_catalog(),
        style=PanelStyle(),
    )
    return Project(dataset=dataset, logs=(), panel=panel)


def replay_script(project: Project) -> list[dict]:
    """The full T1-T3 interaction sequence that reproduces ``project``
    through the HTTP API, as a list of request descriptions."""
    steps: list[dict] = []
    for log in project.logs:
        steps.append(
            {
                "op": "create_log",
                "name": log.name,
                "reference_contact_id": log.reference_contact_id,
                "picks": [{"contact_id": p.contact_id, "point": list(p.point)} for p in log.picks],
            }
        )
        for leaf in strata.iter_leaves(log.tree):
            if leaf.rock_type_id is None and not leaf.crossbed_ids:
                continue
            steps.append(
                {
                    "op": "patch_stratum",
                    "log_id": log.id,
                    "stratum_id": leaf.id,
                    "rock_type_id": leaf.rock_type_id,
                    "uncertain": leaf.rock_type_uncertain,
                    "crossbed_ids": sorted(leaf.crossbed_ids),
                }
            )
    for corr in project.panel.correlations:
        steps.append(
            {
                "op": "create_correlation",
                "contact_refs": [list(ref) for ref in corr.contact_refs],
                "segment_uncertain": list(corr.segment_uncertain),
                "color": corr.color,
            }
        )
    steps.append({"op": "order", "log_order": list(project.panel.log_order)})
    return steps
