"""Domain types shared across the pipeline, plus dataset validation.

All types are immutable values; collections are tuples / frozensets so
instances can be shared freely. Mutation happens by building replacements,
normally through the service layer.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .geom import Plane, Vec3

if TYPE_CHECKING:
    from .layout import PanelStyle

_ID_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.:-]*$")
_COLOR_RE = re.compile(r"^#[0-9a-fA-F]{6}$")


@dataclass(frozen=True)
class Contact:
    """A ranked, colored 3D polyline delineating two strata."""

    id: str
    name: str
    rank: int
    color: str
    line_weight: float
    points: tuple[Vec3, ...]
    uncertain: bool = False


@dataclass(frozen=True)
class CrossBedMeasurement:
    """Dip-and-strike result for one cross bed, optionally with the picked
    3D points it was derived from."""

    id: str
    dip_azimuth_deg: float
    dip_angle_deg: float
    centroid: Vec3
    source_points: tuple[Vec3, ...] = ()


@dataclass(frozen=True)
class RockType:
    """Grain-size class; ``phi`` is the Krumbein value -log2(diameter/mm)."""

    id: str
    name: str
    grain_size_mm: float
    phi: float
    color: str


@dataclass(frozen=True)
class ContactPick:
    """One picked point per contact per log; height is derived from the
    log's reference plane."""

    contact_id: str
    point: Vec3
    true_height_m: float


@dataclass(frozen=True)
class Stratum:
    """Node of the stratum tree: a height interval (low, high], optionally
    bounded by contacts, with sub-strata partitioning it exactly.

    Rock types and cross-bed assignments live on leaves only.
    """

    id: str
    height_interval: tuple[float, float]
    lower_contact_id: str | None
    upper_contact_id: str | None
    children: tuple["Stratum", ...] = ()
    rock_type_id: str | None = None
    rock_type_uncertain: bool = False
    crossbed_ids: frozenset[str] = frozenset()

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass(frozen=True)
class GeoLog:
    """A named log: reference plane, ordered contact picks, stratum tree."""

    id: str
    name: str
    reference_contact_id: str
    reference_plane: Plane
    picks: tuple[ContactPick, ...]
    tree: Stratum
    anchor_elevation_m: float


@dataclass(frozen=True)
class Correlation:
    """Asserted identity of a contact across two or more logs."""

    id: str
    contact_refs: tuple[tuple[str, str], ...]
    segment_uncertain: tuple[bool, ...]
    color: str


@dataclass(frozen=True)
class Panel:
    """Ordered logs, correlations and leveling state; the unit of layout,
    persistence and SVG export."""

    id: str
    log_order: tuple[str, ...]
    correlations: tuple[Correlation, ...]
    leveling: str | None
    rock_catalog: tuple[RockType, ...]
    style: "PanelStyle"


@dataclass(frozen=True)
class DatasetMetadata:
    source: str = ""
    crs_note: str = ""


@dataclass(frozen=True)
class Dataset:
    """Interpretation input: contacts plus cross-bed measurements."""

    contacts: tuple[Contact, ...] = ()
    crossbeds: tuple[CrossBedMeasurement, ...] = ()
    metadata: DatasetMetadata = field(default_factory=DatasetMetadata)

    def contact_by_id(self, contact_id: str) -> Contact | None:
        for c in self.contacts:
            if c.id == contact_id:
                return c
        return None

    def crossbed_by_id(self, crossbed_id: str) -> CrossBedMeasurement | None:
        for m in self.crossbeds:
            if m.id == crossbed_id:
                return m
        return None


@dataclass(frozen=True)
class Project:
    """Whole project state: dataset, derived logs, and the panel."""

    dataset: Dataset
    logs: tuple[GeoLog, ...]
    panel: Panel

    def log_by_id(self, log_id: str) -> GeoLog | None:
        for log in self.logs:
            if log.id == log_id:
                return log
        return None


@dataclass(frozen=True)
class ValidationFinding:
    severity: str  # "error" | "warning"
    object_id: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.object_id}: {self.message}"


def _err(object_id: str, message: str) -> ValidationFinding:
    return ValidationFinding("error", object_id, message)


def validate_dataset(dataset: Dataset) -> list[ValidationFinding]:
    """Check every dataset invariant; returns findings instead of raising.

    An empty list means the dataset is well-formed.
    """
    findings: list[ValidationFinding] = []

    seen: set[str] = set()
    for contact in dataset.contacts:
        if contact.id in seen:
            findings.append(_err(contact.id, "duplicate id"))
        seen.add(contact.id)
        if not _ID_RE.match(contact.id):
            findings.append(_err(contact.id, "id contains unsupported characters"))
        if len(contact.points) < 2:
            findings.append(_err(contact.id, f"points.len < 2 (got {len(contact.points)})"))
        if contact.rank < 0:
            findings.append(_err(contact.id, f"rank must be >= 0 (got {contact.rank})"))
        if not contact.line_weight > 0:
            findings.append(_err(contact.id, f"line_weight must be > 0 (got {contact.line_weight})"))
        if not _COLOR_RE.match(contact.color):
            findings.append(_err(contact.id, f"color must be #rrggbb (got {contact.color!r})"))

    seen = set()
    for bed in dataset.crossbeds:
        if bed.id in seen:
            findings.append(_err(bed.id, "duplicate id"))
        seen.add(bed.id)
        if not _ID_RE.match(bed.id):
            findings.append(_err(bed.id, "id contains unsupported characters"))
        if not 0.0 <= bed.dip_azimuth_deg < 360.0:
            findings.append(_err(bed.id, f"dip_azimuth_deg out of [0, 360) (got {bed.dip_azimuth_deg})"))
        if not 0.0 <= bed.dip_angle_deg <= 90.0:
            findings.append(_err(bed.id, f"dip_angle_deg out of [0, 90] (got {bed.dip_angle_deg})"))
        if bed.source_points and len(bed.source_points) < 3:
            findings.append(_err(bed.id, f"source_points.len < 3 (got {len(bed.source_points)})"))

    return findings


def validate_rock_catalog(catalog: tuple[RockType, ...]) -> list[ValidationFinding]:
    """Check catalog invariants: unique ids, positive sizes, phi consistency."""
    findings: list[ValidationFinding] = []
    seen: set[str] = set()
    for rock in catalog:
        if rock.id in seen:
            findings.append(_err(rock.id, "duplicate id"))
        seen.add(rock.id)
        if not rock.grain_size_mm > 0:
            findings.append(_err(rock.id, f"grain_size_mm must be > 0 (got {rock.grain_size_mm})"))
            continue
        expected_phi = -math.log2(rock.grain_size_mm)
        if abs(rock.phi - expected_phi) > 1e-9:
            findings.append(
                _err(rock.id, f"phi {rock.phi} does not match -log2(grain_size_mm) = {expected_phi}")
            )
        if not _COLOR_RE.match(rock.color):
            findings.append(_err(rock.id, f"color must be #rrggbb (got {rock.color!r})"))
    return findings


# Wentworth-style classes. Bounds in mm; the open-ended extremes take the
# bound itself as representative diameter, interior classes the geometric
# midpoint (consistent with the logarithmic grain-size axis).
_GRAIN_CLASSES: tuple[tuple[str, str, float | None, float | None, str], ...] = (
    ("clay", "Clay", None, 0.002, "#8c8c8c"),
    ("silt", "Silt", 0.002, 0.0625, "#b5a96a"),
    ("very-fine-sand", "Very fine sand", 0.0625, 0.125, "#e8d98f"),
    ("fine-sand", "Fine sand", 0.125, 0.25, "#eece73"),
    ("medium-sand", "Medium sand", 0.25, 0.5, "#f2bc58"),
    ("coarse-sand", "Coarse sand", 0.5, 2.0, "#f0a441"),
    ("pebble", "Pebble", 2.0, 63.0, "#d88736"),
    ("cobble", "Cobble", 63.0, None, "#a8642f"),
)


def default_rock_catalog() -> tuple[RockType, ...]:
    """Eight grain-size classes from clay to cobble with strictly
    decreasing phi."""
    catalog = []
    for rock_id, name, low, high, color in _GRAIN_CLASSES:
        if low is None:
            d = float(high)  # type: ignore[arg-type]
        elif high is None:
            d = float(low)
        else:
            d = math.sqrt(low * high)
        # 9 significant decimals so the sizes survive canonical serialization.
        d = float(f"{d:.9g}")
        catalog.append(
            RockType(id=rock_id, name=name, grain_size_mm=d, phi=-math.log2(d), color=color)
        )
    return tuple(catalog)
