"""Panel layout: scales, offsets, ordering and rulers as pure data.

All coordinates here are panel pixels with y growing *upward* (geologic
convention); the SVG renderer flips y once at emission time. Rectangle
``y`` is the bottom edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from . import circstats, strata
from .geom import horizontal_distance
from .model import Correlation, Dataset, GeoLog, Panel, Project, RockType

# Pixel tolerance below which correlation endpoints count as level.
STRAIGHT_SEGMENT_TOL_PX = 1e-9
# Vertical padding beyond the extreme picks, as a fraction of the log span.
CLIP_MARGIN_FRACTION = 0.05
# Fallback padding for single-pick logs whose span is zero.
CLIP_MARGIN_FALLBACK_M = 0.5

UNASSIGNED_FILL = "#ffffff"
SECONDARY_FILL = "#e8e2d9"


class NotAPermutation(ValueError):
    """New log order is not a permutation of the current one."""


class UnknownCorrelation(KeyError):
    """Leveling references a correlation that does not exist."""


@dataclass(frozen=True)
class PanelStyle:
    """Panel dimensions and scales; one global meters-to-px factor."""

    px_per_meter: float = 30.0
    log_gap_px: float = 120.0
    column_width_px: float = 120.0
    secondary_width_px: float = 16.0
    secondary_gap_px: float = 6.0
    rose_max_radius_px: float = 26.0
    rose_gap_px: float = 16.0
    phi_min: float = -6.0
    phi_max: float = 9.0
    label_font_px: float = 13.0
    ruler_font_px: float = 11.0
    margin_px: float = 28.0
    secondary_log_level: int = 1
    min_grain_fraction: float = 0.05


@dataclass(frozen=True)
class StratumRect:
    stratum_id: str
    x: float
    y: float
    w: float
    h: float
    fill: str
    dashed_right: bool


@dataclass(frozen=True)
class ContactSegment:
    contact_id: str
    x1: float
    x2: float
    y: float
    color: str
    weight: float
    dashed: bool


@dataclass(frozen=True)
class RosePlacement:
    stratum_id: str
    cx: float
    cy: float
    max_radius_px: float
    bin_counts: tuple[int, ...]
    radii: tuple[float, ...]
    mean_azimuth_deg: float | None
    total: int


@dataclass(frozen=True)
class LogColumn:
    log_id: str
    name: str
    x_origin_px: float
    y_offset_px: float
    rects: tuple[StratumRect, ...]
    secondary_rects: tuple[StratumRect, ...]
    contacts: tuple[ContactSegment, ...]
    roses: tuple[RosePlacement, ...]
    label_x_px: float


@dataclass(frozen=True)
class RulerSpan:
    left_log_id: str
    right_log_id: str
    distance_m: float
    x1: float
    x2: float
    label_x: float


@dataclass(frozen=True)
class CorrelationSegment:
    correlation_id: str
    left_log_id: str
    right_log_id: str
    x1: float
    y1: float
    x2: float
    y2: float
    curved: bool
    dashed: bool
    color: str


@dataclass(frozen=True)
class CorrelationPath:
    correlation_id: str
    segments: tuple[CorrelationSegment, ...]


@dataclass(frozen=True)
class PanelLayout:
    style: PanelStyle
    logs: tuple[LogColumn, ...]
    rulers: tuple[RulerSpan, ...]
    correlations: tuple[CorrelationPath, ...]
    y_min_px: float
    y_max_px: float
    width_px: float

    def log(self, log_id: str) -> LogColumn | None:
        for col in self.logs:
            if col.log_id == log_id:
                return col
        return None


def grain_width(rock: RockType, style: PanelStyle) -> float:
    """Width fraction in [0, 1] for a rock type on the logarithmic
    grain-size axis; coarser grains (smaller phi) are wider."""
    if not style.phi_min < style.phi_max:
        raise ValueError(f"phi_min must be < phi_max (got {style.phi_min}, {style.phi_max})")
    frac = (style.phi_max - rock.phi) / (style.phi_max - style.phi_min)
    return min(1.0, max(0.0, frac))


def _pick_height(log: GeoLog, contact_id: str) -> float:
    for pick in log.picks:
        if pick.contact_id == contact_id:
            return pick.true_height_m
    raise KeyError(f"log {log.id!r} has no pick for contact {contact_id!r}")


def compute_offsets(panel: Panel, logs: Sequence[GeoLog]) -> dict[str, float]:
    """Per-log vertical offset in px.

    Default mode anchors each log by the elevation of its reference plane:
    a contact lands at px_per_meter * (anchor_elevation + true_height).
    When leveling is set, participating logs are shifted so every contact
    of the baseline correlation maps to one shared y (the mean of their
    default positions, which keeps offsets independent of log order);
    non-participating logs keep their default offsets.
    """
    s = panel.style.px_per_meter
    offsets = {log.id: s * log.anchor_elevation_m for log in logs}
    if panel.leveling is None:
        return offsets

    baseline = next((c for c in panel.correlations if c.id == panel.leveling), None)
    if baseline is None:
        raise UnknownCorrelation(f"no correlation {panel.leveling!r}")

    by_id = {log.id: log for log in logs}
    participants: list[tuple[str, float]] = []  # (log_id, pick height)
    for log_id, contact_id in baseline.contact_refs:
        log = by_id.get(log_id)
        if log is None:
            continue
        participants.append((log_id, _pick_height(log, contact_id)))
    if len(participants) < 2:
        raise UnknownCorrelation(
            f"correlation {panel.leveling!r} references fewer than two logs in the panel"
        )

    target = sum(offsets[log_id] + s * h for log_id, h in participants) / len(participants)
    for log_id, h in participants:
        offsets[log_id] = target - s * h
    return offsets


def reorder_logs(panel: Panel, new_order: Sequence[str]) -> Panel:
    """Replace the log order; adjacency-derived data (rulers, correlation
    segments) follows on the next layout pass."""
    if sorted(new_order) != sorted(panel.log_order) or len(new_order) != len(panel.log_order):
        raise NotAPermutation(f"{list(new_order)} is not a permutation of {list(panel.log_order)}")
    return replace(panel, log_order=tuple(new_order))


def ruler_distances(panel: Panel, logs: Sequence[GeoLog]) -> list[float]:
    """Horizontal distances between reference-plane origins of logs
    adjacent in panel order."""
    by_id = {log.id: log for log in logs}
    ordered = [by_id[log_id] for log_id in panel.log_order if log_id in by_id]
    return [
        horizontal_distance(a.reference_plane.origin, b.reference_plane.origin)
        for a, b in zip(ordered, ordered[1:])
    ]


def _clip_bounds(log: GeoLog) -> tuple[float, float]:
    heights = [p.true_height_m for p in log.picks]
    if not heights:
        return (0.0, 0.0)
    low, high = min(heights), max(heights)
    span = high - low
    margin = CLIP_MARGIN_FRACTION * span if span > 0 else CLIP_MARGIN_FALLBACK_M
    return (low - margin, high + margin)


def _clip(interval: tuple[float, float], bounds: tuple[float, float]) -> tuple[float, float]:
    return (max(interval[0], bounds[0]), min(interval[1], bounds[1]))


def _layout_log(
    log: GeoLog,
    dataset: Dataset,
    panel: Panel,
    x_origin: float,
    y_offset: float,
) -> LogColumn:
    style = panel.style
    s = style.px_per_meter
    rocks = {r.id: r for r in panel.rock_catalog}
    bounds = _clip_bounds(log)

    rects: list[StratumRect] = []
    if log.picks:
        for leaf in strata.iter_leaves(log.tree):
            lo, hi = _clip(leaf.height_interval, bounds)
            if hi <= lo:
                continue
            rock = rocks.get(leaf.rock_type_id) if leaf.rock_type_id else None
            if rock is None:
                w = style.column_width_px
                fill = UNASSIGNED_FILL
            else:
                frac = max(style.min_grain_fraction, grain_width(rock, style))
                w = frac * style.column_width_px
                fill = rock.color
            rects.append(
                StratumRect(
                    stratum_id=leaf.id,
                    x=x_origin,
                    y=y_offset + s * lo,
                    w=w,
                    h=s * (hi - lo),
                    fill=fill,
                    dashed_right=leaf.rock_type_uncertain,
                )
            )

    contacts: list[ContactSegment] = []
    for pick in log.picks:
        contact = dataset.contact_by_id(pick.contact_id)
        if contact is None:
            continue
        contacts.append(
            ContactSegment(
                contact_id=contact.id,
                x1=x_origin,
                x2=x_origin + style.column_width_px,
                y=y_offset + s * pick.true_height_m,
                color=contact.color,
                weight=contact.line_weight,
                dashed=contact.uncertain,
            )
        )

    secondary: list[StratumRect] = []
    roses: list[RosePlacement] = []
    if log.picks:
        azimuth_by_id = {m.id: m.dip_azimuth_deg for m in dataset.crossbeds}
        sec_x = x_origin - style.secondary_gap_px - style.secondary_width_px
        rose_cx = x_origin + style.column_width_px + style.rose_gap_px + style.rose_max_radius_px
        for stratum in strata.cut_at_level(log.tree, style.secondary_log_level):
            lo, hi = _clip(stratum.height_interval, bounds)
            if hi <= lo:
                continue
            rock = rocks.get(stratum.rock_type_id) if stratum.rock_type_id else None
            secondary.append(
                StratumRect(
                    stratum_id=stratum.id,
                    x=sec_x,
                    y=y_offset + s * lo,
                    w=style.secondary_width_px,
                    h=s * (hi - lo),
                    fill=rock.color if rock else SECONDARY_FILL,
                    dashed_right=stratum.rock_type_uncertain,
                )
            )
            azimuths = strata.aggregate_azimuths(log.tree, stratum.id, azimuth_by_id)
            if azimuths:
                rose = circstats.rose_diagram(azimuths)
                roses.append(
                    RosePlacement(
                        stratum_id=stratum.id,
                        cx=rose_cx,
                        cy=y_offset + s * ((lo + hi) / 2.0),
                        max_radius_px=style.rose_max_radius_px,
                        bin_counts=rose.bin_counts,
                        radii=circstats.rose_radii(rose.bin_counts, style.rose_max_radius_px),
                        mean_azimuth_deg=rose.mean_azimuth_deg,
                        total=rose.total,
                    )
                )

    return LogColumn(
        log_id=log.id,
        name=log.name,
        x_origin_px=x_origin,
        y_offset_px=y_offset,
        rects=tuple(rects),
        secondary_rects=tuple(secondary),
        contacts=tuple(contacts),
        roses=tuple(roses),
        label_x_px=x_origin + style.column_width_px / 2.0,
    )


def correlation_paths(panel: Panel, layout: PanelLayout) -> tuple[CorrelationPath, ...]:
    """Drawable segments per correlation: one per pair of participating
    logs adjacent in panel order, straight when the endpoint ys match
    (leveled), cubic otherwise. Non-adjacent participants yield nothing."""
    order_index = {col.log_id: i for i, col in enumerate(layout.logs)}
    paths: list[CorrelationPath] = []
    for corr in panel.correlations:
        pair_flags: dict[frozenset[tuple[str, str]], bool] = {}
        for i, flag in enumerate(corr.segment_uncertain):
            if i + 1 < len(corr.contact_refs):
                pair_flags[frozenset((corr.contact_refs[i], corr.contact_refs[i + 1]))] = flag

        refs = sorted(
            (ref for ref in corr.contact_refs if ref[0] in order_index),
            key=lambda ref: order_index[ref[0]],
        )
        segments: list[CorrelationSegment] = []
        for left, right in zip(refs, refs[1:]):
            if order_index[right[0]] - order_index[left[0]] != 1:
                continue
            left_col = layout.log(left[0])
            right_col = layout.log(right[0])
            assert left_col is not None and right_col is not None
            left_seg = next((c for c in left_col.contacts if c.contact_id == left[1]), None)
            right_seg = next((c for c in right_col.contacts if c.contact_id == right[1]), None)
            if left_seg is None or right_seg is None:
                continue
            segments.append(
                CorrelationSegment(
                    correlation_id=corr.id,
                    left_log_id=left[0],
                    right_log_id=right[0],
                    x1=left_seg.x2,
                    y1=left_seg.y,
                    x2=right_seg.x1,
                    y2=right_seg.y,
                    curved=abs(left_seg.y - right_seg.y) > STRAIGHT_SEGMENT_TOL_PX,
                    dashed=pair_flags.get(frozenset((left, right)), False),
                    color=corr.color,
                )
            )
        paths.append(CorrelationPath(correlation_id=corr.id, segments=tuple(segments)))
    return tuple(paths)


def layout_panel(project: Project) -> PanelLayout:
    """Compute the full panel geometry for the current project state."""
    panel = project.panel
    style = panel.style
    by_id = {log.id: log for log in project.logs}
    ordered = [by_id[log_id] for log_id in panel.log_order if log_id in by_id]
    offsets = compute_offsets(panel, project.logs)

    block_w = (
        style.secondary_width_px
        + style.secondary_gap_px
        + style.column_width_px
        + style.rose_gap_px
        + 2.0 * style.rose_max_radius_px
    )
    columns: list[LogColumn] = []
    for i, log in enumerate(ordered):
        x_origin = (
            style.margin_px
            + i * (block_w + style.log_gap_px)
            + style.secondary_width_px
            + style.secondary_gap_px
        )
        columns.append(_layout_log(log, project.dataset, panel, x_origin, offsets[log.id]))

    rulers: list[RulerSpan] = []
    for left, right in zip(columns, columns[1:]):
        distance = horizontal_distance(
            by_id[left.log_id].reference_plane.origin, by_id[right.log_id].reference_plane.origin
        )
        rulers.append(
            RulerSpan(
                left_log_id=left.log_id,
                right_log_id=right.log_id,
                distance_m=distance,
                x1=left.label_x_px,
                x2=right.label_x_px,
                label_x=(left.label_x_px + right.label_x_px) / 2.0,
            )
        )

    ys: list[float] = []
    for col in columns:
        for rect in col.rects + col.secondary_rects:
            ys.extend((rect.y, rect.y + rect.h))
        for rose in col.roses:
            ys.extend((rose.cy - rose.max_radius_px, rose.cy + rose.max_radius_px))
        for seg in col.contacts:
            ys.append(seg.y)
    y_min = min(ys) if ys else 0.0
    y_max = max(ys) if ys else 0.0

    n = len(columns)
    width = 2 * style.margin_px + n * block_w + max(0, n - 1) * style.log_gap_px

    partial = PanelLayout(
        style=style,
        logs=tuple(columns),
        rulers=tuple(rulers),
        correlations=(),
        y_min_px=y_min,
        y_max_px=y_max,
        width_px=width,
    )
    return replace(partial, correlations=correlation_paths(panel, partial))
