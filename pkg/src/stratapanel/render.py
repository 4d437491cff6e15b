"""Deterministic SVG emission of a panel layout, and the 2D outcrop strip.

Output is plain SVG 1.1 (rect, path, line, circle, text, g), no scripts or
external references, so exports open cleanly in vector editors. Identical
input produces byte-identical output; every interactive element carries a
stable ``data-`` id matching its model object.

SVG y grows downward; layout y (up-positive) is flipped exactly once here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .geom import DegenerateGeometry
from .layout import PanelLayout, RosePlacement
from .model import Contact, Panel

FONT_FAMILY = "Helvetica, Arial, sans-serif"
DASH_PATTERN = "6,4"
RECT_STROKE = "#4a4a4a"
ROSE_FILL = "#6b7f94"
ROSE_MEAN_COLOR = "#d32f2f"
RULER_COLOR = "#7a7a7a"


def _fmt(x: float) -> str:
    if x == 0.0:
        return "0"
    text = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _attrs(**kwargs: object) -> str:
    parts = []
    for key, value in kwargs.items():
        if value is None:
            continue
        name = key.replace("_", "-")
        if isinstance(value, float):
            parts.append(f'{name}="{_fmt(value)}"')
        elif isinstance(value, (int, str)):
            text = quoteattr(str(value))
            parts.append(f"{name}={text}")
    return " ".join(parts)


class _Svg:
    def __init__(self) -> None:
        self.lines: list[str] = []

    def open(self, tag: str, **kwargs: object) -> None:
        self.lines.append(f"<{tag} {_attrs(**kwargs)}>".replace(" >", ">"))

    def close(self, tag: str) -> None:
        self.lines.append(f"</{tag}>")

    def leaf(self, tag: str, **kwargs: object) -> None:
        self.lines.append(f"<{tag} {_attrs(**kwargs)}/>")

    def text(self, content: str, **kwargs: object) -> None:
        self.lines.append(f"<text {_attrs(**kwargs)}>{escape(content)}</text>")


def _rose(svg: _Svg, log_id: str, rose: RosePlacement, cy_svg: float) -> None:
    cx = rose.cx
    svg.open("g", id=f"rose-{log_id}-{rose.stratum_id}", data_stratum_id=rose.stratum_id)
    svg.leaf(
        "circle", cx=cx, cy=cy_svg, r=rose.max_radius_px, fill="none",
        stroke="#c9c9c9", stroke_width=0.6,
    )
    for k, r in enumerate(rose.radii):
        if r <= 0.0:
            continue
        a0 = math.radians(k * 15.0)
        a1 = math.radians((k + 1) * 15.0)
        # Compass angles: 0 = north = up; SVG y points down, so north is -y.
        x0, y0 = cx + r * math.sin(a0), cy_svg - r * math.cos(a0)
        x1, y1 = cx + r * math.sin(a1), cy_svg - r * math.cos(a1)
        d = (
            f"M {_fmt(cx)} {_fmt(cy_svg)} L {_fmt(x0)} {_fmt(y0)} "
            f"A {_fmt(r)} {_fmt(r)} 0 0 1 {_fmt(x1)} {_fmt(y1)} Z"
        )
        svg.leaf("path", d=d, fill=ROSE_FILL, fill_opacity=0.5)
    if rose.mean_azimuth_deg is not None:
        a = math.radians(rose.mean_azimuth_deg)
        mx = cx + rose.max_radius_px * math.sin(a)
        my = cy_svg - rose.max_radius_px * math.cos(a)
        svg.leaf(
            "line", x1=cx, y1=cy_svg, x2=mx, y2=my,
            stroke=ROSE_MEAN_COLOR, stroke_width=1.5,
        )
    svg.close("g")


def render_panel(panel: Panel, layout: PanelLayout) -> str:
    """Serialize a panel layout to a standalone SVG document string."""
    style = layout.style
    name_y = style.margin_px + style.label_font_px
    ruler_y = name_y + 18.0
    content_top = ruler_y + 22.0
    height = content_top + (layout.y_max_px - layout.y_min_px) + style.margin_px
    width = layout.width_px

    def sy(y: float) -> float:
        return content_top + (layout.y_max_px - y)

    svg = _Svg()
    svg.lines.append('<?xml version="1.0" encoding="UTF-8"?>')
    svg.open(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        version="1.1",
        width=width,
        height=height,
        viewBox=f"0 0 {_fmt(width)} {_fmt(height)}",
        data_panel_id=panel.id,
    )
    svg.leaf("defs")
    svg.leaf("rect", id="frame", x=0, y=0, width=width, height=height, fill="#ffffff", stroke="#d0d0d0")

    svg.open("g", id="rulers", font_family=FONT_FAMILY, font_size=style.ruler_font_px, fill="#3c3c3c")
    for ruler in layout.rulers:
        svg.leaf("line", x1=ruler.x1, y1=ruler_y, x2=ruler.x2, y2=ruler_y, stroke=RULER_COLOR, stroke_width=1.0)
        for x in (ruler.x1, ruler.x2):
            svg.leaf("line", x1=x, y1=ruler_y - 4.0, x2=x, y2=ruler_y + 4.0, stroke=RULER_COLOR, stroke_width=1.0)
        svg.text(f"{round(ruler.distance_m)} m", x=ruler.label_x, y=ruler_y - 5.0, text_anchor="middle")
    svg.close("g")

    for col in layout.logs:
        svg.open("g", id=f"log-{col.log_id}", data_log_id=col.log_id)
        svg.text(
            col.name, x=col.label_x_px, y=name_y, text_anchor="middle",
            font_family=FONT_FAMILY, font_size=style.label_font_px, font_weight="bold", fill="#222222",
        )
        svg.open("g", id=f"log-{col.log_id}-secondary")
        for rect in col.secondary_rects:
            svg.leaf(
                "rect", x=rect.x, y=sy(rect.y + rect.h), width=rect.w, height=rect.h,
                fill=rect.fill, stroke=RECT_STROKE, stroke_width=0.6, data_stratum_id=rect.stratum_id,
            )
        svg.close("g")
        svg.open("g", id=f"log-{col.log_id}-strata")
        for rect in col.rects:
            top = sy(rect.y + rect.h)
            svg.leaf(
                "rect", x=rect.x, y=top, width=rect.w, height=rect.h,
                fill=rect.fill, stroke=RECT_STROKE, stroke_width=0.6, data_stratum_id=rect.stratum_id,
            )
            if rect.dashed_right:
                x_edge = rect.x + rect.w
                svg.leaf("line", x1=x_edge, y1=top, x2=x_edge, y2=top + rect.h, stroke="#ffffff", stroke_width=1.6)
                svg.leaf(
                    "line", x1=x_edge, y1=top, x2=x_edge, y2=top + rect.h,
                    stroke=RECT_STROKE, stroke_width=1.2, stroke_dasharray=DASH_PATTERN,
                )
        svg.close("g")
        svg.open("g", id=f"log-{col.log_id}-contacts")
        for seg in col.contacts:
            svg.leaf(
                "line", x1=seg.x1, y1=sy(seg.y), x2=seg.x2, y2=sy(seg.y),
                stroke=seg.color, stroke_width=seg.weight,
                stroke_dasharray=DASH_PATTERN if seg.dashed else None,
                data_contact_id=seg.contact_id,
            )
        svg.close("g")
        for rose in col.roses:
            _rose(svg, col.log_id, rose, sy(rose.cy))
        svg.close("g")

    for path in layout.correlations:
        svg.open("g", id=f"correlation-{path.correlation_id}", data_correlation_id=path.correlation_id)
        for seg in path.segments:
            x1, y1 = seg.x1, sy(seg.y1)
            x2, y2 = seg.x2, sy(seg.y2)
            if seg.curved:
                # Symmetric cubic with horizontal tangents at both ends.
                dx = (x2 - x1) * 0.45
                d = (
                    f"M {_fmt(x1)} {_fmt(y1)} C {_fmt(x1 + dx)} {_fmt(y1)}, "
                    f"{_fmt(x2 - dx)} {_fmt(y2)}, {_fmt(x2)} {_fmt(y2)}"
                )
            else:
                d = f"M {_fmt(x1)} {_fmt(y1)} L {_fmt(x2)} {_fmt(y2)}"
            svg.leaf(
                "path", d=d, fill="none", stroke=seg.color, stroke_width=2.0,
                stroke_dasharray=DASH_PATTERN if seg.dashed else None,
            )
        svg.close("g")

    svg.close("svg")
    return "\n".join(svg.lines) + "\n"


@dataclass(frozen=True)
class StripPolyline:
    """One contact projected into the outcrop strip; ``points`` are (s, z)
    with s meters along the principal horizontal direction, and
    ``points_3d`` the matching original vertices."""

    contact_id: str
    points: tuple[tuple[float, float], ...]
    points_3d: tuple[tuple[float, float, float], ...]


def project_outcrop_strip(contacts: Sequence[Contact]) -> list[StripPolyline]:
    """Project contact polylines onto the (s, z) outcrop strip.

    s is the scalar projection of (x, y) onto the first principal direction
    of all contact points' horizontal coordinates; z is kept. The axis is
    oriented toward increasing x (ties toward increasing y).
    """
    all_xy = [(p[0], p[1]) for c in contacts for p in c.points]
    if not all_xy:
        raise DegenerateGeometry("no contact points to project")
    coords = np.asarray(all_xy, dtype=float)
    centered = coords - coords.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] <= 1e-12:
        raise DegenerateGeometry("contact points are horizontally coincident")
    direction = vt[0]
    if direction[0] < -1e-9 or (abs(direction[0]) <= 1e-9 and direction[1] < 0.0):
        direction = -direction

    dx, dy = float(direction[0]), float(direction[1])
    polylines = []
    for contact in contacts:
        pts = tuple((p[0] * dx + p[1] * dy, p[2]) for p in contact.points)
        polylines.append(StripPolyline(contact_id=contact.id, points=pts, points_3d=contact.points))
    return polylines
