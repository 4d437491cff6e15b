"""Local HTTP JSON API exposing the project state to the UI.

One writer, many readers: the project is an immutable snapshot swapped
atomically per mutation under a lock, together with a monotonically
increasing revision. GETs never change the revision; mutations may carry
``expected_revision`` and fail with 409 when stale.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Callable, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import HTMLResponse, JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import io as pio
from . import layout as playout
from . import render as prender
from . import strata
from .geom import (
    DegenerateGeometry,
    TooFewPoints,
    Vec3,
    dip_and_strike,
    fit_plane,
    nearest_point_on_polyline,
)
from .model import Correlation, Dataset, GeoLog, Panel, Project, Stratum, default_rock_catalog

PICK_SNAP_TOLERANCE_M = pio.PICK_SNAP_TOLERANCE_M


class _StateBox:
    """Single-writer project holder; ``snapshot`` is swapped atomically."""

    def __init__(self, project: Project, data_dir: Path | None = None):
        self.lock = threading.Lock()
        self.snapshot: tuple[Project, int] = (project, 0)
        self.data_dir = data_dir

    def read(self) -> tuple[Project, int]:
        return self.snapshot

    def mutate(
        self, fn: Callable[[Project], tuple[Project, Any]], expected_revision: int | None
    ) -> tuple[int, Any]:
        with self.lock:
            project, revision = self.snapshot
            if expected_revision is not None and expected_revision != revision:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale revision: expected {expected_revision}, current {revision}",
                )
            new_project, result = fn(project)
            revision += 1
            self.snapshot = (new_project, revision)
            if self.data_dir is not None:
                self._persist(new_project)
            return revision, result

    def _persist(self, project: Project) -> None:
        self.data_dir.mkdir(parents=True, exist_ok=True)
        target = self.data_dir / "project.json"
        tmp = target.with_suffix(".json.tmp")
        tmp.write_bytes(pio.save_project(project))
        os.replace(tmp, target)


# ---------------------------------------------------------------------------
# request bodies


class PickIn(BaseModel):
    contact_id: str
    point: tuple[float, float, float]


class LogIn(BaseModel):
    name: str
    reference_contact_id: str
    picks: list[PickIn] = Field(default_factory=list)
    expected_revision: Optional[int] = None


class PickPatch(BaseModel):
    add: Optional[PickIn] = None
    move: Optional[PickIn] = None
    remove: Optional[str] = None
    expected_revision: Optional[int] = None


class StratumPatch(BaseModel):
    rock_type_id: Optional[str] = None
    uncertain: Optional[bool] = None
    crossbed_ids: Optional[list[str]] = None
    expected_revision: Optional[int] = None


class CorrelationIn(BaseModel):
    contact_refs: list[tuple[str, str]]
    segment_uncertain: Optional[list[bool]] = None
    color: Optional[str] = None
    expected_revision: Optional[int] = None


class LevelIn(BaseModel):
    correlation_id: Optional[str] = None
    expected_revision: Optional[int] = None


class OrderIn(BaseModel):
    log_order: list[str]
    expected_revision: Optional[int] = None


class PlanePreviewIn(BaseModel):
    contact_id: str


# ---------------------------------------------------------------------------
# JSON views (API payloads are richer than the persisted schema: they carry
# the derived values the UI displays, so the client never recomputes)


def _finite(x: float) -> float | None:
    return x if math.isfinite(x) else None


def stratum_json(node: Stratum) -> dict:
    low, high = node.height_interval
    thickness = high - low if math.isfinite(low) and math.isfinite(high) else None
    return {
        "id": node.id,
        "interval": [_finite(low), _finite(high)],
        "thickness_m": thickness,
        "lower_contact_id": node.lower_contact_id,
        "upper_contact_id": node.upper_contact_id,
        "rock_type_id": node.rock_type_id,
        "rock_type_uncertain": node.rock_type_uncertain,
        "crossbed_ids": sorted(node.crossbed_ids),
        "children": [stratum_json(c) for c in node.children],
    }


def log_json(log: GeoLog) -> dict:
    ds = dip_and_strike(log.reference_plane)
    return {
        "id": log.id,
        "name": log.name,
        "reference_contact_id": log.reference_contact_id,
        "anchor_elevation_m": log.anchor_elevation_m,
        "reference_plane": {
            "origin": list(log.reference_plane.origin),
            "normal": list(log.reference_plane.normal),
            "rms_residual_m": log.reference_plane.rms_residual_m,
            "dip_angle_deg": ds.dip_angle_deg,
            "dip_azimuth_deg": ds.dip_azimuth_deg,
            "strike_azimuth_deg": ds.strike_azimuth_deg,
        },
        "picks": [
            {"contact_id": p.contact_id, "point": list(p.point), "true_height_m": p.true_height_m}
            for p in log.picks
        ],
        "leaf_count": strata.leaf_count(log.tree),
        "tree": stratum_json(log.tree),
    }


def correlation_json(corr: Correlation) -> dict:
    return {
        "id": corr.id,
        "contact_refs": [list(ref) for ref in corr.contact_refs],
        "segment_uncertain": list(corr.segment_uncertain),
        "color": corr.color,
    }


def panel_json(panel: Panel) -> dict:
    return {
        "id": panel.id,
        "log_order": list(panel.log_order),
        "leveling": panel.leveling,
        "correlations": [correlation_json(c) for c in panel.correlations],
        "rock_catalog": [asdict(r) for r in panel.rock_catalog],
        "style": asdict(panel.style),
    }


def project_json(project: Project, revision: int) -> dict:
    return {
        "revision": revision,
        "dataset": pio.dataset_to_jsonable(project.dataset),
        "logs": [log_json(log) for log in project.logs],
        "panel": panel_json(project.panel),
    }


# ---------------------------------------------------------------------------
# helpers


def _slug(name: str) -> str:
    slug = "".join(c.lower() if c.isalnum() else "-" for c in name.strip()).strip("-")
    while "--" in slug:
        slug = slug.replace("--", "-")
    return slug or "log"


def _snap_pick(dataset: Dataset, contact_id: str, point: Vec3) -> Vec3:
    contact = dataset.contact_by_id(contact_id)
    if contact is None:
        raise HTTPException(status_code=404, detail=f"unknown contact {contact_id!r}")
    snapped, dist = nearest_point_on_polyline(point, contact.points)
    if dist > PICK_SNAP_TOLERANCE_M:
        raise HTTPException(
            status_code=400,
            detail=f"point is {dist:.3f} m from contact {contact_id!r} "
            f"(snap tolerance {PICK_SNAP_TOLERANCE_M} m)",
        )
    return snapped


def _rebuild_log(project: Project, log: GeoLog, picks: list[tuple[str, Vec3]]) -> GeoLog:
    try:
        return strata.derive_log(
            log.id, log.name, log.reference_contact_id, picks, project.dataset,
            previous_tree=log.tree,
        )
    except strata.UnknownContact as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
    except (strata.DuplicateHeight, strata.DuplicatePick, TooFewPoints, DegenerateGeometry) as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc


def _replace_log(project: Project, updated: GeoLog) -> Project:
    logs = tuple(updated if log.id == updated.id else log for log in project.logs)
    return replace(project, logs=logs)


def _require_log(project: Project, log_id: str) -> GeoLog:
    log = project.log_by_id(log_id)
    if log is None:
        raise HTTPException(status_code=404, detail=f"unknown log {log_id!r}")
    return log


def _validate_correlation_refs(project: Project, refs: list[tuple[str, str]]) -> None:
    if len(refs) < 2:
        raise HTTPException(status_code=400, detail="correlation needs at least two contact refs")
    seen: set[str] = set()
    for log_id, contact_id in refs:
        if log_id in seen:
            raise HTTPException(
                status_code=400, detail=f"correlation lists log {log_id!r} more than once"
            )
        seen.add(log_id)
        log = _require_log(project, log_id)
        if not any(p.contact_id == contact_id for p in log.picks):
            raise HTTPException(
                status_code=404,
                detail=f"contact {contact_id!r} is not picked in log {log_id!r}",
            )


# ---------------------------------------------------------------------------
# app


def empty_project() -> Project:
    return Project(
        dataset=Dataset(),
        logs=(),
        panel=Panel(
            id="panel",
            log_order=(),
            correlations=(),
            leveling=None,
            rock_catalog=default_rock_catalog(),
            style=playout.PanelStyle(),
        ),
    )


def create_app(
    project: Project | None = None,
    *,
    data_dir: Path | None = None,
    ui_dir: Path | None = None,
) -> FastAPI:
    app = FastAPI(title="stratapanel", docs_url=None, redoc_url=None)
    box = _StateBox(project if project is not None else empty_project(), data_dir=data_dir)
    app.state.box = box

    @app.exception_handler(RequestValidationError)
    async def _schema_error(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.get("/api/project")
    def get_project() -> dict:
        current, revision = box.read()
        return project_json(current, revision)

    @app.get("/api/strip")
    def get_strip() -> dict:
        current, revision = box.read()
        if not current.dataset.contacts:
            return {"revision": revision, "polylines": []}
        try:
            polylines = prender.project_outcrop_strip(current.dataset.contacts)
        except DegenerateGeometry as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        meta = {c.id: c for c in current.dataset.contacts}
        return {
            "revision": revision,
            "polylines": [
                {
                    "contact_id": line.contact_id,
                    "name": meta[line.contact_id].name,
                    "rank": meta[line.contact_id].rank,
                    "color": meta[line.contact_id].color,
                    "line_weight": meta[line.contact_id].line_weight,
                    "uncertain": meta[line.contact_id].uncertain,
                    "points": [list(p) for p in line.points],
                    "points_3d": [list(p) for p in line.points_3d],
                }
                for line in polylines
            ],
        }

    @app.get("/api/panel.svg")
    def get_panel_svg() -> Response:
        current, _ = box.read()
        svg = prender.render_panel(current.panel, playout.layout_panel(current))
        return Response(content=svg, media_type="image/svg+xml")

    @app.post("/api/plane-preview")
    def plane_preview(body: PlanePreviewIn) -> dict:
        current, _ = box.read()
        contact = current.dataset.contact_by_id(body.contact_id)
        if contact is None:
            raise HTTPException(status_code=404, detail=f"unknown contact {body.contact_id!r}")
        try:
            plane = fit_plane(contact.points)
        except (TooFewPoints, DegenerateGeometry) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        ds = dip_and_strike(plane)
        return {
            "contact_id": body.contact_id,
            "origin": list(plane.origin),
            "normal": list(plane.normal),
            "rms_residual_m": plane.rms_residual_m,
            "dip_angle_deg": ds.dip_angle_deg,
            "dip_azimuth_deg": ds.dip_azimuth_deg,
            "strike_azimuth_deg": ds.strike_azimuth_deg,
        }

    @app.post("/api/logs", status_code=201)
    def post_log(body: LogIn) -> dict:
        def apply(current: Project) -> tuple[Project, GeoLog]:
            log_id = _slug(body.name)
            if current.log_by_id(log_id) is not None:
                raise HTTPException(status_code=400, detail=f"log {log_id!r} already exists")
            picks = [(p.contact_id, _snap_pick(current.dataset, p.contact_id, p.point)) for p in body.picks]
            try:
                log = strata.derive_log(log_id, body.name, body.reference_contact_id, picks, current.dataset)
            except strata.UnknownContact as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except (strata.DuplicateHeight, strata.DuplicatePick, TooFewPoints, DegenerateGeometry) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            panel = replace(current.panel, log_order=current.panel.log_order + (log_id,))
            return replace(current, logs=current.logs + (log,), panel=panel), log

        revision, log = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "log": log_json(log)}

    @app.patch("/api/logs/{log_id}/picks")
    def patch_picks(log_id: str, body: PickPatch) -> dict:
        ops = [op for op in (body.add, body.move, body.remove) if op is not None]
        if len(ops) != 1:
            raise HTTPException(
                status_code=400, detail="exactly one of add / move / remove is required"
            )

        def apply(current: Project) -> tuple[Project, GeoLog]:
            log = _require_log(current, log_id)
            picks = [(p.contact_id, p.point) for p in log.picks]
            if body.add is not None:
                if any(cid == body.add.contact_id for cid, _ in picks):
                    raise HTTPException(
                        status_code=400,
                        detail=f"log already picks contact {body.add.contact_id!r}",
                    )
                picks.append(
                    (body.add.contact_id, _snap_pick(current.dataset, body.add.contact_id, body.add.point))
                )
            elif body.move is not None:
                if not any(cid == body.move.contact_id for cid, _ in picks):
                    raise HTTPException(
                        status_code=404, detail=f"no pick for contact {body.move.contact_id!r}"
                    )
                snapped = _snap_pick(current.dataset, body.move.contact_id, body.move.point)
                picks = [(cid, snapped if cid == body.move.contact_id else pt) for cid, pt in picks]
            else:
                if not any(cid == body.remove for cid, _ in picks):
                    raise HTTPException(status_code=404, detail=f"no pick for contact {body.remove!r}")
                picks = [(cid, pt) for cid, pt in picks if cid != body.remove]
            updated = _rebuild_log(current, log, picks)
            return _replace_log(current, updated), updated

        revision, log = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "log": log_json(log)}

    @app.patch("/api/strata/{log_id}/{stratum_id}")
    def patch_stratum(log_id: str, stratum_id: str, body: StratumPatch) -> dict:
        fields = body.model_fields_set

        def apply(current: Project) -> tuple[Project, GeoLog]:
            log = _require_log(current, log_id)
            tree = log.tree
            target = strata.find_stratum(tree, stratum_id)
            if target is None:
                raise HTTPException(status_code=404, detail=f"unknown stratum {stratum_id!r}")
            catalog_ids = {r.id for r in current.panel.rock_catalog}
            known_beds = {m.id for m in current.dataset.crossbeds}
            try:
                if "rock_type_id" in fields or "uncertain" in fields:
                    rock = body.rock_type_id if "rock_type_id" in fields else target.rock_type_id
                    uncertain = body.uncertain if "uncertain" in fields else target.rock_type_uncertain
                    tree = strata.assign_rock_type(
                        tree, stratum_id, rock, bool(uncertain), catalog_ids=catalog_ids
                    )
                if body.crossbed_ids is not None:
                    tree = strata.assign_crossbeds(
                        tree, stratum_id, body.crossbed_ids, known_ids=known_beds
                    )
            except (strata.UnknownStratum, strata.UnknownRockType, strata.UnknownMeasurement) as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except strata.NonLeafTarget as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            updated = replace(log, tree=tree)
            return _replace_log(current, updated), updated

        revision, log = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "log": log_json(log)}

    @app.post("/api/correlations", status_code=201)
    def post_correlation(body: CorrelationIn) -> dict:
        def apply(current: Project) -> tuple[Project, Correlation]:
            refs = [(log_id, contact_id) for log_id, contact_id in body.contact_refs]
            _validate_correlation_refs(current, refs)
            flags = body.segment_uncertain
            if flags is None:
                flags = [False] * (len(refs) - 1)
            if len(flags) != len(refs) - 1:
                raise HTTPException(
                    status_code=400,
                    detail=f"segment_uncertain needs {len(refs) - 1} flags, got {len(flags)}",
                )
            color = body.color
            if color is None:
                first = current.dataset.contact_by_id(refs[0][1])
                color = first.color if first is not None else "#444444"
            corr = Correlation(
                id=f"corr-{len(current.panel.correlations) + 1}",
                contact_refs=tuple(refs),
                segment_uncertain=tuple(flags),
                color=color,
            )
            panel = replace(current.panel, correlations=current.panel.correlations + (corr,))
            return replace(current, panel=panel), corr

        revision, corr = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "correlation": correlation_json(corr)}

    @app.post("/api/panel/level")
    def post_level(body: LevelIn) -> dict:
        def apply(current: Project) -> tuple[Project, Panel]:
            if body.correlation_id is not None and not any(
                c.id == body.correlation_id for c in current.panel.correlations
            ):
                raise HTTPException(
                    status_code=404, detail=f"unknown correlation {body.correlation_id!r}"
                )
            panel = replace(current.panel, leveling=body.correlation_id)
            return replace(current, panel=panel), panel

        revision, panel = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "panel": panel_json(panel)}

    @app.post("/api/panel/order")
    def post_order(body: OrderIn) -> dict:
        def apply(current: Project) -> tuple[Project, Panel]:
            try:
                panel = playout.reorder_logs(current.panel, body.log_order)
            except playout.NotAPermutation as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            return replace(current, panel=panel), panel

        revision, panel = box.mutate(apply, body.expected_revision)
        return {"revision": revision, "panel": panel_json(panel)}

    if ui_dir is not None and ui_dir.is_dir():
        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index() -> str:
            return (
                "<!DOCTYPE html><html><head><title>stratapanel</title></head>"
                "<body><h1>stratapanel service</h1>"
                "<p>No UI assets found. Build the frontend and restart with --ui-dir, "
                'or use the JSON API under <a href="/api/project">/api</a>.</p>'
                "</body></html>"
            )

    return app


def default_ui_dir() -> Path | None:
    """Locate the built frontend when running from a source checkout."""
    candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return candidate if candidate.is_dir() else None
