"""Dataset ingestion, project persistence, canonical serialization.

Two versioned JSON schemas:

``incorr-dataset/1`` — interpretation input::

    {
      "schema": "incorr-dataset/1",
      "metadata": {"source": str, "crs_note": str},
      "contacts": [
        {"id", "name", "rank", "color", "line_weight", "uncertain",
         "points": [[x, y, z], ...]}                      # >= 2 points
      ],
      "crossbeds": [
        {"id",
         "source_points": [[x, y, z], ...],               # optional, >= 3
         "dip_azimuth_deg": num, "dip_angle_deg": num,    # derived from
         "centroid": [x, y, z]}                           # points if present
      ]
    }

``incorr-project/1`` — full project state::

    {
      "schema": "incorr-project/1",
      "dataset": {<incorr-dataset/1 object>},
      "logs": [
        {"id", "name", "reference_contact_id",
         "picks": [{"contact_id", "point": [x, y, z]}],   # heights derived
         "strata": [{"stratum_id", "rock_type_id", "rock_type_uncertain",
                     "crossbed_ids": [...]}]}
      ],
      "panel": {"id", "log_order", "leveling",
                "correlations": [{"id", "contact_refs": [[log, contact]],
                                  "segment_uncertain": [...], "color"}],
                "rock_catalog": [{"id", "name", "grain_size_mm", "phi", "color"}],
                "style": {<PanelStyle fields>}}
    }

Derived quantities (reference plane, pick heights, stratum tree) are never
trusted from disk: loading re-derives them from the stored picks, and a
stored value that disagrees with its re-derivation raises a
:class:`ProjectLoadWarning` and is ignored. Numbers are serialized with 9
significant decimals; serialization is canonical (sorted keys, fixed
separators), so save(load(x)) is byte-identical for canonical input.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict
from typing import Any, Sequence

from . import strata
from .geom import (
    DegenerateGeometry,
    TooFewPoints,
    Vec3,
    dip_and_strike,
    fit_plane,
    nearest_point_on_polyline,
)
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
    RockType,
    ValidationFinding,
    validate_dataset,
    validate_rock_catalog,
)

DATASET_SCHEMA = "incorr-dataset/1"
PROJECT_SCHEMA = "incorr-project/1"

# File picks must sit on their contact's polyline within this distance.
PICK_SNAP_TOLERANCE_M = 0.5
# Stored derived values may differ from re-derivation by at most this much.
DERIVED_MISMATCH_TOL = 1e-6


class ParseError(ValueError):
    """Input is not well-formed JSON."""


class SchemaError(ValueError):
    """JSON shape does not match the schema; message carries the JSON path."""


class DanglingReference(ValueError):
    """An id reference does not resolve to an existing object."""


class ValidationError(ValueError):
    """Type invariants violated; carries the full findings list."""

    def __init__(self, findings: Sequence[ValidationFinding]):
        self.findings = list(findings)
        super().__init__("; ".join(str(f) for f in self.findings))


class ProjectLoadWarning(UserWarning):
    """A stored derived field disagreed with its re-derivation and was ignored."""


# ---------------------------------------------------------------------------
# canonical serialization

def _round9(x: float) -> float:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    return float(f"{x:.9g}")


def _canonical(value: Any) -> Any:
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return _round9(value)
    if isinstance(value, dict):
        return {k: _canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_canonical(v) for v in value]
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(value: Any) -> bytes:
    """Canonical UTF-8 JSON: sorted keys, compact separators, 9 significant
    decimals, trailing newline."""
    text = json.dumps(_canonical(value), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return (text + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# schema access helpers (path-carrying errors)

def _obj(value: Any, path: str) -> dict:
    if not isinstance(value, dict):
        raise SchemaError(f"{path}: expected object, got {type(value).__name__}")
    return value


def _list(value: Any, path: str) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"{path}: expected array, got {type(value).__name__}")
    return value


def _req(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise SchemaError(f"{path}/{key} missing")
    return obj[key]


def _str(value: Any, path: str) -> str:
    if not isinstance(value, str):
        raise SchemaError(f"{path}: expected string, got {type(value).__name__}")
    return value


def _num(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}: expected number, got {type(value).__name__}")
    return float(value)


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}: expected integer, got {type(value).__name__}")
    return value


def _bool(value: Any, path: str) -> bool:
    if not isinstance(value, bool):
        raise SchemaError(f"{path}: expected boolean, got {type(value).__name__}")
    return value


def _vec3(value: Any, path: str) -> Vec3:
    arr = _list(value, path)
    if len(arr) != 3:
        raise SchemaError(f"{path}: expected [x, y, z], got {len(arr)} entries")
    return (_num(arr[0], f"{path}/0"), _num(arr[1], f"{path}/1"), _num(arr[2], f"{path}/2"))


# ---------------------------------------------------------------------------
# dataset

def _parse_contact(raw: Any, path: str) -> Contact:
    obj = _obj(raw, path)
    return Contact(
        id=_str(_req(obj, "id", path), f"{path}/id"),
        name=_str(obj.get("name", ""), f"{path}/name"),
        rank=_int(_req(obj, "rank", path), f"{path}/rank"),
        color=_str(_req(obj, "color", path), f"{path}/color"),
        line_weight=_num(_req(obj, "line_weight", path), f"{path}/line_weight"),
        points=tuple(
            _vec3(p, f"{path}/points/{i}")
            for i, p in enumerate(_list(_req(obj, "points", path), f"{path}/points"))
        ),
        uncertain=_bool(obj.get("uncertain", False), f"{path}/uncertain"),
    )


def _parse_crossbed(raw: Any, path: str, findings: list[ValidationFinding]) -> CrossBedMeasurement:
    obj = _obj(raw, path)
    bed_id = _str(_req(obj, "id", path), f"{path}/id")
    points = tuple(
        _vec3(p, f"{path}/source_points/{i}")
        for i, p in enumerate(_list(obj.get("source_points", []), f"{path}/source_points"))
    )
    if len(points) >= 3:
        # Points are authoritative: re-derive the measurement from them.
        try:
            plane = fit_plane(points)
        except DegenerateGeometry:
            findings.append(ValidationFinding("error", bed_id, "source points are collinear"))
            plane = None
        if plane is not None:
            ds = dip_and_strike(plane)
            return CrossBedMeasurement(
                id=bed_id,
                dip_azimuth_deg=ds.dip_azimuth_deg if ds.dip_azimuth_deg is not None else 0.0,
                dip_angle_deg=ds.dip_angle_deg,
                centroid=plane.origin,
                source_points=points,
            )
    return CrossBedMeasurement(
        id=bed_id,
        dip_azimuth_deg=_num(_req(obj, "dip_azimuth_deg", path), f"{path}/dip_azimuth_deg"),
        dip_angle_deg=_num(_req(obj, "dip_angle_deg", path), f"{path}/dip_angle_deg"),
        centroid=_vec3(obj.get("centroid", [0.0, 0.0, 0.0]), f"{path}/centroid"),
        source_points=points,
    )


def _parse_dataset(raw: Any, path: str) -> Dataset:
    obj = _obj(raw, path or "/")
    schema = obj.get("schema")
    if schema is None:
        raise SchemaError(f"{path}/schema missing")
    if schema != DATASET_SCHEMA:
        raise SchemaError(f"{path}/schema: expected {DATASET_SCHEMA!r}, got {schema!r}")
    meta_obj = _obj(obj.get("metadata", {}), f"{path}/metadata")
    metadata = DatasetMetadata(
        source=_str(meta_obj.get("source", ""), f"{path}/metadata/source"),
        crs_note=_str(meta_obj.get("crs_note", ""), f"{path}/metadata/crs_note"),
    )
    findings: list[ValidationFinding] = []
    contacts = tuple(
        _parse_contact(c, f"{path}/contacts/{i}")
        for i, c in enumerate(_list(obj.get("contacts", []), f"{path}/contacts"))
    )
    crossbeds = tuple(
        _parse_crossbed(c, f"{path}/crossbeds/{i}", findings)
        for i, c in enumerate(_list(obj.get("crossbeds", []), f"{path}/crossbeds"))
    )
    dataset = Dataset(contacts=contacts, crossbeds=crossbeds, metadata=metadata)
    findings.extend(validate_dataset(dataset))
    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise ValidationError(errors)
    return dataset


def load_dataset(data: bytes | str) -> Dataset:
    """Parse and validate an ``incorr-dataset/1`` document.

    Raises :class:`ParseError`, :class:`SchemaError` or
    :class:`ValidationError`.
    """
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    return _parse_dataset(raw, "")


def dataset_to_jsonable(dataset: Dataset) -> dict:
    crossbeds = []
    for bed in dataset.crossbeds:
        entry: dict[str, Any] = {
            "id": bed.id,
            "dip_azimuth_deg": bed.dip_azimuth_deg,
            "dip_angle_deg": bed.dip_angle_deg,
            "centroid": list(bed.centroid),
        }
        if bed.source_points:
            entry["source_points"] = [list(p) for p in bed.source_points]
        crossbeds.append(entry)
    return {
        "schema": DATASET_SCHEMA,
        "metadata": asdict(dataset.metadata),
        "contacts": [
            {
                "id": c.id,
                "name": c.name,
                "rank": c.rank,
                "color": c.color,
                "line_weight": c.line_weight,
                "uncertain": c.uncertain,
                "points": [list(p) for p in c.points],
            }
            for c in dataset.contacts
        ],
        "crossbeds": crossbeds,
    }


def save_dataset(dataset: Dataset) -> bytes:
    return canonical_json(dataset_to_jsonable(dataset))


# ---------------------------------------------------------------------------
# project

def _parse_style(raw: Any, path: str) -> PanelStyle:
    obj = _obj(raw, path)
    defaults = PanelStyle()
    kwargs: dict[str, Any] = {}
    for name, default in asdict(defaults).items():
        if name not in obj:
            continue
        if isinstance(default, int) and not isinstance(default, bool):
            kwargs[name] = _int(obj[name], f"{path}/{name}")
        else:
            kwargs[name] = _num(obj[name], f"{path}/{name}")
    style = PanelStyle(**kwargs)
    if not style.px_per_meter > 0:
        raise ValidationError([ValidationFinding("error", "style", "px_per_meter must be > 0")])
    if not style.phi_min < style.phi_max:
        raise ValidationError([ValidationFinding("error", "style", "phi_min must be < phi_max")])
    return style


def _parse_rock(raw: Any, path: str) -> RockType:
    obj = _obj(raw, path)
    rock_id = _str(_req(obj, "id", path), f"{path}/id")
    size = _num(_req(obj, "grain_size_mm", path), f"{path}/grain_size_mm")
    if not size > 0:
        raise ValidationError(
            [ValidationFinding("error", rock_id, f"grain_size_mm must be > 0 (got {size})")]
        )
    # phi is derived; a stored value is only checked against the size.
    phi = -math.log2(size)
    if "phi" in obj:
        stored = _num(obj["phi"], f"{path}/phi")
        if abs(stored - phi) > DERIVED_MISMATCH_TOL:
            warnings.warn(
                f"rock type {rock_id!r}: stored phi {stored} differs from "
                f"-log2(grain_size_mm) = {phi}; stored value ignored",
                ProjectLoadWarning,
                stacklevel=4,
            )
    return RockType(
        id=rock_id,
        name=_str(obj.get("name", ""), f"{path}/name"),
        grain_size_mm=size,
        phi=phi,
        color=_str(_req(obj, "color", path), f"{path}/color"),
    )


def _check_pick_on_contact(
    log_id: str, contact: Contact, point: Vec3, findings: list[ValidationFinding]
) -> None:
    _, dist = nearest_point_on_polyline(point, contact.points)
    if dist > PICK_SNAP_TOLERANCE_M + 1e-9:
        findings.append(
            ValidationFinding(
                "error",
                f"{log_id}/{contact.id}",
                f"pick is {dist:.3f} m from the contact polyline (tolerance {PICK_SNAP_TOLERANCE_M} m)",
            )
        )


def _parse_log(
    raw: Any, path: str, dataset: Dataset, catalog: tuple[RockType, ...],
    findings: list[ValidationFinding],
) -> GeoLog:
    obj = _obj(raw, path)
    log_id = _str(_req(obj, "id", path), f"{path}/id")
    name = _str(obj.get("name", log_id), f"{path}/name")
    reference_id = _str(_req(obj, "reference_contact_id", path), f"{path}/reference_contact_id")

    picks: list[tuple[str, Vec3]] = []
    stored_heights: list[tuple[str, float]] = []
    for i, raw_pick in enumerate(_list(_req(obj, "picks", path), f"{path}/picks")):
        pick_path = f"{path}/picks/{i}"
        pick_obj = _obj(raw_pick, pick_path)
        contact_id = _str(_req(pick_obj, "contact_id", pick_path), f"{pick_path}/contact_id")
        point = _vec3(_req(pick_obj, "point", pick_path), f"{pick_path}/point")
        contact = dataset.contact_by_id(contact_id)
        if contact is None:
            raise DanglingReference(f"log {log_id!r} picks unknown contact {contact_id!r}")
        _check_pick_on_contact(log_id, contact, point, findings)
        picks.append((contact_id, point))
        if "true_height_m" in pick_obj:
            stored_heights.append((contact_id, _num(pick_obj["true_height_m"], f"{pick_path}/true_height_m")))

    if dataset.contact_by_id(reference_id) is None:
        raise DanglingReference(f"log {log_id!r} references unknown contact {reference_id!r}")
    try:
        log = strata.derive_log(log_id, name, reference_id, picks, dataset)
    except (TooFewPoints, DegenerateGeometry) as exc:
        raise ValidationError(
            [ValidationFinding("error", log_id, f"reference plane fit failed: {exc}")]
        ) from exc
    except (strata.DuplicateHeight, strata.DuplicatePick) as exc:
        raise ValidationError([ValidationFinding("error", log_id, str(exc))]) from exc

    derived = {p.contact_id: p.true_height_m for p in log.picks}
    for contact_id, stored in stored_heights:
        if abs(stored - derived[contact_id]) > DERIVED_MISMATCH_TOL:
            warnings.warn(
                f"log {log_id!r}: stored true_height_m {stored} for contact {contact_id!r} "
                f"differs from derived {derived[contact_id]}; stored value ignored",
                ProjectLoadWarning,
                stacklevel=4,
            )

    tree = log.tree
    catalog_ids = {r.id for r in catalog}
    crossbed_ids = {m.id for m in dataset.crossbeds}
    for i, raw_assign in enumerate(_list(obj.get("strata", []), f"{path}/strata")):
        assign_path = f"{path}/strata/{i}"
        assign = _obj(raw_assign, assign_path)
        stratum_id = _str(_req(assign, "stratum_id", assign_path), f"{assign_path}/stratum_id")
        target = strata.find_stratum(tree, stratum_id)
        if target is None or not target.is_leaf:
            warnings.warn(
                f"log {log_id!r}: stored assignment for stratum {stratum_id!r} does not match "
                "the rebuilt tree; dropped",
                ProjectLoadWarning,
                stacklevel=4,
            )
            continue
        rock_id = assign.get("rock_type_id")
        if rock_id is not None:
            rock_id = _str(rock_id, f"{assign_path}/rock_type_id")
            if rock_id not in catalog_ids:
                findings.append(
                    ValidationFinding("error", f"{log_id}/{stratum_id}", f"unknown rock type {rock_id!r}")
                )
                rock_id = None
        uncertain = _bool(assign.get("rock_type_uncertain", False), f"{assign_path}/rock_type_uncertain")
        beds = [
            _str(b, f"{assign_path}/crossbed_ids/{j}")
            for j, b in enumerate(_list(assign.get("crossbed_ids", []), f"{assign_path}/crossbed_ids"))
        ]
        unknown_beds = sorted(set(beds) - crossbed_ids)
        if unknown_beds:
            raise DanglingReference(
                f"log {log_id!r} stratum {stratum_id!r} references unknown measurements: "
                + ", ".join(unknown_beds)
            )
        if rock_id is not None:
            tree = strata.assign_rock_type(tree, stratum_id, rock_id, uncertain, catalog_ids=catalog_ids)
        if beds:
            tree = strata.assign_crossbeds(tree, stratum_id, beds, known_ids=crossbed_ids)

    return GeoLog(
        id=log.id,
        name=log.name,
        reference_contact_id=log.reference_contact_id,
        reference_plane=log.reference_plane,
        picks=log.picks,
        tree=tree,
        anchor_elevation_m=log.anchor_elevation_m,
    )


def _parse_correlation(raw: Any, path: str, logs: tuple[GeoLog, ...]) -> Correlation:
    obj = _obj(raw, path)
    corr_id = _str(_req(obj, "id", path), f"{path}/id")
    refs: list[tuple[str, str]] = []
    for i, raw_ref in enumerate(_list(_req(obj, "contact_refs", path), f"{path}/contact_refs")):
        ref_path = f"{path}/contact_refs/{i}"
        pair = _list(raw_ref, ref_path)
        if len(pair) != 2:
            raise SchemaError(f"{ref_path}: expected [log_id, contact_id]")
        refs.append((_str(pair[0], f"{ref_path}/0"), _str(pair[1], f"{ref_path}/1")))
    if len(refs) < 2:
        raise ValidationError(
            [ValidationFinding("error", corr_id, "correlation needs at least two contact refs")]
        )
    seen_logs: set[str] = set()
    by_id = {log.id: log for log in logs}
    for log_id, contact_id in refs:
        if log_id in seen_logs:
            raise ValidationError(
                [ValidationFinding("error", corr_id, f"multiple contacts for log {log_id!r}")]
            )
        seen_logs.add(log_id)
        log = by_id.get(log_id)
        if log is None:
            raise DanglingReference(f"correlation {corr_id!r} references unknown log {log_id!r}")
        if not any(p.contact_id == contact_id for p in log.picks):
            raise DanglingReference(
                f"correlation {corr_id!r} references contact {contact_id!r} not picked in log {log_id!r}"
            )
    raw_flags = _list(obj.get("segment_uncertain", []), f"{path}/segment_uncertain")
    if raw_flags and len(raw_flags) != len(refs) - 1:
        raise SchemaError(
            f"{path}/segment_uncertain: expected {len(refs) - 1} flags, got {len(raw_flags)}"
        )
    flags = tuple(_bool(f, f"{path}/segment_uncertain/{i}") for i, f in enumerate(raw_flags)) or tuple(
        False for _ in range(len(refs) - 1)
    )
    return Correlation(
        id=corr_id,
        contact_refs=tuple(refs),
        segment_uncertain=flags,
        color=_str(_req(obj, "color", path), f"{path}/color"),
    )


def load_project(data: bytes | str) -> Project:
    """Parse, re-derive and validate an ``incorr-project/1`` document."""
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc}") from exc
    obj = _obj(raw, "/")
    schema = obj.get("schema")
    if schema is None:
        raise SchemaError("/schema missing")
    if schema != PROJECT_SCHEMA:
        raise SchemaError(f"/schema: expected {PROJECT_SCHEMA!r}, got {schema!r}")

    dataset = _parse_dataset(_req(obj, "dataset", ""), "/dataset")

    panel_obj = _obj(_req(obj, "panel", ""), "/panel")
    catalog = tuple(
        _parse_rock(r, f"/panel/rock_catalog/{i}")
        for i, r in enumerate(_list(panel_obj.get("rock_catalog", []), "/panel/rock_catalog"))
    )
    catalog_findings = validate_rock_catalog(catalog)
    if catalog_findings:
        raise ValidationError(catalog_findings)

    findings: list[ValidationFinding] = []
    logs = tuple(
        _parse_log(raw_log, f"/logs/{i}", dataset, catalog, findings)
        for i, raw_log in enumerate(_list(obj.get("logs", []), "/logs"))
    )
    if len({log.id for log in logs}) != len(logs):
        findings.append(ValidationFinding("error", "logs", "duplicate log ids"))

    correlations = tuple(
        _parse_correlation(raw_corr, f"/panel/correlations/{i}", logs)
        for i, raw_corr in enumerate(_list(panel_obj.get("correlations", []), "/panel/correlations"))
    )
    if len({c.id for c in correlations}) != len(correlations):
        findings.append(ValidationFinding("error", "correlations", "duplicate correlation ids"))

    order = tuple(
        _str(v, f"/panel/log_order/{i}")
        for i, v in enumerate(_list(panel_obj.get("log_order", [log.id for log in logs]), "/panel/log_order"))
    )
    if sorted(order) != sorted(log.id for log in logs):
        findings.append(
            ValidationFinding("error", "panel", "log_order is not a permutation of the project's logs")
        )

    leveling = panel_obj.get("leveling")
    if leveling is not None:
        leveling = _str(leveling, "/panel/leveling")
        if leveling not in {c.id for c in correlations}:
            raise DanglingReference(f"leveling references unknown correlation {leveling!r}")

    errors = [f for f in findings if f.severity == "error"]
    if errors:
        raise ValidationError(errors)

    panel = Panel(
        id=_str(panel_obj.get("id", "panel"), "/panel/id"),
        log_order=order,
        correlations=correlations,
        leveling=leveling,
        rock_catalog=catalog,
        style=_parse_style(panel_obj.get("style", {}), "/panel/style"),
    )
    return Project(dataset=dataset, logs=logs, panel=panel)


def project_to_jsonable(project: Project) -> dict:
    logs = []
    for log in project.logs:
        assignments = []
        for leaf in strata.iter_leaves(log.tree):
            if leaf.rock_type_id is None and not leaf.crossbed_ids:
                continue
            assignments.append(
                {
                    "stratum_id": leaf.id,
                    "rock_type_id": leaf.rock_type_id,
                    "rock_type_uncertain": leaf.rock_type_uncertain,
                    "crossbed_ids": sorted(leaf.crossbed_ids),
                }
            )
        logs.append(
            {
                "id": log.id,
                "name": log.name,
                "reference_contact_id": log.reference_contact_id,
                "picks": [{"contact_id": p.contact_id, "point": list(p.point)} for p in log.picks],
                "strata": assignments,
            }
        )
    panel = project.panel
    return {
        "schema": PROJECT_SCHEMA,
        "dataset": dataset_to_jsonable(project.dataset),
        "logs": logs,
        "panel": {
            "id": panel.id,
            "log_order": list(panel.log_order),
            "leveling": panel.leveling,
            "correlations": [
                {
                    "id": c.id,
                    "contact_refs": [list(ref) for ref in c.contact_refs],
                    "segment_uncertain": list(c.segment_uncertain),
                    "color": c.color,
                }
                for c in panel.correlations
            ],
            "rock_catalog": [asdict(r) for r in panel.rock_catalog],
            "style": asdict(panel.style),
        },
    }


def save_project(project: Project) -> bytes:
    """Canonical project serialization; derived fields are omitted and
    re-derived on load."""
    return canonical_json(project_to_jsonable(project))
