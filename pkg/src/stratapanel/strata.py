"""Stratum-tree construction from ranked contact picks, plus traversals.

The tree starts as one stratum spanning (-inf, +inf). Contacts are
processed sorted by (rank, height); each splits the current leaf whose
interval contains its height. A split by a contact of the *same* rank that
created the leaf widens the parent (the two pieces replace the leaf among
its siblings), so all equal-rank boundaries of a region sit on one tree
level; a higher rank opens a new level below.
"""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Collection, Iterator, Mapping, Sequence

from .geom import Vec3, fit_plane, true_height
from .model import ContactPick, Dataset, GeoLog, Stratum

DUPLICATE_HEIGHT_TOL_M = 1e-6


class DuplicateHeight(ValueError):
    """Two picks within tolerance of each other; signals over-dense picking."""


class UnknownContact(KeyError):
    """Referenced contact id is not in the dataset."""


class DuplicatePick(ValueError):
    """A log may hold at most one pick per contact."""


class UnknownStratum(KeyError):
    """No assignable stratum with the requested id."""


class UnknownRockType(KeyError):
    """Rock type id not present in the catalog."""


class UnknownMeasurement(KeyError):
    """Cross-bed measurement id not present in the dataset."""


class NonLeafTarget(ValueError):
    """Cross beds can only be assigned to leaf strata."""


def stratum_key(lower_contact_id: str | None, upper_contact_id: str | None) -> str:
    """Content-addressed stratum id from its bounding contacts.

    Stable across tree rebuilds as long as the bounding contacts persist,
    which is what lets assignments survive pick edits elsewhere in the log.
    """
    return f"{lower_contact_id or 'base'}__{upper_contact_id or 'top'}"


class _Node:
    __slots__ = ("low", "high", "lower_id", "upper_id", "rank_level", "children")

    def __init__(self, low, high, lower_id, upper_id, rank_level):
        self.low = low
        self.high = high
        self.lower_id = lower_id
        self.upper_id = upper_id
        self.rank_level = rank_level
        self.children: list[_Node] = []


def _freeze(node: _Node) -> Stratum:
    return Stratum(
        id=stratum_key(node.lower_id, node.upper_id),
        height_interval=(node.low, node.high),
        lower_contact_id=node.lower_id,
        upper_contact_id=node.upper_id,
        children=tuple(_freeze(c) for c in node.children),
    )


def build_tree(picks: Sequence[ContactPick], ranks: Mapping[str, int]) -> Stratum:
    """Derive the stratum tree for a log from its picks and contact ranks.

    Returns the root stratum spanning (-inf, +inf); leaf intervals
    partition the real line and the leaf count is ``len(picks) + 1``.

    Raises
    ------
    DuplicateHeight
        Two pick heights closer than 1e-6 m.
    """
    heights = sorted(p.true_height_m for p in picks)
    for a, b in zip(heights, heights[1:]):
        if b - a <= DUPLICATE_HEIGHT_TOL_M:
            raise DuplicateHeight(f"pick heights {a} and {b} are within {DUPLICATE_HEIGHT_TOL_M} m")

    root = _Node(-math.inf, math.inf, None, None, None)
    ordered = sorted(picks, key=lambda p: (ranks[p.contact_id], p.true_height_m))
    for pick in ordered:
        rank = ranks[pick.contact_id]
        h = pick.true_height_m

        parent = None
        node = root
        while node.children:
            parent = node
            node = next(c for c in node.children if c.low < h <= c.high)

        lower = _Node(node.low, h, node.lower_id, pick.contact_id, rank)
        upper = _Node(h, node.high, pick.contact_id, node.upper_id, rank)
        if parent is not None and node.rank_level == rank:
            # Same-rank split: the pieces take the leaf's place among its
            # siblings, keeping all boundaries of this rank on one level.
            i = parent.children.index(node)
            parent.children[i : i + 1] = [lower, upper]
        else:
            node.children = [lower, upper]

    return _freeze(root)


def iter_leaves(tree: Stratum) -> Iterator[Stratum]:
    """Leaves in ascending height order."""
    if tree.is_leaf:
        yield tree
    else:
        for child in tree.children:
            yield from iter_leaves(child)


def leaf_count(tree: Stratum) -> int:
    return sum(1 for _ in iter_leaves(tree))


def find_stratum(tree: Stratum, stratum_id: str) -> Stratum | None:
    if tree.id == stratum_id:
        return tree
    for child in tree.children:
        found = find_stratum(child, stratum_id)
        if found is not None:
            return found
    return None


def cut_at_level(tree: Stratum, level: int) -> list[Stratum]:
    """Strata at tree depth ``level`` (root = 0), ordered by interval low
    bound. On branches shallower than ``level`` the deepest stratum stands
    in, so the cut always tiles the root interval."""
    if level < 0:
        raise ValueError(f"level must be >= 0 (got {level})")
    out: list[Stratum] = []

    def collect(node: Stratum, depth: int) -> None:
        if depth == level or node.is_leaf:
            out.append(node)
            return
        for child in node.children:
            collect(child, depth + 1)

    collect(tree, 0)
    return out


def _replace_stratum(tree: Stratum, stratum_id: str, updated: Stratum) -> Stratum | None:
    if tree.id == stratum_id:
        return updated
    for i, child in enumerate(tree.children):
        new_child = _replace_stratum(child, stratum_id, updated)
        if new_child is not None:
            children = tree.children[:i] + (new_child,) + tree.children[i + 1 :]
            return replace(tree, children=children)
    return None


def assign_rock_type(
    tree: Stratum,
    stratum_id: str,
    rock_type_id: str | None,
    uncertain: bool,
    *,
    catalog_ids: Collection[str],
) -> Stratum:
    """Set (or clear, with None) the rock type of a leaf stratum.

    Idempotent; reassignment overwrites. Only leaves of the primary cut
    carry rock types, so a non-leaf target is reported as unknown.
    """
    target = find_stratum(tree, stratum_id)
    if target is None or not target.is_leaf:
        raise UnknownStratum(f"no leaf stratum {stratum_id!r}")
    if rock_type_id is not None and rock_type_id not in catalog_ids:
        raise UnknownRockType(f"rock type {rock_type_id!r} not in catalog")
    updated = replace(
        target,
        rock_type_id=rock_type_id,
        rock_type_uncertain=uncertain if rock_type_id is not None else False,
    )
    result = _replace_stratum(tree, stratum_id, updated)
    assert result is not None
    return result


def assign_crossbeds(
    tree: Stratum,
    stratum_id: str,
    crossbed_ids: Collection[str],
    *,
    known_ids: Collection[str],
) -> Stratum:
    """Replace the cross-bed set of a leaf stratum (empty set clears)."""
    target = find_stratum(tree, stratum_id)
    if target is None:
        raise UnknownStratum(f"no stratum {stratum_id!r}")
    if not target.is_leaf:
        raise NonLeafTarget(f"stratum {stratum_id!r} is not a leaf")
    missing = sorted(set(crossbed_ids) - set(known_ids))
    if missing:
        raise UnknownMeasurement(f"unknown measurement ids: {', '.join(missing)}")
    result = _replace_stratum(tree, stratum_id, replace(target, crossbed_ids=frozenset(crossbed_ids)))
    assert result is not None
    return result


def aggregate_azimuths(
    tree: Stratum, stratum_id: str, azimuth_by_id: Mapping[str, float]
) -> list[float]:
    """Dip azimuths of every cross bed on descendant leaves (inclusive),
    ordered by (leaf low bound, measurement id)."""
    target = find_stratum(tree, stratum_id)
    if target is None:
        raise UnknownStratum(f"no stratum {stratum_id!r}")
    azimuths: list[float] = []
    for leaf in iter_leaves(target):
        for bed_id in sorted(leaf.crossbed_ids):
            try:
                azimuths.append(azimuth_by_id[bed_id])
            except KeyError:
                raise UnknownMeasurement(f"unknown measurement id: {bed_id}") from None
    return azimuths


def derive_log(
    log_id: str,
    name: str,
    reference_contact_id: str,
    picks: Sequence[tuple[str, Vec3]],
    dataset: Dataset,
    *,
    previous_tree: Stratum | None = None,
) -> GeoLog:
    """Build a log from raw (contact_id, point) picks.

    Fits the reference plane to the reference contact's polyline, derives
    pick heights above it, and rebuilds the stratum tree. When
    ``previous_tree`` is given, assignments on surviving leaves carry over.

    Raises
    ------
    UnknownContact
        Reference contact or a picked contact is not in the dataset.
    DuplicateHeight
        Two pick heights within tolerance.
    """
    reference = dataset.contact_by_id(reference_contact_id)
    if reference is None:
        raise UnknownContact(f"unknown contact {reference_contact_id!r}")
    plane = fit_plane(reference.points)

    resolved: list[ContactPick] = []
    ranks: dict[str, int] = {}
    for contact_id, point in picks:
        contact = dataset.contact_by_id(contact_id)
        if contact is None:
            raise UnknownContact(f"unknown contact {contact_id!r}")
        if contact_id in ranks:
            raise DuplicatePick(f"log already picks contact {contact_id!r}")
        ranks[contact_id] = contact.rank
        resolved.append(
            ContactPick(contact_id=contact_id, point=tuple(point), true_height_m=true_height(plane, point))
        )
    resolved.sort(key=lambda p: p.true_height_m)

    tree = build_tree(resolved, ranks)
    if previous_tree is not None:
        tree = transfer_assignments(previous_tree, tree)
    return GeoLog(
        id=log_id,
        name=name,
        reference_contact_id=reference_contact_id,
        reference_plane=plane,
        picks=tuple(resolved),
        tree=tree,
        anchor_elevation_m=plane.origin[2],
    )


def transfer_assignments(old_tree: Stratum, new_tree: Stratum) -> Stratum:
    """Carry rock-type and cross-bed assignments from an old tree onto a
    rebuilt one, matching leaves by their content-addressed ids.

    Assignments on strata whose bounding contacts no longer delimit a leaf
    are dropped.
    """
    old_leaves = {leaf.id: leaf for leaf in iter_leaves(old_tree)}

    def merge(node: Stratum) -> Stratum:
        if node.is_leaf:
            old = old_leaves.get(node.id)
            if old is None:
                return node
            return replace(
                node,
                rock_type_id=old.rock_type_id,
                rock_type_uncertain=old.rock_type_uncertain,
                crossbed_ids=old.crossbed_ids,
            )
        return replace(node, children=tuple(merge(c) for c in node.children))

    return merge(new_tree)
