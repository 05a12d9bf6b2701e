"""Floor-plan geometry: rooms, anchors, containment, boundary clamping, grids.

All coordinates are planar and in meters. Polygons are given as ordered
vertex lists; the closing edge is implicit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from shapely.geometry import Point as _ShapelyPoint
from shapely.geometry import Polygon as _ShapelyPolygon

Point = tuple[float, float]

GEOMETRY_TOL = 1e-9  # m


class PlanError(ValueError):
    """Raised when a floor plan violates its structural invariants."""


def _as_point(p: Sequence[float]) -> Point:
    x, y = float(p[0]), float(p[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise PlanError(f"non-finite coordinate {p!r}")
    return (x, y)


def _as_polygon(vertices: Iterable[Sequence[float]]) -> tuple[Point, ...]:
    return tuple(_as_point(v) for v in vertices)


@dataclass(frozen=True)
class AnchorConfig:
    anchor_id: str
    position: Point

    def __post_init__(self):
        object.__setattr__(self, "position", _as_point(self.position))


@dataclass(frozen=True)
class Room:
    room_id: str
    polygon: tuple[Point, ...]

    def __post_init__(self):
        poly = _as_polygon(self.polygon)
        object.__setattr__(self, "polygon", poly)
        if len(poly) < 3:
            raise PlanError(f"room {self.room_id!r} needs at least 3 vertices")
        shape = _ShapelyPolygon(poly)
        if not shape.is_valid or not shape.exterior.is_simple:
            raise PlanError(f"room {self.room_id!r} polygon is not simple")
        if shape.area <= 0.0:
            raise PlanError(f"room {self.room_id!r} polygon has zero area")

    @property
    def area(self) -> float:
        return _ShapelyPolygon(self.polygon).area


@dataclass(frozen=True)
class FloorPlan:
    rooms: tuple[Room, ...]
    outer_boundary: tuple[Point, ...]
    anchors: tuple[AnchorConfig, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "rooms", tuple(self.rooms))
        object.__setattr__(self, "anchors", tuple(self.anchors))
        object.__setattr__(self, "outer_boundary", _as_polygon(self.outer_boundary))
        self._validate()

    def _validate(self):
        if len(self.outer_boundary) < 3:
            raise PlanError("outer boundary needs at least 3 vertices")
        outer = _ShapelyPolygon(self.outer_boundary)
        if not outer.is_valid or outer.area <= 0.0:
            raise PlanError("outer boundary is not a simple polygon with positive area")
        if not self.rooms:
            raise PlanError("plan has no rooms")

        room_ids = [r.room_id for r in self.rooms]
        if len(set(room_ids)) != len(room_ids):
            raise PlanError("duplicate room_id")
        anchor_ids = [a.anchor_id for a in self.anchors]
        if len(set(anchor_ids)) != len(anchor_ids):
            raise PlanError("duplicate anchor_id")

        grown = outer.buffer(GEOMETRY_TOL)
        shapes = [_ShapelyPolygon(r.polygon) for r in self.rooms]
        for room, shape in zip(self.rooms, shapes):
            if not grown.contains(shape):
                raise PlanError(f"room {room.room_id!r} not contained in outer boundary")
        for i in range(len(shapes)):
            for j in range(i + 1, len(shapes)):
                if shapes[i].intersection(shapes[j]).area > GEOMETRY_TOL:
                    raise PlanError(
                        f"rooms {self.rooms[i].room_id!r} and "
                        f"{self.rooms[j].room_id!r} overlap"
                    )
        for anchor in self.anchors:
            if not grown.covers(_ShapelyPoint(anchor.position)):
                raise PlanError(f"anchor {anchor.anchor_id!r} lies outside the outer boundary")

    @property
    def room_ids(self) -> list[str]:
        return [r.room_id for r in self.rooms]

    @property
    def anchor_ids(self) -> list[str]:
        return [a.anchor_id for a in self.anchors]

    def anchor_positions(self) -> np.ndarray:
        return np.array([a.position for a in self.anchors], dtype=float).reshape(-1, 2)

    def anchor(self, anchor_id: str) -> AnchorConfig:
        for a in self.anchors:
            if a.anchor_id == anchor_id:
                return a
        raise KeyError(anchor_id)

    def room(self, room_id: str) -> Room:
        for r in self.rooms:
            if r.room_id == room_id:
                return r
        raise KeyError(room_id)

    def bounding_box(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) over the outer boundary and all rooms."""
        pts = np.array(
            list(self.outer_boundary) + [v for r in self.rooms for v in r.polygon]
        )
        xmin, ymin = pts.min(axis=0)
        xmax, ymax = pts.max(axis=0)
        return float(xmin), float(ymin), float(xmax), float(ymax)

    def to_dict(self) -> dict:
        return {
            "outer_boundary": [list(v) for v in self.outer_boundary],
            "rooms": [
                {"id": r.room_id, "polygon": [list(v) for v in r.polygon]}
                for r in self.rooms
            ],
            "anchors": [
                {"id": a.anchor_id, "position": list(a.position)} for a in self.anchors
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FloorPlan":
        try:
            rooms = [Room(r["id"], r["polygon"]) for r in data["rooms"]]
            anchors = [AnchorConfig(a["id"], a["position"]) for a in data.get("anchors", [])]
            return cls(rooms, data["outer_boundary"], anchors)
        except (KeyError, TypeError, IndexError) as exc:
            raise PlanError(f"malformed floor plan document: {exc!r}") from exc


def load_plan(path) -> FloorPlan:
    with open(path, encoding="utf-8") as fh:
        return FloorPlan.from_dict(json.load(fh))


def save_plan(plan: FloorPlan, path) -> None:
    Path(path).write_text(json.dumps(plan.to_dict(), indent=2) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# vectorized primitives


def _segment_distances(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances from each point (N, 2) to each segment a[j]-b[j] -> (N, S)."""
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = points[:, None, :] - a[None, :, :]
    t = np.einsum("nsj,sj->ns", ap, ab) / denom
    t = np.clip(t, 0.0, 1.0)
    foot = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.hypot(points[:, None, 0] - foot[..., 0], points[:, None, 1] - foot[..., 1])


def _edges(polygon) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(polygon, dtype=float)
    return a, np.roll(a, -1, axis=0)


def points_in_polygon(points, polygon, tol: float = GEOMETRY_TOL) -> np.ndarray:
    """Closed (boundary-inclusive) containment test for an array of points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a, b = _edges(polygon)
    on_edge = (_segment_distances(pts, a, b) <= tol).any(axis=1)

    px, py = pts[:, 0:1], pts[:, 1:2]
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    straddles = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
    crossings = (straddles & (px < x_cross)).sum(axis=1)
    return on_edge | (crossings % 2 == 1)


def room_indices(plan: FloorPlan, points) -> np.ndarray:
    """Index into plan.rooms for each point, -1 where no room contains it."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    out = np.full(len(pts), -1, dtype=int)
    for idx, room in enumerate(plan.rooms):
        free = out < 0
        if not free.any():
            break
        hit = points_in_polygon(pts[free], room.polygon)
        sel = np.flatnonzero(free)[hit]
        out[sel] = idx
    return out


# --------------------------------------------------------------------------
# operations


def point_in_room(plan: FloorPlan, p: Sequence[float]) -> Optional[str]:
    """Room containing ``p`` (edges included), first listed room on ties."""
    idx = room_indices(plan, [p])[0]
    return None if idx < 0 else plan.rooms[idx].room_id


def clamp_to_boundary(plan: FloorPlan, p: Sequence[float]) -> Point:
    """Return ``p`` if inside the outer boundary, else its nearest boundary point."""
    pt = np.asarray(_as_point(p), dtype=float)
    if points_in_polygon(pt, plan.outer_boundary)[0]:
        return (float(pt[0]), float(pt[1]))

    a, b = _edges(plan.outer_boundary)
    ab = b - a
    t = np.clip(((pt - a) * ab).sum(axis=1) / (ab * ab).sum(axis=1), 0.0, 1.0)
    foot = a + t[:, None] * ab
    dist = np.hypot(foot[:, 0] - pt[0], foot[:, 1] - pt[1])
    best = foot[int(np.argmin(dist))]
    return (float(best[0]), float(best[1]))


def grid_arrays(plan: FloorPlan, spacing: float) -> tuple[np.ndarray, np.ndarray]:
    """Lattice nodes covered by rooms as ``(positions (N, 2), room index (N,))``.

    The lattice starts at the bounding-box minimum corner. Row-major order:
    x varies fastest, rows advance in y.
    """
    spacing = float(spacing)
    if not (spacing > 0.0 and math.isfinite(spacing)):
        raise ValueError(f"grid spacing must be positive, got {spacing!r}")
    xmin, ymin, xmax, ymax = plan.bounding_box()
    nx = int(math.floor((xmax - xmin) / spacing + GEOMETRY_TOL)) + 1
    ny = int(math.floor((ymax - ymin) / spacing + GEOMETRY_TOL)) + 1
    xs = xmin + spacing * np.arange(nx)
    ys = ymin + spacing * np.arange(ny)
    gx, gy = np.meshgrid(xs, ys)
    nodes = np.column_stack([gx.ravel(), gy.ravel()])
    rooms = room_indices(plan, nodes)
    keep = rooms >= 0
    return nodes[keep], rooms[keep]


def generate_grid(plan: FloorPlan, spacing: float) -> list[tuple[Point, str]]:
    nodes, rooms = grid_arrays(plan, spacing)
    ids = plan.room_ids
    return [((float(x), float(y)), ids[r]) for (x, y), r in zip(nodes, rooms)]
