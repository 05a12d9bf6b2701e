"""Dense radio map: predicted per-anchor levels on a regular room grid."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .floorplan import FloorPlan, Point, grid_arrays
from .pathloss import RoomModelSet, anchor_distances, predict

DEFAULT_SPACING = 0.10  # m
FORMAT_VERSION = 1


class ProvenanceError(ValueError):
    """A radio map was paired with a plan it was not built from."""


def canonical_hash(doc) -> str:
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def plan_fingerprint(plan: FloorPlan) -> str:
    return canonical_hash(plan.to_dict())


@dataclass(frozen=True)
class RadioMapPoint:
    position: Point
    room_id: str
    predicted: Mapping[str, float]


@dataclass
class RadioMap:
    """Grid positions ``(N, 2)`` with levels ``(N, n_anchors)`` in dBm.

    Stored column-wise for fast matching; :attr:`points` gives the per-node
    view.
    """

    spacing: float
    anchor_ids: list[str]
    positions: np.ndarray
    room_ids: list[str]
    levels: np.ndarray
    provenance: dict
    fallbacks: Optional[dict] = None  # "room|anchor" -> fallback tag

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        self.levels = np.asarray(self.levels, dtype=float).reshape(len(self.positions), len(self.anchor_ids))
        if not self.spacing > 0:
            raise ValueError("radio map spacing must be positive")
        if len(self.room_ids) != len(self.positions):
            raise ValueError("room_ids and positions differ in length")

    def __len__(self) -> int:
        return len(self.positions)

    def point(self, i: int) -> RadioMapPoint:
        x, y = self.positions[i]
        return RadioMapPoint(
            (float(x), float(y)),
            self.room_ids[i],
            {a: float(v) for a, v in zip(self.anchor_ids, self.levels[i])},
        )

    @property
    def points(self) -> list[RadioMapPoint]:
        return [self.point(i) for i in range(len(self))]

    def check_plan(self, plan: FloorPlan) -> None:
        expected = self.provenance.get("plan_sha256")
        actual = plan_fingerprint(plan)
        if expected != actual:
            raise ProvenanceError(
                f"radio map was built for plan {expected!s:.12}..., "
                f"got plan {actual:.12}..."
            )

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "spacing": self.spacing,
            "anchors": list(self.anchor_ids),
            "provenance": self.provenance,
            "fallbacks": self.fallbacks or {},
            "points": [
                {
                    "x": float(p[0]),
                    "y": float(p[1]),
                    "room": r,
                    "levels": [float(v) for v in lv],
                }
                for p, r, lv in zip(self.positions, self.room_ids, self.levels)
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RadioMap":
        pts = d["points"]
        anchors = list(d["anchors"])
        return cls(
            spacing=float(d["spacing"]),
            anchor_ids=anchors,
            positions=np.array([[p["x"], p["y"]] for p in pts], dtype=float).reshape(-1, 2),
            room_ids=[p["room"] for p in pts],
            levels=np.array([p["levels"] for p in pts], dtype=float).reshape(-1, len(anchors)),
            provenance=dict(d.get("provenance", {})),
            fallbacks=dict(d.get("fallbacks", {})),
        )


def build_radio_map(
    models: RoomModelSet, plan: FloorPlan, spacing: float = DEFAULT_SPACING
) -> RadioMap:
    models.check_complete(plan)
    positions, room_idx = grid_arrays(plan, spacing)
    dist = anchor_distances(plan, positions)
    anchors = plan.anchor_ids
    levels = np.empty_like(dist)
    for r, room in enumerate(plan.room_ids):
        rows = room_idx == r
        for c, anchor in enumerate(anchors):
            levels[rows, c] = predict(models.params(room, anchor), dist[rows, c])

    ids = plan.room_ids
    provenance = {
        "plan_sha256": plan_fingerprint(plan),
        "models_sha256": canonical_hash(models.to_dict()),
    }
    fallbacks = {
        f"{r}|{a}": models[(r, a)].fallback.value
        for r in ids
        for a in anchors
        if models[(r, a)].fallback.value != "none"
    }
    return RadioMap(
        spacing=float(spacing),
        anchor_ids=list(anchors),
        positions=positions,
        room_ids=[ids[i] for i in room_idx],
        levels=levels,
        provenance=provenance,
        fallbacks=fallbacks,
    )


def save_radio_map(radio_map: RadioMap, path, meta: Optional[dict] = None) -> None:
    doc = radio_map.to_dict()
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_radio_map(path) -> RadioMap:
    with open(path, encoding="utf-8") as fh:
        return RadioMap.from_dict(json.load(fh))
