"""Trajectory error (distance to a reference polyline) and its empirical CDF."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .floorplan import Point


@dataclass(frozen=True)
class ReferencePath:
    waypoints: tuple[Point, ...]

    def __post_init__(self):
        wp = tuple((float(x), float(y)) for x, y in self.waypoints)
        object.__setattr__(self, "waypoints", wp)
        if len(wp) < 2:
            raise ValueError("reference path needs at least 2 waypoints")
        for a, b in zip(wp, wp[1:]):
            if a == b:
                raise ValueError(f"consecutive waypoints coincide at {a}")

    @classmethod
    def load(cls, path) -> "ReferencePath":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh)["waypoints"])


@dataclass
class ErrorStats:
    errors: np.ndarray
    median: float
    max: float
    mean: float
    ecdf: list[tuple[float, float]] = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "count": int(self.errors.size),
            "median": self.median,
            "max": self.max,
            "mean": self.mean,
            "ecdf": [list(p) for p in self.ecdf],
        }


def distance_to_polyline(points, waypoints) -> np.ndarray:
    """Minimum Euclidean distance from each point to the segments of a polyline."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    wp = np.asarray(waypoints, dtype=float)
    a, b = wp[:-1], wp[1:]
    ab = b - a
    t = ((pts[:, None, :] - a[None]) * ab[None]).sum(axis=2) / (ab * ab).sum(axis=1)
    t = np.clip(t, 0.0, 1.0)
    foot = a[None] + t[..., None] * ab[None]
    d = np.hypot(pts[:, None, 0] - foot[..., 0], pts[:, None, 1] - foot[..., 1])
    return d.min(axis=1)


def ecdf(errors: Iterable[float]) -> list[tuple[float, float]]:
    """Right-continuous empirical CDF at the sorted unique values."""
    e = np.asarray(list(errors), dtype=float)
    if e.size == 0:
        raise ValueError("ECDF of an empty sample")
    values, counts = np.unique(e, return_counts=True)
    frac = np.cumsum(counts) / e.size
    return [(float(v), float(f)) for v, f in zip(values, frac)]


def ecdf_at(table: Sequence[tuple[float, float]], value: float) -> float:
    """Fraction of the sample at or below ``value``."""
    frac = 0.0
    for v, f in table:
        if v > value:
            break
        frac = f
    return frac


def lower_quantile(errors, q: float) -> float:
    return float(np.quantile(np.asarray(errors, dtype=float), q, method="lower"))


def trajectory_error(estimates, ref: ReferencePath) -> ErrorStats:
    """Distance of each estimate from the reference path, with summary stats.

    ``estimates`` may be :class:`PositionEstimate` objects or plain points.
    """
    pts = [getattr(e, "position", e) for e in estimates]
    if not pts:
        raise ValueError("no estimates to evaluate")
    err = distance_to_polyline(pts, ref.waypoints)
    return ErrorStats(
        errors=err,
        median=lower_quantile(err, 0.5),
        max=float(err.max()),
        mean=float(err.mean()),
        ecdf=ecdf(err),
    )


def write_ecdf_table(table: Sequence[tuple[float, float]], path) -> None:
    lines = ["# error_m\tfraction"]
    lines += [f"{v!r}\t{f!r}" for v, f in table]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def save_stats(stats: ErrorStats, path, meta: dict | None = None) -> None:
    doc = stats.to_dict()
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")
