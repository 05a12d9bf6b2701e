"""Synthetic calibration and test data.

Stands in for the physical subsystems: a walker moving at constant speed
along a polyline, BLE levels generated from known per-room path-loss models
plus Gaussian noise and random packet loss, and UWB-like position fixes with
isotropic Gaussian error.

Randomness comes from numpy's PCG64 generator seeded with
``SeedSequence([seed, stream])`` where ``stream`` is 1 for BLE and 2 for UWB,
so equal seeds reproduce identical streams on every platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .calibration import RSS_MAX_DBM, RSS_MIN_DBM, FixSource, PositionFix, RssMeasurement
from .floorplan import FloorPlan, GEOMETRY_TOL, Point, load_plan, room_indices
from .pathloss import PathLossParams, anchor_distances, predict

BLE_STREAM = 1
UWB_STREAM = 2

DEFAULT_UWB_PERIOD = 0.16  # s
DEFAULT_BLE_RATE = 10.0  # packets/s
DEFAULT_RSS_SIGMA = 4.0  # dB
DEFAULT_UWB_SIGMA = 0.2  # m


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class GroundTruthScene:
    plan: FloorPlan
    true_models: Mapping[tuple[str, str], PathLossParams]
    rss_noise_sigma: float = DEFAULT_RSS_SIGMA
    rss_drop_prob: float = 0.0
    uwb_noise_sigma: float = DEFAULT_UWB_SIGMA
    seed: int = 0

    def __post_init__(self):
        if self.rss_noise_sigma < 0 or self.uwb_noise_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if not 0.0 <= self.rss_drop_prob < 1.0:
            raise ValueError("rss_drop_prob must lie in [0, 1)")
        missing = [
            (r, a)
            for r in self.plan.room_ids
            for a in self.plan.anchor_ids
            if (r, a) not in self.true_models
        ]
        if missing:
            raise ValueError(f"true_models incomplete, missing {missing}")

    def with_noise(self, rss_sigma=None, drop_prob=None, uwb_sigma=None) -> "GroundTruthScene":
        return GroundTruthScene(
            self.plan,
            self.true_models,
            self.rss_noise_sigma if rss_sigma is None else rss_sigma,
            self.rss_drop_prob if drop_prob is None else drop_prob,
            self.uwb_noise_sigma if uwb_sigma is None else uwb_sigma,
            self.seed,
        )

    def to_dict(self, plan_ref=None) -> dict:
        return {
            "plan": plan_ref if plan_ref is not None else self.plan.to_dict(),
            "true_models": [
                {"room": r, "anchor": a, **p.to_dict()} for (r, a), p in self.true_models.items()
            ],
            "rss_noise_sigma": self.rss_noise_sigma,
            "rss_drop_prob": self.rss_drop_prob,
            "uwb_noise_sigma": self.uwb_noise_sigma,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping, base_dir=None) -> "GroundTruthScene":
        plan = d["plan"]
        if isinstance(plan, str):
            plan_path = Path(base_dir or ".") / plan
            plan = load_plan(plan_path)
        else:
            plan = FloorPlan.from_dict(plan)
        models = {
            (m["room"], m["anchor"]): PathLossParams(float(m["p0"]), float(m["gamma"]), float(m.get("d0", 1.0)))
            for m in d["true_models"]
        }
        return cls(
            plan,
            models,
            float(d.get("rss_noise_sigma", DEFAULT_RSS_SIGMA)),
            float(d.get("rss_drop_prob", 0.0)),
            float(d.get("uwb_noise_sigma", DEFAULT_UWB_SIGMA)),
            int(d.get("seed", 0)),
        )


def load_scene(path) -> GroundTruthScene:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return GroundTruthScene.from_dict(json.load(fh), base_dir=path.parent)


@dataclass(frozen=True)
class WalkSpec:
    waypoints: tuple[Point, ...]
    speed: float
    uwb_period: float = DEFAULT_UWB_PERIOD
    ble_rate: float = DEFAULT_BLE_RATE

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple((float(x), float(y)) for x, y in self.waypoints))
        if not self.speed > 0:
            raise ValueError("walk speed must be positive")
        if not self.uwb_period > 0 or not self.ble_rate > 0:
            raise ValueError("UWB period and BLE rate must be positive")

    def to_dict(self) -> dict:
        return {
            "waypoints": [list(w) for w in self.waypoints],
            "speed": self.speed,
            "uwb_period": self.uwb_period,
            "ble_rate": self.ble_rate,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "WalkSpec":
        return cls(
            d["waypoints"],
            float(d["speed"]),
            float(d.get("uwb_period", DEFAULT_UWB_PERIOD)),
            float(d.get("ble_rate", DEFAULT_BLE_RATE)),
        )


def load_walk(path) -> WalkSpec:
    with open(path, encoding="utf-8") as fh:
        return WalkSpec.from_dict(json.load(fh))


@dataclass
class GroundTruthWalk:
    """Constant-speed traversal of a polyline, sampled on a master clock."""

    waypoints: np.ndarray
    speed: float
    times: np.ndarray
    positions: np.ndarray
    _cumlen: np.ndarray = field(repr=False)

    @property
    def duration(self) -> float:
        return float(self._cumlen[-1] / self.speed)

    def position_at(self, t) -> np.ndarray:
        """Exact positions on the polyline at times ``t`` (clipped to the walk)."""
        s = np.clip(np.asarray(t, dtype=float) * self.speed, 0.0, self._cumlen[-1])
        seg = np.clip(np.searchsorted(self._cumlen, s, side="right") - 1, 0, len(self.waypoints) - 2)
        seg_len = self._cumlen[seg + 1] - self._cumlen[seg]
        frac = np.where(seg_len > 0, (s - self._cumlen[seg]) / np.where(seg_len > 0, seg_len, 1.0), 0.0)
        a = self.waypoints[seg]
        b = self.waypoints[seg + 1]
        return a + frac[..., None] * (b - a)

    def records(self) -> list[dict]:
        return [
            {"t": float(t), "x": float(p[0]), "y": float(p[1])}
            for t, p in zip(self.times, self.positions)
        ]


def _ticks(duration: float, period: float) -> np.ndarray:
    n = int(math.floor(duration / period + GEOMETRY_TOL)) + 1
    return np.arange(n) * period


def synth_walk(spec: WalkSpec) -> GroundTruthWalk:
    """Ground truth at the BLE clock, with the final waypoint appended if off-clock."""
    wp = np.asarray(spec.waypoints, dtype=float).reshape(-1, 2)
    if len(wp) < 2:
        raise ValueError("walk needs at least two waypoints")
    seglen = np.hypot(*np.diff(wp, axis=0).T)
    total = float(seglen.sum())
    if total <= 0.0:
        raise ValueError("walk polyline has zero length")
    cumlen = np.concatenate([[0.0], np.cumsum(seglen)])
    duration = total / spec.speed
    n = int(math.floor(duration * spec.ble_rate + GEOMETRY_TOL)) + 1
    times = np.arange(n) / spec.ble_rate
    if duration - times[-1] > GEOMETRY_TOL:
        times = np.append(times, duration)
    walk = GroundTruthWalk(wp, float(spec.speed), times, np.empty((0, 2)), cumlen)
    walk.positions = walk.position_at(times)
    return walk


def true_levels(scene: GroundTruthScene, points) -> np.ndarray:
    """Noise-free levels (N, n_anchors) from the generating per-room models."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    plan = scene.plan
    rooms = room_indices(plan, pts)
    if np.any(rooms < 0):
        bad = pts[np.flatnonzero(rooms < 0)[0]]
        raise ValueError(f"position {tuple(bad)} lies in no room")
    dist = anchor_distances(plan, pts)
    out = np.empty_like(dist)
    for r, room in enumerate(plan.room_ids):
        rows = rooms == r
        for c, anchor in enumerate(plan.anchor_ids):
            out[rows, c] = predict(scene.true_models[(room, anchor)], dist[rows, c])
    return out


def synth_ble(
    scene: GroundTruthScene,
    truth: GroundTruthWalk,
    spec: WalkSpec,
    seed: Optional[int] = None,
) -> list[RssMeasurement]:
    """One packet per BLE tick; each anchor entry noisy and independently dropped.

    Levels are clipped to the accepted RSS range. Packets that lose every
    anchor are not emitted.
    """
    rng = stream_rng(scene.seed if seed is None else seed, BLE_STREAM)
    n = int(math.floor(truth.duration * spec.ble_rate + GEOMETRY_TOL)) + 1
    ticks = np.arange(n) / spec.ble_rate
    clean = true_levels(scene, truth.position_at(ticks))
    noise = rng.normal(0.0, 1.0, clean.shape) * scene.rss_noise_sigma
    keep = rng.random(clean.shape) >= scene.rss_drop_prob
    levels = np.clip(clean + noise, RSS_MIN_DBM, RSS_MAX_DBM)
    anchors = scene.plan.anchor_ids
    out = []
    for t, row, k in zip(ticks, levels, keep):
        entry = {a: float(v) for a, v, kk in zip(anchors, row, k) if kk}
        if entry:
            out.append(RssMeasurement(float(t), entry))
    return out


def synth_uwb(
    truth: GroundTruthWalk,
    uwb_period: float = DEFAULT_UWB_PERIOD,
    uwb_noise_sigma: float = DEFAULT_UWB_SIGMA,
    seed: int = 0,
) -> list[PositionFix]:
    if not uwb_period > 0:
        raise ValueError("UWB period must be positive")
    rng = stream_rng(seed, UWB_STREAM)
    ticks = _ticks(truth.duration, uwb_period)
    pos = truth.position_at(ticks) + rng.normal(0.0, 1.0, (len(ticks), 2)) * uwb_noise_sigma
    return [
        PositionFix(float(t), (float(p[0]), float(p[1])), FixSource.SIMULATED)
        for t, p in zip(ticks, pos)
    ]
