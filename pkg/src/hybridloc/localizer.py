"""RSS-only fingerprinting against a radio map.

Each measurement is compared with every map point by the RMS level
difference over the anchors both of them carry. The position estimate is
the inverse-distance weighted mean of the ``k`` best-matching map points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .calibration import RssMeasurement
from .floorplan import Point
from .radiomap import RadioMap, RadioMapPoint


class InsufficientOverlapError(ValueError):
    """Measurement and map point share too few anchors."""


class NoEligiblePointsError(ValueError):
    """No map point shares enough anchors with the measurement."""


@dataclass(frozen=True)
class LocalizerConfig:
    k: int = 5
    distance_epsilon: float = 1e-9  # dB
    smoothing_window: int = 5
    min_common_anchors: int = 2

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.smoothing_window < 1:
            raise ValueError("smoothing window must be >= 1")
        if not self.distance_epsilon > 0:
            raise ValueError("distance epsilon must be positive")
        if self.min_common_anchors < 1:
            raise ValueError("min_common_anchors must be >= 1")

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "distance_epsilon": self.distance_epsilon,
            "smoothing_window": self.smoothing_window,
            "min_common_anchors": self.min_common_anchors,
        }


@dataclass(frozen=True)
class PositionEstimate:
    timestamp: float
    position: Point
    neighbor_ids: tuple[int, ...] = ()
    distances: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"t": self.timestamp, "x": self.position[0], "y": self.position[1]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PositionEstimate":
        return cls(float(d["t"]), (float(d["x"]), float(d["y"])))


def signature_distance(
    meas: RssMeasurement, point: RadioMapPoint, min_common_anchors: int = 2
) -> float:
    """RMS level difference in dB over anchors present in both vectors."""
    common = [a for a in point.predicted if a in meas.levels]
    if len(common) < min_common_anchors:
        raise InsufficientOverlapError(
            f"{len(common)} common anchor(s), need {min_common_anchors}"
        )
    diff = np.array([meas.levels[a] - point.predicted[a] for a in common], dtype=float)
    return math.sqrt(float(diff @ diff) / len(common))


def _measurement_vector(meas: RssMeasurement, anchor_ids: Sequence[str]) -> np.ndarray:
    unknown = set(meas.levels) - set(anchor_ids)
    if unknown:
        raise ValueError(f"measurement references anchors not in the map: {sorted(unknown)}")
    return np.array([meas.levels.get(a, np.nan) for a in anchor_ids], dtype=float)


def map_distances(
    meas: RssMeasurement, radio_map: RadioMap, min_common_anchors: int = 2
) -> np.ndarray:
    """Signature distance to every map point; NaN where overlap is too small."""
    vec = _measurement_vector(meas, radio_map.anchor_ids)
    present = ~np.isnan(vec)
    levels = radio_map.levels[:, present]
    known = ~np.isnan(levels)
    m = known.sum(axis=1)
    diff = np.where(known, levels - vec[present], 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        dist = np.sqrt((diff * diff).sum(axis=1) / m)
    dist[m < min_common_anchors] = np.nan
    return dist


def localize(
    meas: RssMeasurement, radio_map: RadioMap, config: LocalizerConfig = LocalizerConfig()
) -> PositionEstimate:
    if len(radio_map) == 0:
        raise NoEligiblePointsError("radio map is empty")
    dist = map_distances(meas, radio_map, config.min_common_anchors)
    eligible = np.flatnonzero(~np.isnan(dist))
    if eligible.size == 0:
        raise NoEligiblePointsError(
            f"t={meas.timestamp}: no map point shares {config.min_common_anchors} anchors"
        )
    # stable sort: ties at the k-th place go to the earlier map point
    order = eligible[np.argsort(dist[eligible], kind="stable")]
    chosen = order[: config.k]
    d = dist[chosen]
    w = 1.0 / np.maximum(d, config.distance_epsilon)
    xy = (w[:, None] * radio_map.positions[chosen]).sum(axis=0) / w.sum()
    return PositionEstimate(
        meas.timestamp,
        (float(xy[0]), float(xy[1])),
        tuple(int(i) for i in chosen),
        tuple(float(v) for v in d),
    )


def localize_batch(
    measurements: Iterable[RssMeasurement],
    radio_map: RadioMap,
    config: LocalizerConfig = LocalizerConfig(),
) -> list[PositionEstimate]:
    return [localize(m, radio_map, config) for m in measurements]


def smooth(estimates: Sequence[PositionEstimate], window: int = 5) -> list[PositionEstimate]:
    """Trailing moving average of positions over the last ``window`` estimates."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not estimates:
        return []
    xy = np.array([e.position for e in estimates], dtype=float)
    out = []
    for i, est in enumerate(estimates):
        mean = xy[max(0, i + 1 - window) : i + 1].mean(axis=0)
        out.append(replace(est, position=(float(mean[0]), float(mean[1]))))
    return out


def save_estimates(estimates: Iterable[PositionEstimate], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in estimates:
            fh.write(json.dumps(e.to_dict(), sort_keys=True) + "\n")


def load_estimates(path) -> list[PositionEstimate]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(PositionEstimate.from_dict(json.loads(line)))
    return out
