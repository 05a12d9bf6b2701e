"""Signature database construction from position fixes and RSS packets.

Position fixes (from UWB or the simulator) arrive at a lower rate than BLE
packets. Every fix collects the packets within ``max_skew`` seconds of it,
averages them per anchor in dBm and becomes one radio signature tagged with
the room it falls in.
"""

from __future__ import annotations

import bisect
import enum
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .floorplan import FloorPlan, Point, clamp_to_boundary, point_in_room

log = logging.getLogger(__name__)

RSS_MIN_DBM = -120.0
RSS_MAX_DBM = 0.0
DEFAULT_MAX_SKEW = 0.1  # s


class StreamError(ValueError):
    """Raised for malformed or out-of-order input streams."""


class FixSource(str, enum.Enum):
    UWB = "uwb"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class PositionFix:
    timestamp: float
    position: Point
    source: FixSource = FixSource.UWB

    def to_dict(self) -> dict:
        return {
            "t": self.timestamp,
            "x": self.position[0],
            "y": self.position[1],
            "source": FixSource(self.source).value,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "PositionFix":
        return cls(float(d["t"]), (float(d["x"]), float(d["y"])), FixSource(d.get("source", "uwb")))


@dataclass(frozen=True)
class RssMeasurement:
    timestamp: float
    levels: Mapping[str, float]

    def to_dict(self) -> dict:
        return {"t": self.timestamp, "levels": dict(self.levels)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "RssMeasurement":
        return cls(float(d["t"]), {str(k): float(v) for k, v in d["levels"].items()})


@dataclass(frozen=True)
class Signature:
    position: Point
    room_id: str
    levels: Mapping[str, float]
    timestamp: float

    def to_dict(self) -> dict:
        return {
            "t": self.timestamp,
            "x": self.position[0],
            "y": self.position[1],
            "room": self.room_id,
            "levels": dict(self.levels),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Signature":
        return cls(
            (float(d["x"]), float(d["y"])),
            str(d["room"]),
            {str(k): float(v) for k, v in d["levels"].items()},
            float(d["t"]),
        )


@dataclass
class PairingResult:
    """Signatures plus the bookkeeping of fixes that produced none."""

    signatures: list[Signature] = field(default_factory=list)
    unmatched_fixes: int = 0  # no packet within the window
    dropped_outside_rooms: int = 0  # clamped position in no room

    def __len__(self):
        return len(self.signatures)

    def __iter__(self):
        return iter(self.signatures)


def validate_measurement(meas: RssMeasurement, anchor_ids: Iterable[str]) -> None:
    known = set(anchor_ids)
    for anchor, level in meas.levels.items():
        if anchor not in known:
            raise StreamError(f"t={meas.timestamp}: unknown anchor {anchor!r}")
        if not math.isfinite(level) or not RSS_MIN_DBM <= level <= RSS_MAX_DBM:
            raise StreamError(
                f"t={meas.timestamp}: level {level!r} for {anchor!r} outside "
                f"[{RSS_MIN_DBM:g}, {RSS_MAX_DBM:g}] dBm"
            )


def _check_order(times: Sequence[float], name: str, strict: bool) -> None:
    for prev, cur in zip(times, times[1:]):
        if cur < prev or (strict and cur == prev):
            raise StreamError(f"{name} stream is not time-ordered at t={cur}")


def pair_signatures(
    fixes: Iterable[PositionFix],
    rss: Iterable[RssMeasurement],
    plan: FloorPlan,
    max_skew: float = DEFAULT_MAX_SKEW,
) -> PairingResult:
    fixes = list(fixes)
    rss = list(rss)
    if not max_skew > 0:
        raise ValueError(f"max_skew must be positive, got {max_skew!r}")
    fix_times = [f.timestamp for f in fixes]
    rss_times = [m.timestamp for m in rss]
    _check_order(fix_times, "position fix", strict=True)
    _check_order(rss_times, "RSS", strict=False)
    for m in rss:
        validate_measurement(m, plan.anchor_ids)

    result = PairingResult()
    for fix in fixes:
        lo = bisect.bisect_left(rss_times, fix.timestamp - max_skew)
        hi = bisect.bisect_right(rss_times, fix.timestamp + max_skew)
        window = [m for m in rss[lo:hi] if abs(m.timestamp - fix.timestamp) <= max_skew]
        sums: dict[str, float] = {}
        counts: Counter = Counter()
        for m in window:
            for anchor, level in m.levels.items():
                sums[anchor] = sums.get(anchor, 0.0) + level
                counts[anchor] += 1
        if not counts:
            result.unmatched_fixes += 1
            continue

        position = clamp_to_boundary(plan, fix.position)
        room = point_in_room(plan, position)
        if room is None:
            result.dropped_outside_rooms += 1
            continue
        # fixed anchor order keeps the averages independent of packet order
        levels = {
            a: math.fsum(m.levels[a] for m in window if a in m.levels) / counts[a]
            for a in plan.anchor_ids
            if a in counts
        }
        result.signatures.append(Signature(position, room, levels, fix.timestamp))

    log.info(
        "paired %d signatures from %d fixes (%d without packets, %d outside rooms)",
        len(result.signatures),
        len(fixes),
        result.unmatched_fixes,
        result.dropped_outside_rooms,
    )
    return result


@dataclass
class SignatureStats:
    count: int
    per_room: dict[str, int]
    coverage: dict[str, float]
    duration: float

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "per_room": self.per_room,
            "coverage": self.coverage,
            "duration": self.duration,
        }


def signature_stats(
    signatures: Iterable[Signature], anchor_ids: Optional[Iterable[str]] = None
) -> SignatureStats:
    """Counts per room, fraction of signatures hearing each anchor, time span."""
    sigs = list(signatures)
    per_room = Counter(s.room_id for s in sigs)
    heard = Counter(a for s in sigs for a in s.levels)
    anchors = list(anchor_ids) if anchor_ids is not None else sorted(heard)
    n = len(sigs)
    coverage = {a: (heard[a] / n if n else 0.0) for a in anchors}
    duration = (max(s.timestamp for s in sigs) - min(s.timestamp for s in sigs)) if sigs else 0.0
    return SignatureStats(n, dict(sorted(per_room.items())), coverage, duration)


# --------------------------------------------------------------------------
# file formats


def write_jsonl(records: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StreamError(f"{path}:{lineno}: {exc}") from exc
    return out


def load_fixes(path) -> list[PositionFix]:
    try:
        return [PositionFix.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, TypeError, ValueError) as exc:
        raise StreamError(f"{path}: malformed position fix: {exc}") from exc


def load_rss(path) -> list[RssMeasurement]:
    try:
        return [RssMeasurement.from_dict(r) for r in read_jsonl(path)]
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise StreamError(f"{path}: malformed RSS record: {exc}") from exc


def save_signatures(signatures: Iterable[Signature], path, meta: Optional[dict] = None) -> None:
    doc = {"meta": meta or {}, "signatures": [s.to_dict() for s in signatures]}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_signatures(path) -> list[Signature]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return [Signature.from_dict(s) for s in doc["signatures"]]
    except (KeyError, TypeError, AttributeError, ValueError) as exc:
        raise StreamError(f"{path}: malformed signature database: {exc}") from exc
