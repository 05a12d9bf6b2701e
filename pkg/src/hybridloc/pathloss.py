"""Log-distance path-loss model and its per-(room, anchor) fitting.

The model is ``P_R = p0 - 10 * gamma * log10(d / d0)``. Parameters are fitted
by least squares with a Levenberg-Marquardt iteration (:func:`fit_lm`). Since
the model is linear in ``(p0, gamma)`` the same problem has a closed-form
solution (:func:`fit_linear_ls`), which the test-suite uses as an oracle.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .calibration import Signature
from .floorplan import FloorPlan

log = logging.getLogger(__name__)

DEFAULT_D0 = 1.0  # m
DEFAULT_GAMMA_BOUNDS = (0.1, 8.0)
DEFAULT_MIN_SAMPLES = 20
DEFAULT_MODEL_P0 = -60.0  # dBm
DEFAULT_MODEL_GAMMA = 2.0
MIN_DISTANCE = 1e-6  # m, floor for tag positions coincident with an anchor

LM_MAX_ITER = 200
LM_STEP_TOL = 1e-8
LM_COST_RTOL = 1e-10


class InsufficientDataError(ValueError):
    """Too few samples or distinct distances to identify (p0, gamma)."""


class Fallback(str, enum.Enum):
    NONE = "none"
    GLOBAL_ANCHOR_MODEL = "global_anchor_model"
    INSUFFICIENT_DATA = "insufficient_data"


@dataclass(frozen=True)
class PathLossParams:
    p0: float
    gamma: float
    d0: float = DEFAULT_D0

    def __post_init__(self):
        if not self.d0 > 0:
            raise ValueError(f"reference distance must be positive, got {self.d0!r}")

    def to_dict(self) -> dict:
        return {"p0": self.p0, "gamma": self.gamma, "d0": self.d0}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PathLossParams":
        return cls(float(d["p0"]), float(d["gamma"]), float(d.get("d0", DEFAULT_D0)))


@dataclass(frozen=True)
class FitSample:
    distance: float
    level: float

    def __post_init__(self):
        if not self.distance > 0:
            raise ValueError(f"sample distance must be positive, got {self.distance!r}")
        if not np.isfinite(self.level):
            raise ValueError(f"sample level must be finite, got {self.level!r}")


@dataclass(frozen=True)
class FitResult:
    params: PathLossParams
    rmse: float
    sample_count: int
    fallback: Fallback = Fallback.NONE
    clipped: bool = False  # gamma held at a bound
    iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "rmse": self.rmse,
            "sample_count": self.sample_count,
            "fallback": Fallback(self.fallback).value,
            "clipped": self.clipped,
            "iterations": self.iterations,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FitResult":
        return cls(
            PathLossParams.from_dict(d["params"]),
            float(d["rmse"]),
            int(d["sample_count"]),
            Fallback(d.get("fallback", "none")),
            bool(d.get("clipped", False)),
            int(d.get("iterations", 0)),
        )


def predict(params: PathLossParams, distance):
    """Received level in dBm at ``distance`` meters (scalar or array)."""
    d = np.asarray(distance, dtype=float)
    if np.any(~(d > 0)):
        raise ValueError("distance must be positive; the model is singular at d = 0")
    out = params.p0 - 10.0 * params.gamma * np.log10(d / params.d0)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# fitting


def _as_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(samples, tuple) and len(samples) == 2 and isinstance(samples[0], np.ndarray):
        d, y = samples
    else:
        samples = list(samples)
        d = np.array([s.distance for s in samples], dtype=float)
        y = np.array([s.level for s in samples], dtype=float)
    d = np.asarray(d, dtype=float)
    y = np.asarray(y, dtype=float)
    if d.shape != y.shape or d.ndim != 1:
        raise ValueError("distances and levels must be 1-D arrays of equal length")
    if np.any(~(d > 0)) or not np.all(np.isfinite(y)):
        raise ValueError("distances must be positive and levels finite")
    if d.size < 2 or np.unique(d).size < 2:
        raise InsufficientDataError(
            f"need at least 2 samples at 2 distinct distances, got {d.size} samples "
            f"at {np.unique(d).size} distance(s)"
        )
    return d, y


def _mse(p0: float, gamma: float, x: np.ndarray, y: np.ndarray) -> float:
    r = y - (p0 - 10.0 * gamma * x)
    return float(np.mean(r * r))


def _levenberg_marquardt(x, y, theta0, free) -> tuple[np.ndarray, int]:
    """Minimize the mean squared residual of the model over the free parameters.

    ``theta`` is ``[p0, gamma]``; ``free`` masks which entries may move. The
    damping uses Marquardt's diagonal scaling of the normal matrix.
    """
    theta = np.array(theta0, dtype=float)
    free = np.asarray(free, dtype=bool)
    # residual r = y - p0 + 10 gamma x; its Jacobian is constant
    jac = np.column_stack([-np.ones_like(x), 10.0 * x])[:, free]
    n = x.size
    jtj = jac.T @ jac / n
    scale = np.diag(np.diag(jtj))

    def residual(th):
        return y - th[0] + 10.0 * th[1] * x

    r = residual(theta)
    cost = float(r @ r) / n
    lam = 1e-3
    it = 0
    while it < LM_MAX_ITER:
        it += 1
        grad = jac.T @ r / n
        accepted = False
        while lam <= 1e16:
            try:
                delta = np.linalg.solve(jtj + lam * scale, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            # cost change from the residual increment; differencing two
            # nearly equal costs cannot resolve the last refinement steps
            dr = jac @ delta
            change = float(dr @ (2.0 * r + dr)) / n
            if change <= 0.0:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            break
        theta = theta.copy()
        theta[free] += delta
        r = residual(theta)
        prev_cost, cost = cost, float(r @ r) / n
        lam = max(lam * 0.1, 1e-15)
        if np.linalg.norm(delta) < LM_STEP_TOL or -change <= LM_COST_RTOL * prev_cost:
            break
    return theta, it


def _finish(p0, gamma, d0, x, y, clipped, iterations) -> FitResult:
    return FitResult(
        PathLossParams(float(p0), float(gamma), d0),
        rmse=float(np.sqrt(_mse(p0, gamma, x, y))),
        sample_count=int(x.size),
        fallback=Fallback.NONE,
        clipped=clipped,
        iterations=iterations,
    )


def fit_lm(
    samples,
    init: Optional[PathLossParams] = None,
    bounds: tuple[float, float] = DEFAULT_GAMMA_BOUNDS,
) -> FitResult:
    """Least-squares fit of (p0, gamma) by Levenberg-Marquardt.

    ``samples`` is a list of :class:`FitSample` or a ``(distances, levels)``
    pair of arrays. The default start point is (mean level, 2.0) at d0 = 1 m.
    If the unconstrained optimum puts gamma outside ``bounds`` the fit is
    repeated with gamma pinned to the violated bound and ``clipped`` is set.
    """
    d, y = _as_arrays(samples)
    if init is None:
        init = PathLossParams(float(np.mean(y)), DEFAULT_MODEL_GAMMA, DEFAULT_D0)
    g_lo, g_hi = bounds
    x = np.log10(d / init.d0)
    start = np.array([init.p0, float(np.clip(init.gamma, g_lo, g_hi))])

    theta, iters = _levenberg_marquardt(x, y, start, [True, True])
    clipped = False
    if not g_lo <= theta[1] <= g_hi:
        pinned = np.array([theta[0], np.clip(theta[1], g_lo, g_hi)])
        theta, more = _levenberg_marquardt(x, y, pinned, [True, False])
        iters += more
        clipped = True
    return _finish(theta[0], theta[1], init.d0, x, y, clipped, iters)


def fit_linear_ls(
    samples,
    d0: float = DEFAULT_D0,
    bounds: tuple[float, float] = DEFAULT_GAMMA_BOUNDS,
) -> FitResult:
    """Closed-form least squares on the regressor ``log10(d / d0)``."""
    d, y = _as_arrays(samples)
    x = np.log10(d / d0)
    xm, ym = x.mean(), y.mean()
    xc = x - xm
    # slope of y on x is -10 gamma
    gamma = -float(xc @ (y - ym)) / (10.0 * float(xc @ xc))
    g_lo, g_hi = bounds
    clipped = not g_lo <= gamma <= g_hi
    if clipped:
        gamma = float(np.clip(gamma, g_lo, g_hi))
    p0 = float(np.mean(y + 10.0 * gamma * x))
    return _finish(p0, gamma, d0, x, y, clipped, 0)


def fit_cost(result_or_params, samples) -> float:
    """Mean squared residual of a parameter set over ``samples``."""
    params = getattr(result_or_params, "params", result_or_params)
    d, y = _as_arrays(samples)
    return _mse(params.p0, params.gamma, np.log10(d / params.d0), y)


# --------------------------------------------------------------------------
# per-room model sets


@dataclass(frozen=True)
class FitConfig:
    min_samples: int = DEFAULT_MIN_SAMPLES
    gamma_bounds: tuple[float, float] = DEFAULT_GAMMA_BOUNDS
    d0: float = DEFAULT_D0
    method: str = "lm"  # or "linear"
    default_model: PathLossParams = field(
        default_factory=lambda: PathLossParams(DEFAULT_MODEL_P0, DEFAULT_MODEL_GAMMA, DEFAULT_D0)
    )

    def __post_init__(self):
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        lo, hi = self.gamma_bounds
        if not lo <= hi:
            raise ValueError("gamma bounds must satisfy lo <= hi")
        if self.method not in ("lm", "linear"):
            raise ValueError(f"unknown fitting method {self.method!r}")

    def to_dict(self) -> dict:
        return {
            "min_samples": self.min_samples,
            "gamma_bounds": list(self.gamma_bounds),
            "d0": self.d0,
            "method": self.method,
            "default_model": self.default_model.to_dict(),
        }


@dataclass
class RoomModelSet:
    models: dict[tuple[str, str], FitResult]
    gamma_bounds: tuple[float, float] = DEFAULT_GAMMA_BOUNDS
    d0: float = DEFAULT_D0

    def __getitem__(self, key: tuple[str, str]) -> FitResult:
        return self.models[key]

    def __contains__(self, key) -> bool:
        return key in self.models

    def params(self, room_id: str, anchor_id: str) -> PathLossParams:
        return self.models[(room_id, anchor_id)].params

    def check_complete(self, plan: FloorPlan) -> None:
        missing = [
            (r, a) for r in plan.room_ids for a in plan.anchor_ids if (r, a) not in self.models
        ]
        if missing:
            raise KeyError(f"model set lacks entries for {missing}")

    def to_dict(self) -> dict:
        return {
            "gamma_bounds": list(self.gamma_bounds),
            "d0": self.d0,
            "models": [
                {"room": r, "anchor": a, **fit.to_dict()}
                for (r, a), fit in self.models.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RoomModelSet":
        models = {(m["room"], m["anchor"]): FitResult.from_dict(m) for m in d["models"]}
        return cls(models, tuple(d.get("gamma_bounds", DEFAULT_GAMMA_BOUNDS)), float(d.get("d0", DEFAULT_D0)))


def save_models(models: RoomModelSet, path, meta: Optional[dict] = None) -> None:
    doc = {"meta": meta or {}, **models.to_dict()}
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_models(path) -> RoomModelSet:
    with open(path, encoding="utf-8") as fh:
        return RoomModelSet.from_dict(json.load(fh))


def anchor_distances(plan: FloorPlan, positions) -> np.ndarray:
    """2-D anchor-to-point distances (N, n_anchors), floored at MIN_DISTANCE."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    anchors = plan.anchor_positions()
    d = np.hypot(pts[:, None, 0] - anchors[None, :, 0], pts[:, None, 1] - anchors[None, :, 1])
    return np.maximum(d, MIN_DISTANCE)


def _fit(d, y, config: FitConfig) -> FitResult:
    if config.method == "linear":
        return fit_linear_ls((d, y), config.d0, config.gamma_bounds)
    init = PathLossParams(float(np.mean(y)), DEFAULT_MODEL_GAMMA, config.d0)
    return fit_lm((d, y), init, config.gamma_bounds)


def fit_room_models(
    signatures: Sequence[Signature],
    plan: FloorPlan,
    config: FitConfig = FitConfig(),
) -> RoomModelSet:
    """Fit one model per (room, anchor), falling back for sparse rooms.

    A (room, anchor) pair with fewer than ``config.min_samples`` usable
    samples gets the anchor's all-rooms fit; an anchor with no usable data at
    all gets ``config.default_model``.
    """
    room_ids = set(plan.room_ids)
    anchor_ids = plan.anchor_ids
    anchor_col = {a: i for i, a in enumerate(anchor_ids)}
    for s in signatures:
        if s.room_id not in room_ids:
            raise KeyError(f"signature at t={s.timestamp} references unknown room {s.room_id!r}")
        for a in s.levels:
            if a not in anchor_col:
                raise KeyError(f"signature at t={s.timestamp} references unknown anchor {a!r}")

    if signatures:
        dist = anchor_distances(plan, [s.position for s in signatures])
    else:
        dist = np.zeros((0, len(anchor_ids)))
    rooms = np.array([s.room_id for s in signatures], dtype=object)

    models: dict[tuple[str, str], FitResult] = {}
    for a in anchor_ids:
        col = anchor_col[a]
        has = np.array([a in s.levels for s in signatures], dtype=bool)
        levels = np.array([s.levels.get(a, np.nan) for s in signatures], dtype=float)

        global_fit: Optional[FitResult] = None
        if has.any():
            try:
                g = _fit(dist[has, col], levels[has], config)
                global_fit = FitResult(g.params, g.rmse, g.sample_count, Fallback.GLOBAL_ANCHOR_MODEL, g.clipped, g.iterations)
            except InsufficientDataError:
                global_fit = None
        if global_fit is None:
            global_fit = FitResult(config.default_model, 0.0, 0, Fallback.INSUFFICIENT_DATA)

        for r in plan.room_ids:
            sel = has & (rooms == r)
            fit = None
            if sel.sum() >= config.min_samples:
                try:
                    fit = _fit(dist[sel, col], levels[sel], config)
                except InsufficientDataError:
                    fit = None
            if fit is None:
                log.debug("room %s anchor %s: %d samples, using %s", r, a, int(sel.sum()), global_fit.fallback.value)
                fit = global_fit
            models[(r, a)] = fit
    return RoomModelSet(models, tuple(config.gamma_bounds), config.d0)
