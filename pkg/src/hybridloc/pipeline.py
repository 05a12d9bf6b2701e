"""End-to-end runs on a simulated scene: calibrate, build the map, localize, score."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

from .calibration import DEFAULT_MAX_SKEW, PairingResult, pair_signatures
from .localizer import LocalizerConfig, PositionEstimate, localize_batch, smooth
from .metrics import ErrorStats, ReferencePath, trajectory_error
from .pathloss import FitConfig, RoomModelSet, fit_room_models
from .radiomap import DEFAULT_SPACING, RadioMap, build_radio_map
from .simulator import GroundTruthScene, WalkSpec, load_scene, load_walk, synth_ble, synth_uwb, synth_walk

DEMO_SCENE = "demo_scene.json"
DEMO_PLAN = "demo_plan.json"
DEMO_CALIBRATION_WALK = "demo_calibration_walk.json"
DEMO_TEST_WALK = "demo_test_walk.json"


def demo_data_path(name: str) -> Path:
    return Path(str(resources.files("hybridloc") / "data" / name))


def demo_inputs() -> tuple[GroundTruthScene, WalkSpec, WalkSpec]:
    return (
        load_scene(demo_data_path(DEMO_SCENE)),
        load_walk(demo_data_path(DEMO_CALIBRATION_WALK)),
        load_walk(demo_data_path(DEMO_TEST_WALK)),
    )


@dataclass
class PipelineResult:
    pairing: PairingResult
    models: RoomModelSet
    radio_map: RadioMap
    raw: list[PositionEstimate]
    estimates: list[PositionEstimate]
    stats: ErrorStats
    params: dict = field(default_factory=dict)


def calibrate_and_map(
    scene: GroundTruthScene,
    walk: WalkSpec,
    *,
    seed: Optional[int] = None,
    max_skew: float = DEFAULT_MAX_SKEW,
    spacing: float = DEFAULT_SPACING,
    fit_config: FitConfig = FitConfig(),
) -> tuple[PairingResult, RoomModelSet, RadioMap]:
    seed = scene.seed if seed is None else seed
    truth = synth_walk(walk)
    fixes = synth_uwb(truth, walk.uwb_period, scene.uwb_noise_sigma, seed)
    rss = synth_ble(scene, truth, walk, seed)
    pairing = pair_signatures(fixes, rss, scene.plan, max_skew)
    models = fit_room_models(pairing.signatures, scene.plan, fit_config)
    return pairing, models, build_radio_map(models, scene.plan, spacing)


def run_closed_loop(
    scene: GroundTruthScene,
    calibration_walk: WalkSpec,
    test_walk: WalkSpec,
    *,
    calibration_seed: Optional[int] = None,
    test_seed: Optional[int] = None,
    max_skew: float = DEFAULT_MAX_SKEW,
    spacing: float = DEFAULT_SPACING,
    localizer: LocalizerConfig = LocalizerConfig(),
    fit_config: FitConfig = FitConfig(),
) -> PipelineResult:
    """Calibrate on one walk, then localize a separate test walk from RSS only."""
    cal_seed = scene.seed if calibration_seed is None else calibration_seed
    tst_seed = cal_seed + 1 if test_seed is None else test_seed
    pairing, models, radio_map = calibrate_and_map(
        scene, calibration_walk, seed=cal_seed, max_skew=max_skew, spacing=spacing, fit_config=fit_config
    )
    truth = synth_walk(test_walk)
    rss = synth_ble(scene, truth, test_walk, tst_seed)
    raw = localize_batch(rss, radio_map, localizer)
    estimates = smooth(raw, localizer.smoothing_window)
    stats = trajectory_error(estimates, ReferencePath(test_walk.waypoints))
    params = {
        "calibration_seed": cal_seed,
        "test_seed": tst_seed,
        "max_skew": max_skew,
        "spacing": spacing,
        **localizer.to_dict(),
    }
    return PipelineResult(pairing, models, radio_map, raw, estimates, stats, params)
