"""Hybrid BLE/UWB indoor localization with automatic radio-map creation.

Position fixes collected during a calibration walk are paired with BLE
levels, per-room log-distance path-loss models are fitted to them, and a
dense radio map predicted from those models drives weighted kNN
fingerprinting from BLE levels alone.
"""

__version__ = "0.1.0"

from .calibration import PositionFix, RssMeasurement, Signature, pair_signatures, signature_stats
from .floorplan import AnchorConfig, FloorPlan, Room, clamp_to_boundary, generate_grid, point_in_room
from .localizer import LocalizerConfig, PositionEstimate, localize, signature_distance, smooth
from .metrics import ErrorStats, ReferencePath, ecdf, trajectory_error
from .pathloss import (
    FitConfig,
    FitResult,
    FitSample,
    PathLossParams,
    RoomModelSet,
    fit_linear_ls,
    fit_lm,
    fit_room_models,
    predict,
)
from .radiomap import RadioMap, RadioMapPoint, build_radio_map
from .simulator import GroundTruthScene, WalkSpec, synth_ble, synth_uwb, synth_walk

__all__ = [
    "AnchorConfig",
    "ErrorStats",
    "FitConfig",
    "FitResult",
    "FitSample",
    "FloorPlan",
    "GroundTruthScene",
    "LocalizerConfig",
    "PathLossParams",
    "PositionEstimate",
    "PositionFix",
    "RadioMap",
    "RadioMapPoint",
    "ReferencePath",
    "Room",
    "RoomModelSet",
    "RssMeasurement",
    "Signature",
    "WalkSpec",
    "build_radio_map",
    "clamp_to_boundary",
    "ecdf",
    "fit_linear_ls",
    "fit_lm",
    "fit_room_models",
    "generate_grid",
    "localize",
    "pair_signatures",
    "point_in_room",
    "predict",
    "signature_distance",
    "signature_stats",
    "smooth",
    "synth_ble",
    "synth_uwb",
    "synth_walk",
    "trajectory_error",
]
