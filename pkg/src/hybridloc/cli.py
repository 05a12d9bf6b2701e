"""Command-line entry point.

Calibration mode (``simulate`` -> ``calibrate`` -> ``build-map``) produces a
radio map; normal mode (``localize``) uses it with RSS data alone;
``evaluate`` scores estimates against a reference path. ``demo`` chains all
of them on the bundled scene.

Exit codes: 0 success, 1 usage error (bad flags, missing input files),
2 data or contract violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .calibration import (
    DEFAULT_MAX_SKEW,
    load_fixes,
    load_rss,
    load_signatures,
    pair_signatures,
    save_signatures,
    signature_stats,
    validate_measurement,
    write_jsonl,
)
from .floorplan import load_plan
from .localizer import (
    InsufficientOverlapError,
    LocalizerConfig,
    NoEligiblePointsError,
    load_estimates,
    localize,
    save_estimates,
    smooth,
)
from .metrics import ReferencePath, save_stats, trajectory_error, write_ecdf_table
from .pathloss import FitConfig, fit_room_models, save_models
from .pipeline import DEMO_CALIBRATION_WALK, DEMO_PLAN, DEMO_SCENE, DEMO_TEST_WALK, demo_data_path
from .radiomap import DEFAULT_SPACING, ProvenanceError, build_radio_map, load_radio_map, save_radio_map
from .simulator import load_scene, load_walk, synth_ble, synth_uwb, synth_walk

log = logging.getLogger("hybridloc")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _require(*paths):
    for p in paths:
        if not Path(p).is_file():
            raise UsageError(f"input file not found: {p}")


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    _require(args.scene, args.walk)
    scene = load_scene(args.scene)
    walk = load_walk(args.walk)
    seed = scene.seed if args.seed is None else args.seed
    truth = synth_walk(walk)
    fixes = synth_uwb(truth, walk.uwb_period, scene.uwb_noise_sigma, seed)
    rss = synth_ble(scene, truth, walk, seed)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(truth.records(), out / "truth.jsonl")
    write_jsonl((f.to_dict() for f in fixes), out / "fixes.jsonl")
    write_jsonl((m.to_dict() for m in rss), out / "rss.jsonl")
    _write_json(
        out / "manifest.json",
        {
            "command": "simulate",
            "scene": Path(args.scene).name,
            "walk": walk.to_dict(),
            "seed": seed,
            "rss_noise_sigma": scene.rss_noise_sigma,
            "rss_drop_prob": scene.rss_drop_prob,
            "uwb_noise_sigma": scene.uwb_noise_sigma,
            "rng": "numpy PCG64, SeedSequence([seed, stream]); BLE stream 1, UWB stream 2",
            "counts": {"truth": len(truth.times), "fixes": len(fixes), "rss": len(rss)},
        },
    )
    print(f"wrote {len(fixes)} fixes and {len(rss)} RSS packets to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    _require(args.fixes, args.rss, args.plan)
    plan = load_plan(args.plan)
    result = pair_signatures(load_fixes(args.fixes), load_rss(args.rss), plan, args.max_skew)
    stats = signature_stats(result.signatures, plan.anchor_ids)
    meta = {
        "command": "calibrate",
        "max_skew": args.max_skew,
        "unmatched_fixes": result.unmatched_fixes,
        "dropped_outside_rooms": result.dropped_outside_rooms,
        "stats": stats.to_dict(),
    }
    save_signatures(result.signatures, args.out, meta)
    print(f"wrote {stats.count} signatures to {args.out}")
    return EXIT_OK


def cmd_build_map(args) -> int:
    _require(args.signatures, args.plan)
    plan = load_plan(args.plan)
    config = FitConfig(min_samples=args.min_samples, method=args.method)
    models = fit_room_models(load_signatures(args.signatures), plan, config)
    radio_map = build_radio_map(models, plan, args.spacing)
    save_models(models, args.models_out, {"command": "build-map", "fit": config.to_dict()})
    save_radio_map(radio_map, args.map_out, {"command": "build-map", "spacing": args.spacing, "fit": config.to_dict()})
    print(f"wrote {len(models.models)} models to {args.models_out} and {len(radio_map)} map points to {args.map_out}")
    return EXIT_OK


def cmd_localize(args) -> int:
    _require(args.rss, args.map, args.plan)
    plan = load_plan(args.plan)
    radio_map = load_radio_map(args.map)
    radio_map.check_plan(plan)
    config = LocalizerConfig(
        k=args.k,
        distance_epsilon=args.epsilon,
        smoothing_window=args.window,
        min_common_anchors=args.min_common_anchors,
    )
    measurements = load_rss(args.rss)
    raw, skipped = [], 0
    for m in measurements:
        validate_measurement(m, radio_map.anchor_ids)
        try:
            raw.append(localize(m, radio_map, config))
        except (NoEligiblePointsError, InsufficientOverlapError):
            skipped += 1
    if not raw:
        raise NoEligiblePointsError("no measurement could be localized")
    estimates = smooth(raw, config.smoothing_window)
    save_estimates(estimates, args.out)
    _write_json(
        str(args.out) + ".manifest.json",
        {
            "command": "localize",
            "config": config.to_dict(),
            "map_provenance": radio_map.provenance,
            "measurements": len(measurements),
            "localized": len(raw),
            "skipped": skipped,
        },
    )
    print(f"wrote {len(estimates)} estimates to {args.out} ({skipped} skipped)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require(args.estimates, args.reference)
    estimates = load_estimates(args.estimates)
    stats = trajectory_error(estimates, ReferencePath.load(args.reference))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_stats(stats, out / "stats.json", {"command": "evaluate"})
    write_ecdf_table(stats.ecdf, out / "ecdf.tsv")
    print(f"median {stats.median:.3f} m, max {stats.max:.3f} m over {stats.errors.size} estimates")
    return EXIT_OK


def cmd_demo(args) -> int:
    """Run the whole chain on the bundled scene through the file interfaces."""
    out = Path(args.out)
    inputs = out / "inputs"
    inputs.mkdir(parents=True, exist_ok=True)
    for name in (DEMO_PLAN, DEMO_SCENE, DEMO_CALIBRATION_WALK, DEMO_TEST_WALK):
        shutil.copyfile(demo_data_path(name), inputs / name)
    scene = load_scene(inputs / DEMO_SCENE)
    ns = argparse.Namespace
    steps = [
        (cmd_simulate, ns(scene=inputs / DEMO_SCENE, walk=inputs / DEMO_CALIBRATION_WALK, out=out / "calibration", seed=scene.seed)),
        (cmd_simulate, ns(scene=inputs / DEMO_SCENE, walk=inputs / DEMO_TEST_WALK, out=out / "test", seed=scene.seed + 1)),
        (cmd_calibrate, ns(fixes=out / "calibration" / "fixes.jsonl", rss=out / "calibration" / "rss.jsonl",
                           plan=inputs / DEMO_PLAN, out=out / "signatures.json", max_skew=args.max_skew)),
        (cmd_build_map, ns(signatures=out / "signatures.json", plan=inputs / DEMO_PLAN, models_out=out / "models.json",
                           map_out=out / "radiomap.json", spacing=args.spacing, min_samples=20, method="lm")),
        (cmd_localize, ns(rss=out / "test" / "rss.jsonl", map=out / "radiomap.json", plan=inputs / DEMO_PLAN,
                          out=out / "estimates.jsonl", k=args.k, window=args.window, epsilon=1e-9, min_common_anchors=2)),
        (cmd_evaluate, ns(estimates=out / "estimates.jsonl", reference=inputs / DEMO_TEST_WALK, out=out / "evaluation")),
    ]
    for fn, ns_args in steps:
        fn(ns_args)
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hybridloc", description="Indoor localization from BLE signal strength with a UWB-calibrated radio map.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesize truth, UWB fixes and BLE packets for one walk")
    p.add_argument("--scene", required=True, help="scene document (plan, true models, noise, seed)")
    p.add_argument("--walk", required=True, help="walk document (waypoints, speed, rates)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the scene seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="pair fixes with RSS packets into a signature database")
    p.add_argument("--fixes", required=True, help="position-fix stream (JSON lines)")
    p.add_argument("--rss", required=True, help="RSS stream (JSON lines)")
    p.add_argument("--plan", required=True, help="floor-plan document")
    p.add_argument("--out", required=True, help="signature database to write")
    p.add_argument("--max-skew", type=_positive_float, default=DEFAULT_MAX_SKEW,
                   help="pairing window half-width in seconds (default %(default)s)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("build-map", help="fit per-room path-loss models and interpolate the radio map")
    p.add_argument("--signatures", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--models-out", required=True)
    p.add_argument("--map-out", required=True)
    p.add_argument("--spacing", type=_positive_float, default=DEFAULT_SPACING,
                   help="grid spacing in meters (default %(default)s)")
    p.add_argument("--min-samples", type=_positive_int, default=20,
                   help="samples needed for a local (room, anchor) fit (default %(default)s)")
    p.add_argument("--method", choices=("lm", "linear"), default="lm",
                   help="fitting route (default %(default)s)")
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("localize", help="RSS-only fingerprinting against a radio map")
    p.add_argument("--rss", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--plan", required=True, help="plan the map must have been built from")
    p.add_argument("--out", required=True, help="estimates to write (JSON lines)")
    p.add_argument("--k", type=_positive_int, default=5, help="neighbors (default %(default)s)")
    p.add_argument("--window", type=_positive_int, default=5, help="moving-average window (default %(default)s)")
    p.add_argument("--epsilon", type=_positive_float, default=1e-9,
                   help="floor on signature distance in dB (default %(default)s)")
    p.add_argument("--min-common-anchors", type=_positive_int, default=2,
                   help="anchors a measurement must share with a map point (default %(default)s)")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("evaluate", help="distance from a reference path and its ECDF")
    p.add_argument("--estimates", required=True)
    p.add_argument("--reference", required=True, help="document with a 'waypoints' list (walk files qualify)")
    p.add_argument("--out", required=True, help="output directory for stats.json and ecdf.tsv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("demo", help="run the full chain on the bundled demo apartment")
    p.add_argument("--out", required=True)
    p.add_argument("--spacing", type=_positive_float, default=DEFAULT_SPACING)
    p.add_argument("--k", type=_positive_int, default=5)
    p.add_argument("--window", type=_positive_int, default=5)
    p.add_argument("--max-skew", type=_positive_float, default=DEFAULT_MAX_SKEW)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hybridloc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProvenanceError as exc:
        print(f"hybridloc: refused: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"hybridloc: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
