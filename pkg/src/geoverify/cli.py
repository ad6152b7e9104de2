"""Command-line front-end: verify / filter-only / synth / bench.

Exit codes: 0 success, 1 usage or parse error, 2 failure to verify,
3 internal error.  Output files are deterministic for a fixed seed; wall
clock timings are only emitted on request (``--timings`` for verify and
filter-only, anything but ``--counts-only`` for bench).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

import numpy as np

from . import io
from .bench import METHODS, run_benchmark
from .errors import GeoverifyError, InsufficientDataError, ParseError
from .geometry import MountCalibration, ProjectionPlane, compose_camera_pose
from .hmcc import HmccConfig, hmcc_filter
from .motion import generate_motions
from .ransac import RansacConfig, hmcc_ransac, ransac_fundamental
from .synth import SceneSpec, generate_scene

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOVERIFY = 2
EXIT_INTERNAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; we reserve that
        raise _UsageError(message)


def _add_input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--matches", required=True, help="matches file: x1 y1 x2 y2 per line")
    p.add_argument("--poses", required=True, help="pose file: two 'id X Y Z omega phi kappa' lines")
    p.add_argument("--camera", required=True, help="camera file: f cx cy k1 k2 k3 p1 p2 width height")
    p.add_argument("--camera2", default=None, help="camera file for image 2 (default: same as image 1)")
    p.add_argument("--mount", default=None, help="mount file: pitch roll yaw tx ty tz (default: nadir)")
    p.add_argument("--plane-elevation", type=float, default=-100.0, help="projection plane Z in meters")


def _add_hmcc_flags(p: argparse.ArgumentParser) -> None:
    d = HmccConfig()
    p.add_argument("--dir-bin-width", type=float, default=d.dir_bin_width)
    p.add_argument("--dir-peak-radius", type=int, default=d.dir_peak_radius)
    p.add_argument("--dir-peak-fraction", type=float, default=d.dir_peak_fraction)
    p.add_argument("--dc-range", type=float, default=d.dc_range)
    p.add_argument("--dc-bin-width", type=float, default=d.dc_bin_width)
    p.add_argument("--dc-peak-radius", type=int, default=d.dc_peak_radius)
    p.add_argument("--dc-peak-fraction", type=float, default=d.dc_peak_fraction)
    p.add_argument("--k-neighbors", type=int, default=d.k_neighbors)
    p.add_argument("--zscore-threshold", type=float, default=d.zscore_threshold)


def _add_ransac_flags(p: argparse.ArgumentParser) -> None:
    d = RansacConfig()
    p.add_argument("--max-residual", type=float, default=d.max_residual)
    p.add_argument("--confidence", type=float, default=d.confidence)
    p.add_argument("--max-iterations", type=int, default=d.max_iterations)
    p.add_argument("--seed", type=int, default=d.rng_seed)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mask-out", default="mask.txt", help="inlier mask output, one 0/1 per input line")
    p.add_argument("--report-out", default="report.json", help="structured report output")
    p.add_argument("--histograms", default=None, metavar="PREFIX", help="dump voting histograms to PREFIX.*.txt")
    p.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")


def _hmcc_config(args) -> HmccConfig:
    return HmccConfig(
        dir_bin_width=args.dir_bin_width,
        dir_peak_radius=args.dir_peak_radius,
        dir_peak_fraction=args.dir_peak_fraction,
        dc_range=args.dc_range,
        dc_bin_width=args.dc_bin_width,
        dc_peak_radius=args.dc_peak_radius,
        dc_peak_fraction=args.dc_peak_fraction,
        k_neighbors=args.k_neighbors,
        zscore_threshold=args.zscore_threshold,
    )


def _ransac_config(args) -> RansacConfig:
    return RansacConfig(
        max_residual=args.max_residual,
        confidence=args.confidence,
        max_iterations=args.max_iterations,
        rng_seed=args.seed,
    )


def _load_pair(args):
    intr1 = io.read_camera(args.camera)
    intr2 = io.read_camera(args.camera2) if args.camera2 else intr1
    poses = io.read_poses(args.poses)
    if len(poses) < 2:
        raise ParseError("pose", 0, "need two pose lines (image 1 and image 2)", args.poses)
    mount = io.read_mount(args.mount) if args.mount else MountCalibration.nadir()
    pose1 = compose_camera_pose(poses[0][1], mount)
    pose2 = compose_camera_pose(poses[1][1], mount)
    matches = io.read_matches(args.matches)
    plane = ProjectionPlane(args.plane_elevation)
    return matches, intr1, intr2, pose1, pose2, plane


def _write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(obj, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_histograms(prefix: str, stages) -> None:
    if not stages:
        return
    names = {"global_direction": "direction", "local_direction_change": "direction_change"}
    for stage in stages:
        if stage.accumulator is not None and stage.name in names:
            io.write_histogram(f"{prefix}.{names[stage.name]}.txt", stage.accumulator)


def cmd_verify(args) -> int:
    hmcc_cfg = _hmcc_config(args)
    ransac_cfg = _ransac_config(args)
    matches, intr1, intr2, pose1, pose2, plane = _load_pair(args)

    try:
        report = hmcc_ransac(matches, intr1, intr2, pose1, pose2, plane, hmcc_cfg, ransac_cfg)
    except InsufficientDataError:
        report = None
    fallback_used = False
    if (report is None or not report.success) and args.fallback_plain and len(matches) >= 7:
        plain = ransac_fundamental(matches, ransac_cfg)
        if plain.success:
            fallback_used = True
            if report is None:
                report = plain
            else:
                report.inlier_mask = plain.inlier_mask
                report.fundamental = plain.fundamental
                report.iterations_used = plain.iterations_used
                report.stage_stats["n_inliers"] = plain.n_inliers
                report.stage_stats["success"] = True
                report.stage_stats["timings"]["verify_s"] = plain.stage_stats["timings"]["verify_s"]

    if report is None:  # fewer than 7 matches and no (successful) fallback
        mask = np.zeros(len(matches), dtype=bool)
        io.write_mask(args.mask_out, mask)
        _write_json(
            args.report_out,
            {"subcommand": "verify", "n_input": len(matches), "success": False, "fallback_used": False},
        )
        return EXIT_NOVERIFY

    io.write_mask(args.mask_out, report.inlier_mask)
    out = dict(report.stage_stats)
    timings = out.pop("timings", {})
    out.update(
        subcommand="verify",
        fundamental=report.fundamental.tolist() if report.fundamental is not None else None,
        iterations_used=report.iterations_used,
        fallback_used=fallback_used,
        timings=timings if args.timings else {k: None for k in timings},
    )
    _write_json(args.report_out, out)
    if args.histograms:
        _write_histograms(args.histograms, report.filter_stages)
    return EXIT_OK if report.success else EXIT_NOVERIFY


def cmd_filter_only(args) -> int:
    hmcc_cfg = _hmcc_config(args)
    matches, intr1, intr2, pose1, pose2, plane = _load_pair(args)

    t0 = time.perf_counter()
    motions, dropped = generate_motions(matches, intr1, intr2, pose1, pose2, plane)
    result = hmcc_filter(motions, hmcc_cfg)
    t_filter = time.perf_counter() - t0

    survivor_ids = set(result.source_ids)
    mask = np.array([m.id in survivor_ids for m in matches], dtype=bool)
    io.write_mask(args.mask_out, mask)
    _write_json(
        args.report_out,
        {
            "subcommand": "filter-only",
            "n_input": len(matches),
            "n_motions": len(motions),
            "n_dropped_projection": len(dropped),
            "dropped_ids": list(dropped),
            "stages": [s.summary() for s in result.stages],
            "n_filter_survivors": int(mask.sum()),
            "timings": {"filter_s": t_filter if args.timings else None},
        },
    )
    if args.histograms:
        _write_histograms(args.histograms, result.stages)
    return EXIT_OK


def _sweep_ratios(sweep: str) -> list[float]:
    try:
        lo, hi, step = (float(t) for t in sweep.split(":"))
    except ValueError as exc:
        raise _UsageError(f"--sweep expects LO:HI:STEP, got {sweep!r}") from exc
    if step <= 0:
        raise _UsageError("--sweep step must be positive")
    ratios = []
    k = 0
    while True:
        r = round(lo + k * step, 10)
        if r > hi + 1e-9:
            break
        ratios.append(r)
        k += 1
    if not ratios:
        raise _UsageError(f"--sweep {sweep!r} produces no ratios")
    return ratios


def cmd_synth(args) -> int:
    base = SceneSpec(
        n_inliers=args.n_inliers,
        outlier_ratio=args.outlier_ratio,
        flight_height=args.flight_height,
        terrain_relief_sigma=args.terrain_relief_sigma,
        mount_pitch=args.mount_pitch,
        pose_noise=(args.pose_noise_position, args.pose_noise_angle),
        pixel_noise_sigma=args.pixel_noise_sigma,
        seed=args.seed,
    )
    if args.sweep:
        for i, ratio in enumerate(_sweep_ratios(args.sweep)):
            spec = dataclasses.replace(base, outlier_ratio=ratio, seed=base.seed + i)
            io.write_scene(os.path.join(args.out, f"ratio_{ratio:g}"), generate_scene(spec), spec)
    else:
        io.write_scene(args.out, generate_scene(base), base)
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if args.parallel and not args.counts_only:
        raise _UsageError("--parallel is only valid with --counts-only (timings need sequential runs)")
    datasets = [io.read_scene(d) for d in args.dataset]
    report = run_benchmark(
        datasets,
        methods=methods,
        plane=ProjectionPlane(args.plane_elevation),
        hmcc_cfg=_hmcc_config(args),
        ransac_cfg=_ransac_config(args),
        parallel=args.parallel,
    )
    include_times = not args.counts_only
    with open(args.table_out, "w", encoding="utf-8") as handle:
        handle.write(report.table(include_times=include_times))
    _write_json(args.json_out, report.to_dict(include_times=include_times))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geoverify", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    verify = sub.add_parser("verify", help="motion filter + fundamental-matrix RANSAC")
    _add_input_flags(verify)
    _add_hmcc_flags(verify)
    _add_ransac_flags(verify)
    _add_output_flags(verify)
    verify.add_argument(
        "--fallback-plain",
        action="store_true",
        help="fall back to plain RANSAC on the unfiltered matches if verification fails",
    )
    verify.set_defaults(func=cmd_verify)

    filter_only = sub.add_parser("filter-only", help="motion filter without RANSAC")
    _add_input_flags(filter_only)
    _add_hmcc_flags(filter_only)
    _add_output_flags(filter_only)
    filter_only.set_defaults(func=cmd_filter_only)

    synth = sub.add_parser("synth", help="generate labeled synthetic match sets")
    synth.add_argument("--out", required=True, help="output directory")
    synth.add_argument("--n-inliers", type=int, default=200)
    synth.add_argument("--outlier-ratio", type=float, default=0.5)
    synth.add_argument("--sweep", default=None, metavar="LO:HI:STEP", help="write one dataset per outlier ratio")
    synth.add_argument("--flight-height", type=float, default=300.0)
    synth.add_argument("--terrain-relief-sigma", type=float, default=5.0)
    synth.add_argument("--mount-pitch", type=float, default=0.0)
    synth.add_argument("--pose-noise-position", type=float, default=2.0)
    synth.add_argument("--pose-noise-angle", type=float, default=1.0)
    synth.add_argument("--pixel-noise-sigma", type=float, default=0.5)
    synth.add_argument("--seed", type=int, default=0)
    synth.set_defaults(func=cmd_synth)

    bench = sub.add_parser("bench", help="compare verification methods on scene bundles")
    bench.add_argument("--dataset", action="append", required=True, help="scene directory (repeatable)")
    bench.add_argument("--methods", default=",".join(METHODS))
    bench.add_argument("--plane-elevation", type=float, default=-100.0)
    bench.add_argument("--table-out", default="bench.tsv")
    bench.add_argument("--json-out", default="bench.json")
    bench.add_argument("--counts-only", action="store_true", help="omit wall-clock columns (deterministic output)")
    bench.add_argument("--parallel", action="store_true", help="run pairs concurrently (counts-only)")
    _add_hmcc_flags(bench)
    _add_ransac_flags(bench)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"geoverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"geoverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"geoverify: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeoverifyError as exc:
        print(f"geoverify: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # pragma: no cover - safety net
        print(f"geoverify: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
