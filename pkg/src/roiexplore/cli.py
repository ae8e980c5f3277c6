"""Command-line front end: trials, batches, objective heatmaps, benchmarks.

Outputs are plain CSV and PGM so results can be plotted with anything.
Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import math
import statistics
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import _kernels
from .grid_map import (FREE_THRESHOLD, OCCUPIED_THRESHOLD, bernoulli_entropy,
                       new_map, write_occupancy_pgm, write_pgm)
from .objectives import OaviParams, ObjectiveKind, evaluate_view
from .planner import SafetyParams, generate_library, select_best
from .sensor import CameraModel, Pose, build_frustum, candidate_bundle, simulate_scan
from .simulator import (SceneError, TrialConfig, builtin_environment,
                        load_environment, run_batch, run_trial,
                        time_to_roi_reduction)

_OBJECTIVES = {k.value: k for k in ObjectiveKind}


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--scene", default="two_walls",
                   help="built-in scene name or path to a scene .json")
    p.add_argument("--objective", choices=sorted(_OBJECTIVES), default="oavi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=120.0, help="seconds")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--dim", type=int, choices=(2, 3), default=2)
    # Overridable experiment parameters (defaults: simulation column)
    p.add_argument("--alpha-roi", type=float, default=0.10)
    p.add_argument("--alpha-pa", type=float, default=0.15)
    p.add_argument("--robot-range", type=float, default=5.0)
    p.add_argument("--robot-downsample", type=int, default=2)
    p.add_argument("--human-range", type=float, default=10.0)
    p.add_argument("--human-downsample", type=int, default=4)
    p.add_argument("--fov-percentage", type=float, default=40.0,
                   help="ROI frustum half-angles as a percentage of the camera's")
    p.add_argument("--mapping-hz", type=float, default=10.0)
    p.add_argument("--planning-hz", type=float, default=1.0)
    p.add_argument("--resolution", type=float, default=None,
                   help="override the scene voxel resolution (meters)")
    p.add_argument("--primitives", type=int, default=21)
    p.add_argument("--v-max", type=float, default=0.75)
    p.add_argument("--yaw-rate", type=float, default=0.25)


def _cameras(args, dim):
    if dim == 2:
        human = CameraModel(hfov=math.pi / 2, cols=256, max_range=args.human_range,
                            downsample=args.human_downsample)
        robot = CameraModel(hfov=math.pi / 2, cols=96, max_range=args.robot_range,
                            downsample=args.robot_downsample)
    else:
        human = CameraModel(hfov=math.pi / 2, cols=256, max_range=args.human_range,
                            downsample=args.human_downsample,
                            vfov=math.pi / 3, rows=64)
        robot = CameraModel(hfov=math.pi / 2, cols=96, max_range=args.robot_range,
                            downsample=args.robot_downsample,
                            vfov=math.pi / 3, rows=32)
    return human, robot


def _environment(args):
    if args.scene in ("single_wall", "two_walls", "multi_obstacle"):
        env = builtin_environment(args.scene, dim=args.dim)
    else:
        env = load_environment(args.scene)
    if args.resolution is not None:
        env = replace(env, resolution=args.resolution)
    return env


def _config(args) -> TrialConfig:
    env = _environment(args)
    human_cam, robot_cam = _cameras(args, env.dim)
    vz_levels = (0.0,) if env.dim == 2 else (-0.3, 0.0, 0.3)
    num = args.primitives
    if env.dim == 3 and num % len(vz_levels) != 0:
        num = 21
    return TrialConfig(
        env=env,
        objective=_OBJECTIVES[args.objective],
        oavi=OaviParams(alpha_roi=args.alpha_roi, alpha_pa=args.alpha_pa,
                        d_max=args.robot_range),
        human_cam=human_cam,
        robot_cam=robot_cam,
        mapping_period=1.0 / args.mapping_hz,
        planning_period=1.0 / args.planning_hz,
        duration=args.duration,
        seed=args.seed,
        safety=SafetyParams(),
        roi_scale=args.fov_percentage / 100.0,
        v_max=args.v_max,
        omega_max=args.yaw_rate,
        num_primitives=num,
        vz_levels=vz_levels,
    )


ENTROPY_HEADER = "t,roi_entropy_bits,map_entropy_bits,x,y,z,yaw"


def write_entropy_csv(path, result) -> None:
    with open(path, "w") as f:
        f.write(ENTROPY_HEADER + "\n")
        for row in result.rows():
            f.write(",".join("%.17g" % v for v in row) + "\n")


def read_entropy_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data


def cmd_run(args) -> int:
    config = _config(args)
    result = run_trial(config)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / f"entropy_{args.seed:04d}.csv"
    write_entropy_csv(path, result)
    print(f"wrote {path} ({len(result.t)} rows); "
          f"final ROI entropy {result.roi_entropy[-1]:.1f} bits, "
          f"map entropy {result.map_entropy[-1]:.1f} bits")
    return 0


def cmd_batch(args) -> int:
    config = _config(args)
    entries = run_batch(config, args.trials, args.seed, jobs=args.jobs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = outdir / "summary.csv"
    with open(summary, "w") as f:
        f.write("trial,seed,error,final_roi_entropy_bits,final_map_entropy_bits,"
                "t50,t75,t90\n")
        for i, entry in enumerate(entries):
            if not entry.ok:
                f.write(f"{i},{entry.seed},{entry.error},,,,,\n")
                print(f"trial {i} (seed {entry.seed}): ERROR {entry.error}")
                continue
            r = entry.result
            write_entropy_csv(outdir / f"entropy_{entry.seed:04d}.csv", r)
            t50 = time_to_roi_reduction(r, 50)
            t75 = time_to_roi_reduction(r, 75)
            t90 = time_to_roi_reduction(r, 90)
            f.write(f"{i},{entry.seed},,"
                    f"{r.roi_entropy[-1]:.17g},{r.map_entropy[-1]:.17g},"
                    f"{t50:.17g},{t75:.17g},{t90:.17g}\n")
            print(f"trial {i} (seed {entry.seed}): roi {r.roi_entropy[-1]:.1f} "
                  f"map {r.map_entropy[-1]:.1f} t75 {t75:.1f}")
    print(f"wrote {summary}")
    return 0


def _write_grid_csv(path, grid2d) -> None:
    with open(path, "w") as f:
        for row in np.asarray(grid2d):
            f.write(",".join("%.17g" % v for v in row) + "\n")


def cmd_heatmap(args) -> int:
    config = _config(args)
    env = config.env
    if env.dim != 2:
        raise SceneError("heatmaps are only defined for 2D scenes")
    grid = new_map(env.bounds_min, env.bounds_max, env.resolution)
    human_scan = simulate_scan(env, env.human, config.human_cam)
    grid.update_occupancy(human_scan)
    grid.update_distance(human_scan)
    grid.mark_roi(build_frustum(env.human, config.human_cam, config.roi_scale))

    nx, ny = grid.extents
    values = np.zeros((nx, ny))
    occ = grid.occupancy()
    headings = [i * 2.0 * math.pi / args.headings for i in range(args.headings)]
    kind = _OBJECTIVES[args.objective]
    for ix in range(nx):
        for iy in range(ny):
            if occ[ix, iy] >= OCCUPIED_THRESHOLD:
                continue
            center = grid.index_to_world((ix, iy))
            best = 0.0
            for yaw in headings:
                bundle = candidate_bundle(Pose(center, yaw), config.robot_cam)
                score, _ = evaluate_view(grid, bundle, kind, config.oavi)
                if score > best:
                    best = score
            values[ix, iy] = best

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = args.objective.replace("-", "_")
    _write_grid_csv(outdir / f"heatmap_{stem}.csv", values)
    write_pgm(outdir / f"heatmap_{stem}.pgm", values)
    write_occupancy_pgm(outdir / "occupancy.pgm", grid)

    if kind is ObjectiveKind.OAVI:
        h = bernoulli_entropy(occ)
        roi2 = grid.roi[:, :, 0].astype(bool)
        d2 = grid.dist[:, :, 0]
        i_roi_field = np.where(roi2, 1.0, config.oavi.alpha_roi)
        unknown = (occ > FREE_THRESHOLD) & (occ < OCCUPIED_THRESHOLD)
        i_pa_field = np.where(unknown & (d2 <= config.oavi.d_max),
                              config.oavi.d_max - d2, config.oavi.alpha_pa)
        for name, field_vals in (("i_ua", h), ("i_roi", i_roi_field),
                                 ("i_pa", i_pa_field)):
            _write_grid_csv(outdir / f"{name}.csv", field_vals)
            write_pgm(outdir / f"{name}.pgm", field_vals)
    print(f"wrote heatmap artifacts to {outdir}")
    return 0


def cmd_bench(args) -> int:
    config = _config(args)
    warm = replace(config, duration=args.warmup, objective=ObjectiveKind.OAVI)
    result = run_trial(warm)
    grid = result.grid
    pose = Pose(result.poses[-1, : config.env.dim]
                if config.env.dim == 2 else result.poses[-1, :3],
                result.poses[-1, 3])
    library = generate_library(config.v_max, config.omega_max, config.vz_levels,
                               config.planning_period, config.num_primitives)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for kind in (ObjectiveKind.CSQMI, ObjectiveKind.ROI_CSQMI, ObjectiveKind.OAVI):
        times = []
        for _ in range(args.reps):
            t0 = time.perf_counter()
            select_best(grid, pose, library, kind, config.oavi, config.safety,
                        config.robot_cam, config.mapping_period)
            times.append(time.perf_counter() - t0)
        mean = statistics.fmean(times)
        std = statistics.pstdev(times)
        rows.append((kind.value, args.reps, mean, std))

    with open(outdir / "bench.csv", "w") as f:
        f.write("objective,reps,mean_s,std_s\n")
        for name, reps, mean, std in rows:
            f.write(f"{name},{reps},{mean:.17g},{std:.17g}\n")

    print(f"kernel backend: {_kernels.BACKEND}")
    print(f"{'objective':<12} {'mean':>10} {'std':>10}")
    for name, _, mean, std in rows:
        print(f"{name:<12} {mean * 1e3:>8.2f}ms {std * 1e3:>8.2f}ms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roiexplore",
        description="Human-tasked occlusion-aware exploration simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single trial, write entropy CSV")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run seeded trials, write summary")
    _add_common(p_batch)
    p_batch.add_argument("--trials", type=int, default=10)
    p_batch.add_argument("--jobs", type=int, default=1)
    p_batch.set_defaults(func=cmd_batch)

    p_heat = sub.add_parser("heatmap",
                            help="objective value over all free/unknown cells")
    _add_common(p_heat)
    p_heat.add_argument("--headings", type=int, default=8)
    p_heat.set_defaults(func=cmd_heatmap)

    p_bench = sub.add_parser("bench", help="planning latency per objective")
    _add_common(p_bench)
    p_bench.add_argument("--reps", type=int, default=100)
    p_bench.add_argument("--warmup", type=float, default=30.0,
                         help="seconds of simulated exploration before timing")
    p_bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SceneError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
