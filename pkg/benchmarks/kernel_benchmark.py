"""Benchmark the compiled kernels against the pure-Python fallback.

Times the four hot kernels (raycast, occupancy fusion, distance fusion, view
scoring) and a full planning cycle on a mid-exploration two-walls map, once
per backend, and prints the speedups. Run from the repo root:

    python3 benchmarks/kernel_benchmark.py [--quick]
"""

import argparse
import math
import time

import numpy as np

from roiexplore import _kernels
from roiexplore._kernels import _pyfallback
from roiexplore.objectives import ObjectiveKind
from roiexplore.planner import generate_library, select_best
from roiexplore.sensor import Pose
from roiexplore.simulator import TrialConfig, builtin_environment, run_trial

try:
    from roiexplore._kernels import _core
except ImportError:
    _core = None


def _snapshot():
    env = builtin_environment("two_walls")
    cfg = TrialConfig(env=env, duration=20.0, seed=1,
                      objective=ObjectiveKind.OAVI)
    result = run_trial(cfg)
    pose = Pose(result.poses[-1, :2], result.poses[-1, 3])
    return cfg, result.grid, pose


def _time(fn, reps):
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(impl, grid, pose, cfg, reps):
    g0 = grid._origin3
    res = grid.resolution
    nx, ny, nz = grid._shape3
    origin = grid._pad3(pose.position)
    dirs2 = cfg.robot_cam.ray_directions(pose)
    dirs = np.ascontiguousarray(np.column_stack([dirs2, np.zeros(len(dirs2))]))
    ends = origin + dirs * cfg.robot_cam.max_range
    hits = np.ones(len(dirs), dtype=np.uint8)

    out = {}
    out["raycast (48 rays)"] = _time(lambda: [
        impl.raycast_path(origin[0], origin[1], origin[2],
                          e[0], e[1], e[2], cfg.robot_cam.max_range,
                          g0[0], g0[1], g0[2], res, nx, ny, nz)
        for e in ends
    ], reps)
    lo = grid.log_odds.copy()
    out["occupancy fusion"] = _time(lambda: impl.update_occupancy(
        lo, origin, ends, hits, -0.4, 0.85, -8.0, 3.5, g0, res), reps)
    di = grid.dist.copy()
    out["distance fusion"] = _time(lambda: impl.update_distance(
        di, origin, ends, hits, cfg.robot_cam.max_range, g0, res), reps)
    for name, obj_id, roi_filter in (("csqmi view", impl.OBJ_CSQMI, 0),
                                     ("oavi view", impl.OBJ_OAVI, 0)):
        out[name] = _time(lambda: impl.score_view(
            grid.log_odds, grid.roi, grid.dist, origin, dirs,
            cfg.robot_cam.max_range, obj_id, roi_filter,
            0.10, 0.15, 5.0, 0.4, 0.6, 0.6, g0, res), reps)
    return out


def bench_planning_cycle(grid, pose, cfg, reps):
    library = generate_library(cfg.v_max, cfg.omega_max, cfg.vz_levels,
                               cfg.planning_period, cfg.num_primitives)
    return _time(lambda: select_best(
        grid, pose, library, ObjectiveKind.OAVI, cfg.oavi, cfg.safety,
        cfg.robot_cam, cfg.mapping_period), reps)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = ap.parse_args()
    reps = 3 if args.quick else 10

    cfg, grid, pose = _snapshot()
    print(f"map {grid.extents}, pose ({pose.position[0]:.1f}, "
          f"{pose.position[1]:.1f}), {reps} reps (best-of)")

    rows = {}
    backends = [("python", _pyfallback)]
    if _core is not None:
        backends.insert(0, ("cython", _core))
    for name, impl in backends:
        rows[name] = bench_kernels(impl, grid, pose, cfg, reps)

    print(f"\n{'kernel':<20}" + "".join(f"{n:>14}" for n, _ in backends)
          + ("      speedup" if len(backends) == 2 else ""))
    for key in rows[backends[0][0]]:
        line = f"{key:<20}"
        for name, _ in backends:
            line += f"{rows[name][key] * 1e6:>12.1f}us"
        if len(backends) == 2:
            line += f"{rows['python'][key] / rows['cython'][key]:>11.1f}x"
        print(line)

    # full planning cycle through the public API, per active backend
    print(f"\nfull select_best cycle (21 primitives), active backend "
          f"[{_kernels.BACKEND}]: ", end="")
    t = bench_planning_cycle(grid, pose, cfg, reps)
    print(f"{t * 1e3:.2f} ms")
    if _core is not None and _kernels.BACKEND == "cython":
        import roiexplore.objectives as objectives
        saved = objectives._impl
        objectives._impl = _pyfallback
        try:
            t_py = bench_planning_cycle(grid, pose, cfg, max(1, reps // 3))
        finally:
            objectives._impl = saved
        print(f"full select_best cycle, pure-python kernels: {t_py * 1e3:.2f} ms "
              f"({t_py / t:.1f}x slower)")


if __name__ == "__main__":
    main()
