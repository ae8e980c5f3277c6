"""Trial orchestration: environments, the single human observation, and the
mapping/planning loop.

A trial starts when the human's one range measurement is fused into a fresh
shared map (occupancy, distances, ROI flags). The robot then alternates
between selecting a forward-arc primitive at the planning rate and advancing
one mapping step at a time, fusing a scan and recording entropies at every
step. Robot scans never mark ROI cells, so the ROI set is frozen after t=0.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .grid_map import GridMap, new_map
from .objectives import OaviParams, ObjectiveKind
from .planner import (MotionPrimitive, SafetyParams, choose,
                      evaluate_candidates, generate_library, pose_at)
from .sensor import CameraModel, Pose, build_frustum, simulate_scan


class InfeasibleEnvironmentError(RuntimeError):
    """Raised when no valid robot start exists."""


class SceneError(ValueError):
    """Raised for malformed or inconsistent scene files."""


@dataclass
class Environment:
    """Ground truth: a walled world box plus axis-aligned box obstacles.

    Rays that reach the world boundary register a hit there (the bounds act
    as enclosing walls), pulled a hair inside so the struck cell is the last
    interior cell.
    """

    name: str
    bounds_min: np.ndarray
    bounds_max: np.ndarray
    resolution: float
    obstacles: list
    human: Pose
    robot: Pose | None = None

    _NUDGE = 1e-6

    def __post_init__(self):
        self.bounds_min = np.asarray(self.bounds_min, dtype=float)
        self.bounds_max = np.asarray(self.bounds_max, dtype=float)
        self.obstacles = [
            (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
            for lo, hi in self.obstacles
        ]
        if np.any(self.bounds_max <= self.bounds_min):
            raise SceneError(f"scene '{self.name}': bounds are degenerate")
        if self.resolution <= 0.0:
            raise SceneError(f"scene '{self.name}': resolution must be positive")
        for k, (lo, hi) in enumerate(self.obstacles):
            if np.any(hi <= lo):
                raise SceneError(f"scene '{self.name}': obstacle {k} is degenerate")
            if np.any(lo < self.bounds_min) or np.any(hi > self.bounds_max):
                raise SceneError(
                    f"scene '{self.name}': obstacle {k} lies outside the bounds"
                )
        hp = np.asarray(self.human.position, dtype=float)
        if np.any(hp <= self.bounds_min) or np.any(hp >= self.bounds_max):
            raise SceneError(f"scene '{self.name}': human pose is outside the bounds")
        if self.point_in_obstacle(hp):
            raise SceneError(f"scene '{self.name}': human pose is inside an obstacle")

    @property
    def dim(self) -> int:
        return len(self.bounds_min)

    def point_in_obstacle(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        for lo, hi in self.obstacles:
            if np.all(p >= lo) and np.all(p <= hi):
                return True
        return False

    def free_at(self, p, clearance: float = 0.0) -> bool:
        """Inside the bounds and at least ``clearance`` from every obstacle."""
        p = np.asarray(p, dtype=float)
        if np.any(p < self.bounds_min + clearance) or np.any(
            p > self.bounds_max - clearance
        ):
            return False
        for lo, hi in self.obstacles:
            gap = np.maximum(np.maximum(lo - p, p - hi), 0.0)
            if math.sqrt(float(np.sum(gap * gap))) < clearance or (
                clearance == 0.0 and np.all(gap == 0.0)
            ):
                return False
        return True

    def _slab_times(self, origin, dirs, lo, hi):
        n = dirs.shape[0]
        tn = np.full(n, -np.inf)
        tf = np.full(n, np.inf)
        for a in range(self.dim):
            da = dirs[:, a]
            oa = float(origin[a])
            nonzero = np.abs(da) > 1e-15
            safe = np.where(nonzero, da, 1.0)
            t0 = (lo[a] - oa) / safe
            t1 = (hi[a] - oa) / safe
            alo = np.minimum(t0, t1)
            ahi = np.maximum(t0, t1)
            inside = (oa >= lo[a]) and (oa <= hi[a])
            alo = np.where(nonzero, alo, -np.inf if inside else np.inf)
            ahi = np.where(nonzero, ahi, np.inf if inside else -np.inf)
            tn = np.maximum(tn, alo)
            tf = np.minimum(tf, ahi)
        return tn, tf

    def raycast_batch(self, origin, dirs, max_range):
        """First-surface distances for a fan of rays from ``origin``.

        Returns (hits bool (n,), t (n,)): obstacle entries and wall exits
        within max_range are hits (nudged 1e-6 m into the surface / inward);
        the rest travel exactly max_range.
        """
        origin = np.asarray(origin, dtype=float)
        dirs = np.asarray(dirs, dtype=float)
        _, t_exit = self._slab_times(origin, dirs, self.bounds_min, self.bounds_max)
        t_hit = t_exit - self._NUDGE
        for lo, hi in self.obstacles:
            tn, tf = self._slab_times(origin, dirs, lo, hi)
            valid = (tn <= tf) & (tf > 0.0) & (tn > 0.0)
            cand = tn + self._NUDGE
            t_hit = np.where(valid & (cand < t_hit), cand, t_hit)
        hits = t_hit <= max_range
        t = np.where(hits, t_hit, max_range)
        return hits, t


_BUILTIN_NAMES = ("single_wall", "two_walls", "multi_obstacle")


def builtin_environment(name: str, dim: int = 2) -> Environment:
    """One of the three built-in scenes, in 2D or extruded to 3D.

    Obstacle faces sit on 0.3 m cell boundaries so no map cell is ever half
    wall, half free. The human stands at the middle of the x-min edge facing
    +x; the region of interest it marks reaches 10 m into the room.
    """
    if name not in _BUILTIN_NAMES:
        raise SceneError(
            f"unknown scene '{name}' (built-ins: {', '.join(_BUILTIN_NAMES)})"
        )
    res = 0.3
    if name == "single_wall":
        boxes2 = [((8.4, 12.0), (9.0, 18.0))]
    elif name == "two_walls":
        # staggered: each wall blocks one half of the human's view wedge,
        # leaving a free corridor past the other half
        boxes2 = [((6.6, 9.0), (7.2, 15.0)), ((12.6, 15.0), (13.2, 21.0))]
    else:
        size = 1.5
        corners = [(9.0, 9.0), (7.5, 18.0), (13.5, 13.5), (17.4, 7.5), (16.5, 19.5)]
        boxes2 = [((x, y), (x + size, y + size)) for x, y in corners]

    if dim == 2:
        bounds_min, bounds_max = (0.0, 0.0), (30.0, 30.0)
        human = Pose(np.array([0.5, 15.0]), 0.0)
        obstacles = boxes2
    elif dim == 3:
        bounds_min, bounds_max = (0.0, 0.0, 0.0), (30.0, 30.0, 9.9)
        human = Pose(np.array([0.5, 15.0, 1.5]), 0.0)
        obstacles = [
            ((lo[0], lo[1], 0.0), (hi[0], hi[1], 3.0)) for lo, hi in boxes2
        ]
    else:
        raise SceneError(f"dim must be 2 or 3, got {dim}")
    return Environment(name, bounds_min, bounds_max, res, obstacles, human)


def load_environment(source) -> Environment:
    """Environment from a scene-file string, path, or a built-in name.

    The scene format is JSON with fields name, bounds{min,max}, resolution,
    obstacles[{min,max}], human{position,yaw}, robot{position,yaw}?; lengths
    in meters, angles in radians.
    """
    if isinstance(source, str) and source in _BUILTIN_NAMES:
        return builtin_environment(source)
    text = source
    if isinstance(source, str) and "\n" not in source and source.endswith(".json"):
        with open(source) as f:
            text = f.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"scene parse error at line {e.lineno}, col {e.colno}: {e.msg}")
    try:
        name = data.get("name", "scene")
        bounds = data["bounds"]
        resolution = float(data["resolution"])
        human = data["human"]
        hpose = Pose(np.asarray(human["position"], dtype=float),
                     float(human.get("yaw", 0.0)),
                     float(human.get("pitch", 0.0)))
        robot = None
        if "robot" in data and data["robot"] is not None:
            robot = Pose(np.asarray(data["robot"]["position"], dtype=float),
                         float(data["robot"].get("yaw", 0.0)),
                         float(data["robot"].get("pitch", 0.0)))
        obstacles = [(o["min"], o["max"]) for o in data.get("obstacles", [])]
    except (KeyError, TypeError) as e:
        raise SceneError(f"scene missing or malformed field: {e}")
    return Environment(name, bounds["min"], bounds["max"], resolution,
                       obstacles, hpose, robot)


def default_human_camera(dim: int = 2) -> CameraModel:
    if dim == 2:
        return CameraModel(hfov=math.pi / 2, cols=256, max_range=10.0, downsample=4)
    return CameraModel(hfov=math.pi / 2, cols=256, max_range=10.0, downsample=4,
                       vfov=math.pi / 3, rows=64)


def default_robot_camera(dim: int = 2) -> CameraModel:
    if dim == 2:
        return CameraModel(hfov=math.pi / 2, cols=96, max_range=5.0, downsample=2)
    return CameraModel(hfov=math.pi / 2, cols=96, max_range=5.0, downsample=2,
                       vfov=math.pi / 3, rows=32)


@dataclass
class TrialConfig:
    """Everything one trial depends on; (config, seed) fixes the result."""

    env: Environment
    objective: ObjectiveKind = ObjectiveKind.OAVI
    oavi: OaviParams = field(default_factory=OaviParams)
    human_cam: CameraModel | None = None
    robot_cam: CameraModel | None = None
    mapping_period: float = 0.1
    planning_period: float = 1.0
    duration: float = 120.0
    seed: int = 0
    safety: SafetyParams = field(default_factory=SafetyParams)
    roi_scale: float = 0.4
    v_max: float = 0.75
    omega_max: float = 0.25
    num_primitives: int = 21
    vz_levels: tuple = (0.0,)

    def __post_init__(self):
        if self.mapping_period <= 0.0 or self.planning_period <= 0.0:
            raise ValueError("periods must be positive")
        if self.mapping_period > self.planning_period:
            raise ValueError("mapping period must not exceed the planning period")
        if self.duration < 0.0:
            raise ValueError("duration must be nonnegative")
        if self.human_cam is None:
            self.human_cam = default_human_camera(self.env.dim)
        if self.robot_cam is None:
            self.robot_cam = default_robot_camera(self.env.dim)


@dataclass
class PlanRecord:
    """One planning cycle: what was selected and what it saw."""

    t: float
    index: int              # library index, -1 for stuck recovery
    score: float
    latency: float          # seconds spent in candidate evaluation
    roi_cells: int          # raycasted ROI cells of the selected view
    safe_count: int
    recovered: bool = False


@dataclass
class TrialResult:
    """Entropy/pose time series plus per-cycle planning records."""

    t: np.ndarray
    roi_entropy: np.ndarray
    map_entropy: np.ndarray
    poses: np.ndarray       # (n, 4): x, y, z, yaw
    plans: list
    grid: GridMap
    seed: int
    objective: ObjectiveKind

    def rows(self):
        for k in range(len(self.t)):
            yield (self.t[k], self.roi_entropy[k], self.map_entropy[k],
                   self.poses[k, 0], self.poses[k, 1], self.poses[k, 2],
                   self.poses[k, 3])


def sample_robot_start(env: Environment, seed, clearance: float = 0.3) -> Pose:
    """Uniform draw from the 4x4 m box around the human, rejection-resampled
    into free space; deterministic given the seed. The yaw matches the
    human's (the robot accompanies its partner), altitude fixed in 3D.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    center = np.asarray(env.human.position, dtype=float)
    for _ in range(1000):
        offset = rng.uniform(-2.0, 2.0, size=2)
        pos = center.copy()
        pos[0] += offset[0]
        pos[1] += offset[1]
        if env.free_at(pos, clearance):
            return Pose(pos, env.human.yaw)
    raise InfeasibleEnvironmentError(
        "no free robot start found in the 4x4 m box around the human"
    )


def _recovery_primitive(config: TrialConfig) -> MotionPrimitive:
    # invented recovery: yaw in place by omega_max * T, then replan
    return MotionPrimitive(0.0, config.omega_max, 0.0, config.planning_period)


def run_trial(config: TrialConfig) -> TrialResult:
    """Run one trial: human observation, then the mapping/planning loop."""
    env = config.env
    grid = new_map(env.bounds_min, env.bounds_max, env.resolution)

    human_scan = simulate_scan(env, env.human, config.human_cam)
    grid.update_occupancy(human_scan)
    grid.update_distance(human_scan)
    frustum = build_frustum(env.human, config.human_cam, config.roi_scale)
    grid.mark_roi(frustum)

    if env.robot is not None:
        robot = env.robot
    else:
        robot = sample_robot_start(env, config.seed, config.safety.radius)

    library = generate_library(config.v_max, config.omega_max, config.vz_levels,
                               config.planning_period, config.num_primitives)

    steps = int(round(config.duration / config.mapping_period))
    plan_every = int(round(config.planning_period / config.mapping_period))

    def pose_row(p: Pose):
        z = p.position[2] if p.dim == 3 else 0.0
        return (p.position[0], p.position[1], z, p.yaw)

    ts = [0.0]
    roi_h = [grid.entropy(roi_only=True)]
    map_h = [grid.entropy(roi_only=False)]
    poses = [pose_row(robot)]
    plans: list[PlanRecord] = []

    active = _recovery_primitive(config)
    cycle_pose = robot
    for k in range(steps):
        if k % plan_every == 0:
            t_now = k * config.mapping_period
            start = time.perf_counter()
            evals = evaluate_candidates(grid, robot, library, config.objective,
                                        config.oavi, config.safety,
                                        config.robot_cam, config.mapping_period)
            best = choose(evals)
            latency = time.perf_counter() - start
            safe_count = sum(1 for e in evals if e.safe)
            if best is None:
                active = _recovery_primitive(config)
                plans.append(PlanRecord(t_now, -1, math.nan, latency, 0,
                                        safe_count, recovered=True))
            else:
                active = library[best.index]
                plans.append(PlanRecord(t_now, best.index, best.score, latency,
                                        best.roi_cells, safe_count))
            cycle_pose = robot

        tau = (k % plan_every + 1) * config.mapping_period
        robot = pose_at(cycle_pose, active, tau)
        if env.point_in_obstacle(robot.position):
            raise RuntimeError(
                f"robot entered a ground-truth obstacle at t={k * config.mapping_period:.1f}s"
            )
        scan = simulate_scan(env, robot, config.robot_cam)
        grid.update_occupancy(scan)
        grid.update_distance(scan)

        ts.append((k + 1) * config.mapping_period)
        roi_h.append(grid.entropy(roi_only=True))
        map_h.append(grid.entropy(roi_only=False))
        poses.append(pose_row(robot))

    return TrialResult(
        t=np.asarray(ts),
        roi_entropy=np.asarray(roi_h),
        map_entropy=np.asarray(map_h),
        poses=np.asarray(poses),
        plans=plans,
        grid=grid,
        seed=config.seed,
        objective=config.objective,
    )


@dataclass
class BatchEntry:
    seed: int
    result: TrialResult | None
    error: str | None

    @property
    def ok(self) -> bool:
        return self.error is None


def _run_one(config: TrialConfig) -> BatchEntry:
    try:
        return BatchEntry(config.seed, run_trial(config), None)
    except Exception as e:  # per-trial errors must not kill the batch
        return BatchEntry(config.seed, None, f"{type(e).__name__}: {e}")


def run_batch(config: TrialConfig, n_trials: int, base_seed: int,
              jobs: int = 1) -> list[BatchEntry]:
    """n independent trials with seeds base_seed .. base_seed + n - 1.

    Each trial owns its map and RNG; failures are recorded per entry. With
    jobs > 1 trials fan out to a process pool, results stay seed-ordered.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    configs = [replace(config, seed=base_seed + i) for i in range(n_trials)]
    if jobs <= 1:
        return [_run_one(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_one, configs))


def time_to_roi_reduction(result: TrialResult, percent: float) -> float:
    """First time the ROI entropy falls to (1 - percent/100) of its initial
    value; inf if never within the trial."""
    target = result.roi_entropy[0] * (1.0 - percent / 100.0)
    below = np.nonzero(result.roi_entropy <= target)[0]
    if len(below) == 0:
        return math.inf
    return float(result.t[below[0]])
