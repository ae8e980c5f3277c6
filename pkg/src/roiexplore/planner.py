"""Forward-arc motion primitives: generation, safety filtering, selection.

The action space is a small library of constant (v, omega[, vz]) arcs of
fixed duration. Candidates are scored with the chosen objective at the arc's
end viewpoint only, and the best safe primitive wins, ties broken by lowest
library index. Index 0 is always the hover primitive, so an all-zero score
vector keeps the robot in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid_map import FREE_THRESHOLD, OCCUPIED_THRESHOLD, GridMap
from .objectives import OaviParams, ObjectiveKind, evaluate_view
from .sensor import CameraModel, Pose, candidate_bundle, wrap_angle


@dataclass
class MotionPrimitive:
    """Constant-rate forward arc (unicycle kinematics, optional climb)."""

    v: float
    omega: float
    vz: float
    duration: float

    @property
    def is_hover(self) -> bool:
        return self.v == 0.0 and self.omega == 0.0 and self.vz == 0.0


@dataclass
class PrimitiveLibrary:
    primitives: list[MotionPrimitive] = field(default_factory=list)

    def __len__(self):
        return len(self.primitives)

    def __iter__(self):
        return iter(self.primitives)

    def __getitem__(self, i):
        return self.primitives[i]


@dataclass
class SafetyParams:
    radius: float = 0.3
    unknown_is_obstacle: bool = False

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError("safety radius must be positive")


def generate_library(v_max: float, omega_max: float, vz_levels,
                     duration: float, count: int) -> PrimitiveLibrary:
    """Build the discrete action space.

    ``count`` must factor as len(vz_levels) x (odd yaw count >= 3); yaw rates
    are spread uniformly over [-omega_max, +omega_max] per vertical tier, so
    each tier includes omega = 0. The (vz=0, omega=0) slot becomes the hover
    primitive (v = 0) and is placed at index 0.
    """
    vz_levels = tuple(float(v) for v in vz_levels)
    if duration <= 0.0:
        raise ValueError("primitive duration must be positive")
    if 0.0 not in vz_levels:
        raise ValueError("vz_levels must include 0 so a hover primitive exists")
    n_vz = len(vz_levels)
    if count % n_vz != 0:
        raise ValueError(
            f"cannot factor {count} primitives into {n_vz} vertical tiers"
        )
    per_tier = count // n_vz
    if per_tier < 3 or per_tier % 2 != 1:
        raise ValueError(
            f"per-tier yaw count must be odd and >= 3, got {per_tier}"
        )
    omegas = np.linspace(-omega_max, omega_max, per_tier)
    prims = [MotionPrimitive(0.0, 0.0, 0.0, duration)]
    for vz in vz_levels:
        for w in omegas:
            if vz == 0.0 and w == 0.0:
                continue  # this slot is the hover at index 0
            prims.append(MotionPrimitive(v_max, float(w), vz, duration))
    assert len(prims) == count
    return PrimitiveLibrary(prims)


def propagate(start: Pose, prim: MotionPrimitive, dt: float) -> list[Pose]:
    """Sampled poses along the arc at dt spacing, start pose included.

    Closed-form unicycle integration: heading rotates at omega, position
    advances along the heading at v (an arc of radius v/omega when
    omega != 0), z climbs at vz.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    n = max(int(round(prim.duration / dt)), 1)
    poses = [start]
    x0, y0 = float(start.position[0]), float(start.position[1])
    yaw0 = start.yaw
    for k in range(1, n + 1):
        tau = k * dt
        yaw = yaw0 + prim.omega * tau
        if abs(prim.omega) < 1e-12:
            x = x0 + prim.v * tau * math.cos(yaw0)
            y = y0 + prim.v * tau * math.sin(yaw0)
        else:
            r = prim.v / prim.omega
            x = x0 + r * (math.sin(yaw) - math.sin(yaw0))
            y = y0 - r * (math.cos(yaw) - math.cos(yaw0))
        if start.dim == 2:
            pos = np.array([x, y])
        else:
            pos = np.array([x, y, float(start.position[2]) + prim.vz * tau])
        poses.append(Pose(pos, wrap_angle(yaw), start.pitch))
    return poses


def pose_at(start: Pose, prim: MotionPrimitive, tau: float) -> Pose:
    """Pose after following the primitive for tau seconds (clamped to its
    duration); same closed form as propagate, so executed motion matches the
    safety-checked samples exactly."""
    tau = min(max(tau, 0.0), prim.duration)
    if tau == 0.0:
        return start
    x0, y0 = float(start.position[0]), float(start.position[1])
    yaw0 = start.yaw
    yaw = yaw0 + prim.omega * tau
    if abs(prim.omega) < 1e-12:
        x = x0 + prim.v * tau * math.cos(yaw0)
        y = y0 + prim.v * tau * math.sin(yaw0)
    else:
        r = prim.v / prim.omega
        x = x0 + r * (math.sin(yaw) - math.sin(yaw0))
        y = y0 - r * (math.cos(yaw) - math.cos(yaw0))
    if start.dim == 2:
        pos = np.array([x, y])
    else:
        pos = np.array([x, y, float(start.position[2]) + prim.vz * tau])
    return Pose(pos, wrap_angle(yaw), start.pitch)


def choose(evals: list[CandidateEval]):
    """Deterministic argmax over safe candidates; ties go to the lowest
    index. None when nothing is safe."""
    best = None
    for ev in evals:
        if not ev.safe:
            continue
        if best is None or ev.score > best.score:
            best = ev
    return best


def _cells_clear(grid: GridMap, pose: Pose, safety: SafetyParams) -> bool:
    p = np.asarray(pose.position, dtype=float)
    if not grid.is_inside(p):
        return False
    r = safety.radius
    res = grid.resolution
    ext = grid.extents
    lo = np.maximum(np.floor((p - r - grid.origin) / res).astype(int), 0)
    hi = np.minimum(np.floor((p + r - grid.origin) / res).astype(int),
                    np.asarray(ext) - 1)
    if np.any(lo > hi):
        return False
    sl = tuple(slice(int(lo[a]), int(hi[a]) + 1) for a in range(grid.dim))
    if grid.dim == 2:
        sl = sl + (slice(0, 1),)
    window = grid.log_odds[sl]
    axes = [grid.origin[a] + (np.arange(lo[a], hi[a] + 1) + 0.5) * res
            for a in range(grid.dim)]
    grids = np.meshgrid(*axes, indexing="ij")
    d2 = sum((g - p[a]) ** 2 for a, g in enumerate(grids))
    near = d2 <= r * r
    if grid.dim == 2:
        near = near[:, :, np.newaxis]
    o = 1.0 / (1.0 + np.exp(-window))
    if np.any(near & (o >= OCCUPIED_THRESHOLD)):
        return False
    if safety.unknown_is_obstacle and np.any(near & (o > FREE_THRESHOLD)
                                             & (o < OCCUPIED_THRESHOLD)):
        return False
    return True


def is_safe(grid: GridMap, poses: list[Pose], safety: SafetyParams) -> bool:
    """True iff every pose after the start keeps the robot's disc clear.

    The start pose is the robot's current location and is not re-checked, so
    the hover primitive stays available unless the robot is already boxed in
    (hover's later samples equal the start and are checked).
    """
    for pose in poses[1:]:
        if not _cells_clear(grid, pose, safety):
            return False
    return True


@dataclass
class CandidateEval:
    index: int
    safe: bool
    score: float
    roi_cells: int


def evaluate_candidates(grid: GridMap, pose: Pose, library: PrimitiveLibrary,
                        kind: ObjectiveKind, params: OaviParams,
                        safety: SafetyParams, cam: CameraModel,
                        dt: float = 0.1) -> list[CandidateEval]:
    """Score every safe primitive's end viewpoint with the chosen objective."""
    out = []
    for i, prim in enumerate(library):
        poses = propagate(pose, prim, dt)
        if not is_safe(grid, poses, safety):
            out.append(CandidateEval(i, False, -math.inf, 0))
            continue
        bundle = candidate_bundle(poses[-1], cam)
        score, roi_cells = evaluate_view(grid, bundle, kind, params)
        out.append(CandidateEval(i, True, score, roi_cells))
    return out


def select_best(grid: GridMap, pose: Pose, library: PrimitiveLibrary,
                kind: ObjectiveKind, params: OaviParams,
                safety: SafetyParams, cam: CameraModel, dt: float = 0.1):
    """Best safe primitive by end-viewpoint information gain.

    Returns (primitive, score), or None when no primitive is safe. Ties go
    to the lowest library index; the selection is deterministic bit for bit
    given identical inputs.
    """
    evals = evaluate_candidates(grid, pose, library, kind, params, safety,
                                cam, dt)
    best = choose(evals)
    if best is None:
        return None
    return library[best.index], best.score
