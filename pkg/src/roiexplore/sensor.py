"""Depth-camera models: fields of view, simulated range scans, raycasting.

The field of view is modeled as a pyramid with a flat far face at
depth = range along the optical axis, decomposed into two triangles (2D) or
two tetrahedra (3D). Inlier queries against that decomposition define ROI
membership; an equivalent analytic test (depth and per-axis lateral bounds)
is used as the vectorized fast path and is cross-checked against the
simplices in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import impl as _impl

FLAG_BEFORE = 0
FLAG_HIT = 1
FLAG_BEHIND = 2


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass
class Pose:
    """Sensor/robot pose: position plus yaw (and pitch in 3D, roll fixed 0)."""

    position: np.ndarray
    yaw: float
    pitch: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.yaw = wrap_angle(float(self.yaw))

    @property
    def dim(self) -> int:
        return len(self.position)

    def heading(self) -> np.ndarray:
        if self.dim == 2:
            return np.array([math.cos(self.yaw), math.sin(self.yaw)])
        cp = math.cos(self.pitch)
        return np.array([
            cp * math.cos(self.yaw),
            cp * math.sin(self.yaw),
            math.sin(self.pitch),
        ])

    def basis(self):
        """Orthonormal (forward, left, up) camera frame; 2D returns (f, l)."""
        if self.dim == 2:
            f = self.heading()
            return f, np.array([-f[1], f[0]])
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cp, sp = math.cos(self.pitch), math.sin(self.pitch)
        f = np.array([cp * cy, cp * sy, sp])
        left = np.array([-sy, cy, 0.0])
        up = np.array([-sp * cy, -sp * sy, cp])
        return f, left, up


@dataclass
class CameraModel:
    """Fan/grid of rays over the field of view.

    cols/rows are the native ray counts; the effective counts after
    downsampling are native // downsample. vfov and rows are only used in 3D.
    """

    hfov: float
    cols: int
    max_range: float
    downsample: int = 1
    vfov: float | None = None
    rows: int | None = None

    def __post_init__(self):
        if not (0.0 < self.hfov < math.pi):
            raise ValueError(f"hfov must lie in (0, pi), got {self.hfov}")
        if self.vfov is not None and not (0.0 < self.vfov < math.pi):
            raise ValueError(f"vfov must lie in (0, pi), got {self.vfov}")
        if self.cols < 2:
            raise ValueError("need at least 2 ray columns")
        if self.rows is not None and self.rows < 2:
            raise ValueError("need at least 2 ray rows in 3D")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")
        if self.downsample < 1 or int(self.downsample) != self.downsample:
            raise ValueError("downsample must be a positive integer")

    @property
    def effective_cols(self) -> int:
        return max(self.cols // self.downsample, 1)

    @property
    def effective_rows(self) -> int:
        return max(self.rows // self.downsample, 1) if self.rows else 1

    def ray_directions(self, pose: Pose) -> np.ndarray:
        """(n, dim) unit directions spread uniformly in angle across the FoV."""
        half_h = 0.5 * self.hfov
        az = np.linspace(-half_h, half_h, self.effective_cols)
        if pose.dim == 2:
            a = pose.yaw + az
            return np.column_stack([np.cos(a), np.sin(a)])
        if self.vfov is None or self.rows is None:
            raise ValueError("3D scans need vfov and rows")
        half_v = 0.5 * self.vfov
        el = np.linspace(-half_v, half_v, self.effective_rows)
        azg, elg = np.meshgrid(az, el, indexing="ij")
        a = pose.yaw + azg.ravel()
        e = pose.pitch + elg.ravel()
        ce = np.cos(e)
        return np.column_stack([ce * np.cos(a), ce * np.sin(a), np.sin(e)])


@dataclass
class Frustum:
    """FoV volume: two triangles in 2D, two tetrahedra in 3D.

    The simplices are the canonical definition; apex/axis/half-angles are
    kept alongside for the equivalent analytic containment test.
    """

    apex: np.ndarray
    yaw: float
    pitch: float
    half_h: float
    half_v: float | None
    range: float
    simplices: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return len(self.apex)

    def _frame(self):
        return Pose(self.apex, self.yaw, self.pitch).basis()

    def contains(self, p) -> bool:
        """Closed-boundary inlier test against the simplex decomposition."""
        p = np.asarray(p, dtype=float)
        if self.dim == 2:
            return any(_point_in_triangle(s, p) for s in self.simplices)
        return any(_point_in_tetrahedron(s, p) for s in self.simplices)

    def contains_many(self, points) -> np.ndarray:
        """Vectorized analytic containment for (n, dim) points.

        Equivalent to the simplex union: depth within [0, range] and lateral
        offsets within depth * tan(half-angle) per axis.
        """
        pts = np.asarray(points, dtype=float)
        q = pts - self.apex
        if self.dim == 2:
            f, left = self._frame()
            depth = q @ f
            lat = q @ left
            return (
                (depth >= 0.0)
                & (depth <= self.range)
                & (np.abs(lat) <= depth * math.tan(self.half_h))
            )
        f, left, up = self._frame()
        depth = q @ f
        lat = q @ left
        vert = q @ up
        return (
            (depth >= 0.0)
            & (depth <= self.range)
            & (np.abs(lat) <= depth * math.tan(self.half_h))
            & (np.abs(vert) <= depth * math.tan(self.half_v))
        )


def _point_in_triangle(tri, p, eps=1e-9):
    a, b, c = tri
    # consistent-sign cross products, closed boundary
    d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
    d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
    has_neg = (d1 < -eps) or (d2 < -eps) or (d3 < -eps)
    has_pos = (d1 > eps) or (d2 > eps) or (d3 > eps)
    return not (has_neg and has_pos)


def _point_in_tetrahedron(tet, p, eps=1e-9):
    a, b, c, d = tet

    def vol(p0, p1, p2, p3):
        return float(np.linalg.det(np.stack([p1 - p0, p2 - p0, p3 - p0])))

    ref = vol(a, b, c, d)
    if abs(ref) < 1e-15:
        return False
    sign = 1.0 if ref > 0 else -1.0
    v1 = sign * vol(p, b, c, d)
    v2 = sign * vol(a, p, c, d)
    v3 = sign * vol(a, b, p, d)
    v4 = sign * vol(a, b, c, p)
    return v1 >= -eps and v2 >= -eps and v3 >= -eps and v4 >= -eps


def build_frustum(pose: Pose, cam: CameraModel, roi_scale: float = 1.0) -> Frustum:
    """FoV pyramid of the camera at ``pose`` with half-angles scaled by
    ``roi_scale``, truncated by a flat far face at depth = max_range.
    """
    if not (0.0 < roi_scale <= 1.0):
        raise ValueError(f"roi_scale must lie in (0, 1], got {roi_scale}")
    half_h = 0.5 * cam.hfov * roi_scale
    r = cam.max_range
    apex = np.asarray(pose.position, dtype=float)

    if pose.dim == 2:
        f, left = pose.basis()
        far_mid = apex + r * f
        cl = far_mid + r * math.tan(half_h) * left
        cr = far_mid - r * math.tan(half_h) * left
        simplices = [
            np.stack([apex, cl, far_mid]),
            np.stack([apex, far_mid, cr]),
        ]
        return Frustum(apex, pose.yaw, 0.0, half_h, None, r, simplices)

    if cam.vfov is None:
        raise ValueError("3D frustum needs a camera with vfov")
    half_v = 0.5 * cam.vfov * roi_scale
    f, left, up = pose.basis()
    far_mid = apex + r * f
    dl = r * math.tan(half_h) * left
    du = r * math.tan(half_v) * up
    c1 = far_mid - dl - du
    c2 = far_mid + dl - du
    c3 = far_mid + dl + du
    c4 = far_mid - dl + du
    simplices = [
        np.stack([apex, c1, c2, c3]),
        np.stack([apex, c1, c3, c4]),
    ]
    return Frustum(apex, pose.yaw, pose.pitch, half_h, half_v, r, simplices)


@dataclass
class Scan:
    """One simulated range measurement."""

    origin: Pose
    directions: np.ndarray   # (n, dim) unit vectors
    hits: np.ndarray         # (n,) bool
    endpoints: np.ndarray    # (n, dim); no-hit rays end at exactly max_range
    max_range: float


@dataclass
class RayBundle:
    """Candidate-view ray set used for objective scoring."""

    origin: np.ndarray       # (dim,)
    directions: np.ndarray   # (n, dim)
    max_range: float


def simulate_scan(env, pose: Pose, cam: CameraModel) -> Scan:
    """Cast the camera's ray fan against ground truth geometry.

    ``env`` provides ``raycast_batch(origin, dirs, max_range) -> (hits, t)``
    and ``point_in_obstacle``. Raises RuntimeError when the pose sits inside
    an obstacle.
    """
    if env.point_in_obstacle(pose.position):
        raise RuntimeError("scan pose lies inside a ground-truth obstacle")
    dirs = cam.ray_directions(pose)
    hits, t = env.raycast_batch(pose.position, dirs, cam.max_range)
    endpoints = pose.position + dirs * t[:, np.newaxis]
    return Scan(pose, dirs, hits, endpoints, cam.max_range)


def candidate_bundle(pose: Pose, cam: CameraModel) -> RayBundle:
    """Ray bundle a robot camera would cast from ``pose``."""
    return RayBundle(np.asarray(pose.position, dtype=float),
                     cam.ray_directions(pose), cam.max_range)


def raycast_cells(grid, origin, endpoint, extend_to=None):
    """Grid cells crossed from ``origin`` toward ``endpoint``.

    Returns (indices, flags): indices is (n, dim) in traversal order, each
    cell at most once, clipped at the map bounds; flags mark cells before
    the endpoint cell (0), the endpoint cell itself (1), and cells behind it
    (2) when ``extend_to`` (total length in meters) carries the traversal
    past the endpoint.
    """
    o3 = grid._pad3(origin)
    e3 = grid._pad3(endpoint)
    if not grid.is_inside(origin):
        raise ValueError("raycast origin lies outside the map bounds")
    seg = float(np.linalg.norm(e3 - o3))
    total = seg if extend_to is None else max(float(extend_to), seg)
    nx, ny, nz = grid._shape3
    idx, flags = _impl.raycast_path(
        o3[0], o3[1], o3[2], e3[0], e3[1], e3[2], total,
        grid._origin3[0], grid._origin3[1], grid._origin3[2],
        grid.resolution, nx, ny, nz,
    )
    if grid.dim == 2:
        return idx[:, :2], flags
    return idx, flags
