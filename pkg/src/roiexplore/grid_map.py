"""Shared occupancy map: log-odds occupancy, ROI flags, obstacle distances.

Every cell of the dense grid carries three values updated independently:

* occupancy log-odds, fused scan by scan with the standard additive update
  and clamped for numerical stability;
* a sticky region-of-interest flag, set once by frustum inlier queries and
  never cleared during a trial;
* the distance to the closest observed surface, min-fused along every hit
  ray (rays are extended behind the struck cell so occluded cells get a
  distance too).

Internally the grid is always three-dimensional with a single z layer in 2D
mode, so the raycast kernels are shared between dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import impl as _impl

L_HIT = 0.85
L_MISS = -0.4
# Asymmetric clamp: the occupied side saturates at o = 0.971, the free side
# is driven hard (o ~ 3.4e-4, 0.005 bits) so space the robot has fully
# observed stops competing with unexplored space in the view objectives.
L_MIN = -8.0
L_MAX = 3.5

OCCUPIED_THRESHOLD = 0.6
FREE_THRESHOLD = 0.4

DIST_UNKNOWN = 1.0e9


def probability(log_odds):
    """Occupancy probability from log-odds (scalar or array)."""
    return 1.0 / (1.0 + np.exp(-np.asarray(log_odds, dtype=float)))


def log_odds_of(p):
    p = np.asarray(p, dtype=float)
    return np.log(p / (1.0 - p))


def bernoulli_entropy(p):
    """Entropy of a Bernoulli(p) cell in bits, with H(0) = H(1) = 0."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + q * np.log2(q))
    return np.where((p <= 0.0) | (p >= 1.0), 0.0, h)


def _cell_count(size, resolution):
    # ceil with a guard against FP noise like 30/0.3 = 100.0000000000001
    return int(math.ceil(size / resolution - 1e-9 * max(1.0, size / resolution)))


@dataclass
class CellData:
    """Per-cell view (log-odds, ROI flag, obstacle distance)."""

    log_odds: float
    roi: bool
    dist: float

    @property
    def occupancy(self) -> float:
        return float(probability(self.log_odds))


class GridMap:
    """Dense axis-aligned occupancy grid in 2 or 3 dimensions."""

    def __init__(self, bounds_min, bounds_max, resolution):
        bounds_min = np.asarray(bounds_min, dtype=float)
        bounds_max = np.asarray(bounds_max, dtype=float)
        if resolution <= 0.0:
            raise ValueError(f"resolution must be positive, got {resolution}")
        if bounds_min.shape != bounds_max.shape or bounds_min.ndim != 1:
            raise ValueError("bounds_min and bounds_max must be equal-length vectors")
        dim = len(bounds_min)
        if dim not in (2, 3):
            raise ValueError(f"map dimensionality must be 2 or 3, got {dim}")
        if np.any(bounds_max - bounds_min <= 0.0):
            raise ValueError("bounds are empty or degenerate on some axis")

        self.dim = dim
        self.resolution = float(resolution)
        self.origin = bounds_min.copy()
        self.extents = tuple(
            _cell_count(bounds_max[a] - bounds_min[a], resolution) for a in range(dim)
        )

        nx, ny = self.extents[0], self.extents[1]
        nz = self.extents[2] if dim == 3 else 1
        self._shape3 = (nx, ny, nz)
        self._origin3 = np.zeros(3)
        self._origin3[:dim] = bounds_min

        self.log_odds = np.zeros(self._shape3, dtype=np.float64)
        self.roi = np.zeros(self._shape3, dtype=np.uint8)
        self.dist = np.full(self._shape3, DIST_UNKNOWN, dtype=np.float64)

    # -- geometry ---------------------------------------------------------

    @property
    def num_cells(self) -> int:
        return int(np.prod(self._shape3))

    @property
    def bounds_min(self):
        return self.origin.copy()

    @property
    def bounds_max(self):
        return self.origin + self.resolution * np.asarray(self.extents)

    def z_center(self) -> float:
        """World z used for poses and rays in 2D mode (single-layer center)."""
        return float(self._origin3[2] + 0.5 * self.resolution)

    def _pad3(self, p):
        p = np.asarray(p, dtype=float)
        if self.dim == 2:
            if len(p) == 2:
                return np.array([p[0], p[1], self.z_center()])
            return np.asarray(p, dtype=float)
        return p

    def is_inside(self, p) -> bool:
        p = np.asarray(p, dtype=float)[: self.dim]
        lo, hi = self.bounds_min, self.bounds_max
        return bool(np.all(p >= lo) and np.all(p < hi))

    def index_to_world(self, index):
        """Center of cell ``index`` in world coordinates (length == dim)."""
        idx = np.asarray(index, dtype=int)
        if idx.shape != (self.dim,) or np.any(idx < 0) or np.any(
            idx >= np.asarray(self.extents)
        ):
            raise IndexError(f"cell index {tuple(index)} outside extents {self.extents}")
        return self.origin + (idx + 0.5) * self.resolution

    def world_to_index(self, p):
        """Cell index containing ``p``, or None for positions outside the map.

        Cells are half-open: a point exactly on a boundary belongs to the
        higher-index cell.
        """
        p = np.asarray(p, dtype=float)[: self.dim]
        idx = np.floor((p - self.origin) / self.resolution).astype(int)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.extents)):
            return None
        return tuple(int(i) for i in idx)

    def _index3(self, index):
        idx = tuple(int(i) for i in index)
        return idx if len(idx) == 3 else (idx[0], idx[1], 0)

    def cell(self, index) -> CellData:
        i = self._index3(index)
        return CellData(
            log_odds=float(self.log_odds[i]),
            roi=bool(self.roi[i]),
            dist=float(self.dist[i]),
        )

    # -- measurement updates ----------------------------------------------

    def _scan_arrays(self, scan):
        origin = self._pad3(scan.origin.position)
        ends = np.asarray(scan.endpoints, dtype=np.float64)
        if ends.shape[1] == 2:
            z = self.z_center()
            ends = np.column_stack([ends, np.full(len(ends), z)])
        hits = np.ascontiguousarray(scan.hits, dtype=np.uint8)
        return origin, np.ascontiguousarray(ends), hits

    def update_occupancy(self, scan) -> None:
        """Apply the additive log-odds update for one scan, ray by ray."""
        if not self.is_inside(scan.origin.position):
            raise ValueError("scan origin lies outside the map bounds")
        origin, ends, hits = self._scan_arrays(scan)
        _impl.update_occupancy(
            self.log_odds, origin, ends, hits,
            L_MISS, L_HIT, L_MIN, L_MAX, self._origin3, self.resolution,
        )

    def update_distance(self, scan) -> None:
        """Min-fuse distance-to-hit for all cells raycast by this scan.

        Hit rays are extended to the scan's max range so cells behind the
        struck surface receive a distance as well; no-hit rays contribute
        nothing.
        """
        if not self.is_inside(scan.origin.position):
            raise ValueError("scan origin lies outside the map bounds")
        origin, ends, hits = self._scan_arrays(scan)
        _impl.update_distance(
            self.dist, origin, ends, hits, float(scan.max_range),
            self._origin3, self.resolution,
        )

    def cell_centers(self):
        """(N, dim) array of all cell centers, in C (row-major) cell order."""
        axes = [
            self.origin[a] + (np.arange(self.extents[a]) + 0.5) * self.resolution
            for a in range(self.dim)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def mark_roi(self, frustum) -> int:
        """Set the ROI flag on every cell whose center lies in the frustum.

        Inlier queries run on all cells, so cells occluded from the frustum
        apex are marked too. Returns the number of newly marked cells.
        """
        inside = frustum.contains_many(self.cell_centers())
        inside = inside.reshape(self._shape3[: self.dim])
        if self.dim == 2:
            inside = inside[:, :, np.newaxis]
        before = int(np.count_nonzero(self.roi))
        self.roi |= inside.astype(np.uint8)
        return int(np.count_nonzero(self.roi)) - before

    # -- queries ------------------------------------------------------------

    def occupancy(self):
        """Per-cell occupancy probabilities, shaped by the map extents."""
        o = probability(self.log_odds)
        return o[:, :, 0] if self.dim == 2 else o

    def entropy(self, roi_only: bool = False) -> float:
        """Total Bernoulli entropy in bits over all cells or ROI cells only."""
        h = bernoulli_entropy(probability(self.log_odds))
        if roi_only:
            return float(np.sum(h[self.roi.astype(bool)]))
        return float(np.sum(h))

    def roi_cell_count(self) -> int:
        return int(np.count_nonzero(self.roi))

    # -- export -------------------------------------------------------------

    def write_snapshot(self, stream) -> None:
        """Plain-text dump, one ``ix iy iz o roi dist`` line per cell."""
        o = probability(self.log_odds)
        nx, ny, nz = self._shape3
        for ix in range(nx):
            for iy in range(ny):
                for iz in range(nz):
                    stream.write(
                        "%d %d %d %.8g %d %.8g\n"
                        % (ix, iy, iz, o[ix, iy, iz],
                           self.roi[ix, iy, iz], self.dist[ix, iy, iz])
                    )

    def occupancy_slice(self, z_index: int = 0):
        return probability(self.log_odds[:, :, z_index])


def new_map(bounds_min, bounds_max, resolution) -> GridMap:
    """Fresh all-unknown map covering the given world box."""
    return GridMap(bounds_min, bounds_max, resolution)


def write_pgm(path, values) -> None:
    """Write a 2D float array as an ASCII PGM (P2), min-max normalized.

    Values are laid out with the first array axis as image columns (x) and
    the second as rows (y), y flipped so +y points up in the image.
    """
    v = np.asarray(values, dtype=float)
    lo, hi = float(np.min(v)), float(np.max(v))
    span = hi - lo
    if span <= 0.0:
        pix = np.zeros_like(v, dtype=int)
    else:
        pix = np.rint((v - lo) / span * 255).astype(int)
    img = pix.T[::-1]
    with open(path, "w") as f:
        f.write("P2\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        for row in img:
            f.write(" ".join(str(int(x)) for x in row) + "\n")


def write_occupancy_pgm(path, grid: GridMap, z_index: int = 0) -> None:
    """Occupancy slice as PGM with o mapped linearly onto 0..255."""
    o = grid.occupancy_slice(z_index)
    pix = np.rint(o * 255).astype(int)
    img = pix.T[::-1]
    with open(path, "w") as f:
        f.write("P2\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        for row in img:
            f.write(" ".join(str(int(x)) for x in row) + "\n")
