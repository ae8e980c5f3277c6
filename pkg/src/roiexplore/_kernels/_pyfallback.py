"""Pure-Python grid kernels.

Mirrors ``roiexplore._kernels._core`` (the Cython extension) operation for
operation. This module is the readable reference and the fallback used when
the extension is not built or ``ROIEXPLORE_PURE_PYTHON=1`` is set. Inner
loops are per-ray Python with numpy doing the per-beam arithmetic, so it is
roughly two orders of magnitude slower than the compiled core on the scoring
path.
"""

import math

import numpy as np

BACKEND = "python"

OBJ_CSQMI = 0
OBJ_OAVI = 1

FLAG_BEFORE = 0
FLAG_HIT = 1
FLAG_BEHIND = 2

_EPS_LEN = 1e-12


def _traverse(ox, oy, oz, ex, ey, ez, total_len, g0x, g0y, g0z, res, nx, ny, nz):
    """Amanatides-Woo march from (ox,oy,oz) toward (ex,ey,ez).

    Visits each crossed cell exactly once, in order, starting with the cell
    containing the origin, continuing until the accumulated ray length
    reaches ``total_len`` or the walk leaves the grid.

    Returns (cells, hit_pos) where cells is a list of (ix, iy, iz) tuples and
    hit_pos is the list position of the cell containing the endpoint, or -1
    if that cell was never reached (endpoint out of bounds or beyond
    total_len).
    """
    dx, dy, dz = ex - ox, ey - oy, ez - oz
    seg_len = math.sqrt(dx * dx + dy * dy + dz * dz)
    ix = int(math.floor((ox - g0x) / res))
    iy = int(math.floor((oy - g0y) / res))
    iz = int(math.floor((oz - g0z) / res))
    if seg_len < _EPS_LEN:
        if 0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz:
            return [(ix, iy, iz)], 0
        return [], -1
    dx, dy, dz = dx / seg_len, dy / seg_len, dz / seg_len
    total = max(total_len, seg_len)

    eix = int(math.floor((ex - g0x) / res))
    eiy = int(math.floor((ey - g0y) / res))
    eiz = int(math.floor((ez - g0z) / res))

    def axis_setup(o, g0, i, d):
        if d > 0.0:
            return 1, (g0 + (i + 1) * res - o) / d, res / d
        if d < 0.0:
            return -1, (g0 + i * res - o) / d, -res / d
        return 0, math.inf, math.inf

    sx, tx, ddx = axis_setup(ox, g0x, ix, dx)
    sy, ty, ddy = axis_setup(oy, g0y, iy, dy)
    sz, tz, ddz = axis_setup(oz, g0z, iz, dz)

    cells = []
    hit_pos = -1
    while 0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz:
        cells.append((ix, iy, iz))
        if ix == eix and iy == eiy and iz == eiz:
            hit_pos = len(cells) - 1
        if tx <= ty and tx <= tz:
            if tx >= total:
                break
            ix += sx
            tx += ddx
        elif ty <= tz:
            if ty >= total:
                break
            iy += sy
            ty += ddy
        else:
            if tz >= total:
                break
            iz += sz
            tz += ddz
    return cells, hit_pos


def raycast_path(ox, oy, oz, ex, ey, ez, extend_to,
                 g0x, g0y, g0z, res, nx, ny, nz):
    """Traversed cells plus before/hit/behind flags relative to the endpoint.

    Returns (indices int64 (n,3), flags int8 (n,)).
    """
    cells, hit_pos = _traverse(ox, oy, oz, ex, ey, ez, extend_to,
                               g0x, g0y, g0z, res, nx, ny, nz)
    n = len(cells)
    idx = np.array(cells, dtype=np.int64).reshape(n, 3)
    flags = np.zeros(n, dtype=np.int8)
    if hit_pos >= 0:
        flags[hit_pos] = FLAG_HIT
        flags[hit_pos + 1:] = FLAG_BEHIND
    return idx, flags


def update_occupancy(log_odds, origin, ends, hits,
                     l_miss, l_hit, l_min, l_max, g0, res):
    """Fuse one scan into the log-odds array, ray by ray, in place.

    Cells strictly before each hit cell take l_miss, the hit cell takes
    l_hit; rays without a hit mark every traversed cell as a miss. Values
    clamp to [l_min, l_max] after each update.
    """
    nx, ny, nz = log_odds.shape
    ox, oy, oz = origin
    g0x, g0y, g0z = g0
    for r in range(ends.shape[0]):
        ex, ey, ez = ends[r, 0], ends[r, 1], ends[r, 2]
        cells, hit_pos = _traverse(ox, oy, oz, ex, ey, ez, 0.0,
                                   g0x, g0y, g0z, res, nx, ny, nz)
        hit = bool(hits[r])
        for p, (ix, iy, iz) in enumerate(cells):
            if hit and p == hit_pos:
                v = log_odds[ix, iy, iz] + l_hit
            else:
                v = log_odds[ix, iy, iz] + l_miss
            if v < l_min:
                v = l_min
            elif v > l_max:
                v = l_max
            log_odds[ix, iy, iz] = v
            if hit and p == hit_pos:
                break


def update_distance(dist, origin, ends, hits, total_range, g0, res):
    """Min-fuse obstacle distances along each hit ray, in place.

    Each ray with a hit is extended to total_range; every traversed cell
    (before, at, and behind the hit) takes the minimum of its stored value
    and the Euclidean distance between its center and the hit cell's center.
    Rays without a hit are skipped.
    """
    nx, ny, nz = dist.shape
    ox, oy, oz = origin
    g0x, g0y, g0z = g0
    for r in range(ends.shape[0]):
        if not hits[r]:
            continue
        ex, ey, ez = ends[r, 0], ends[r, 1], ends[r, 2]
        cells, hit_pos = _traverse(ox, oy, oz, ex, ey, ez, total_range,
                                   g0x, g0y, g0z, res, nx, ny, nz)
        if hit_pos < 0:
            continue
        hx, hy, hz = cells[hit_pos]
        cx = g0x + (hx + 0.5) * res
        cy = g0y + (hy + 0.5) * res
        cz = g0z + (hz + 0.5) * res
        for ix, iy, iz in cells:
            px = g0x + (ix + 0.5) * res - cx
            py = g0y + (iy + 0.5) * res - cy
            pz = g0z + (iz + 0.5) * res - cz
            d = math.sqrt(px * px + py * py + pz * pz)
            if d < dist[ix, iy, iz]:
                dist[ix, iy, iz] = d


def _beam_csqmi(o, roi_mask):
    """Summed per-cell Cauchy-Schwarz mutual information along one beam.

    The beam-termination outcome distribution is always built from the full
    beam; roi_mask only gates which cells' contributions are added.
    """
    one_m = 1.0 - o
    pref = np.empty_like(o)
    pref[0] = 1.0
    np.cumprod(one_m[:-1], out=pref[1:])
    p_out = o * pref
    p_pass = pref[-1] * one_m[-1]
    sq = p_out * p_out
    total_sq = float(np.sum(sq)) + p_pass * p_pass
    cum = np.cumsum(sq)
    s_before = cum - sq
    s_after = np.maximum(total_sq - cum, 0.0)
    a = o * o + one_m * one_m
    s1 = a * s_before + sq + s_after
    s2 = a * (s_before + sq + s_after)
    s3 = a * s_before + o * sq + one_m * s_after
    contrib = np.maximum(np.log(s1) + np.log(s2) - 2.0 * np.log(s3), 0.0)
    return float(np.sum(contrib[roi_mask]))


def _beam_oavi(o, roi_mask, d, alpha_roi, alpha_pa, d_max,
               unknown_lo, unknown_hi):
    one_m = 1.0 - o
    pv = np.empty_like(o)
    pv[0] = 1.0
    np.cumprod(one_m[:-1], out=pv[1:])
    h = -(o * np.log2(o) + one_m * np.log2(one_m))
    i_roi = np.where(roi_mask, 1.0, alpha_roi)
    unknown = (o > unknown_lo) & (o < unknown_hi)
    i_pa = np.where(unknown & (d <= d_max), d_max - d, alpha_pa)
    return float(np.sum(h * pv * i_roi * i_pa))


def score_view(log_odds, roi, dist, origin, dirs, max_range,
               objective, roi_filter, alpha_roi, alpha_pa, d_max,
               unknown_lo, unknown_hi, occupied_stop, g0, res):
    """Score a candidate viewpoint by raycasting the current map.

    Beams terminate after the first cell already known occupied
    (o >= occupied_stop): an expected measurement cannot see past a mapped
    surface. Returns (score, roi_cells) where roi_cells counts raycasted
    cells with the ROI flag set (per beam; shared cells count once per beam).
    """
    nx, ny, nz = log_odds.shape
    ox, oy, oz = origin
    g0x, g0y, g0z = g0
    score = 0.0
    roi_cells = 0
    for r in range(dirs.shape[0]):
        ex = ox + dirs[r, 0] * max_range
        ey = oy + dirs[r, 1] * max_range
        ez = oz + dirs[r, 2] * max_range
        cells, _ = _traverse(ox, oy, oz, ex, ey, ez, max_range,
                             g0x, g0y, g0z, res, nx, ny, nz)
        if not cells:
            continue
        idx = np.array(cells, dtype=np.intp)
        ii, jj, kk = idx[:, 0], idx[:, 1], idx[:, 2]
        o = 1.0 / (1.0 + np.exp(-log_odds[ii, jj, kk]))
        blocked = np.nonzero(o >= occupied_stop)[0]
        if len(blocked):
            stop = blocked[0] + 1
            o = o[:stop]
            ii, jj, kk = ii[:stop], jj[:stop], kk[:stop]
        b = roi[ii, jj, kk].astype(bool)
        roi_cells += int(np.count_nonzero(b))
        if objective == OBJ_CSQMI:
            mask = b if roi_filter else np.ones(len(o), dtype=bool)
            score += _beam_csqmi(o, mask)
        else:
            score += _beam_oavi(o, b, dist[ii, jj, kk],
                                alpha_roi, alpha_pa, d_max,
                                unknown_lo, unknown_hi)
    return score, roi_cells
