# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled grid kernels: voxel traversal, scan fusion, and view scoring.

Semantics match roiexplore._kernels._pyfallback; that module is the readable
reference, this one is the hot path.
"""

from libc.math cimport exp, floor, log, log2, sqrt

import numpy as np

cimport numpy as cnp

BACKEND = "cython"

OBJ_CSQMI = 0
OBJ_OAVI = 1

FLAG_BEFORE = 0
FLAG_HIT = 1
FLAG_BEHIND = 2

cdef double INF = float("inf")
cdef double _EPS_LEN = 1e-12


cdef struct Ray:
    long ix, iy, iz          # current cell
    long eix, eiy, eiz       # endpoint cell
    long sx, sy, sz          # step per axis
    double tx, ty, tz        # distance to next crossing per axis
    double ddx, ddy, ddz     # crossing spacing per axis
    double total             # walk length
    int degenerate           # zero-length segment


cdef inline void _ray_init(Ray* w,
                           double ox, double oy, double oz,
                           double ex, double ey, double ez,
                           double total_len,
                           double g0x, double g0y, double g0z,
                           double res) nogil:
    cdef double dx = ex - ox
    cdef double dy = ey - oy
    cdef double dz = ez - oz
    cdef double seg_len = sqrt(dx * dx + dy * dy + dz * dz)

    w.ix = <long>floor((ox - g0x) / res)
    w.iy = <long>floor((oy - g0y) / res)
    w.iz = <long>floor((oz - g0z) / res)
    w.eix = <long>floor((ex - g0x) / res)
    w.eiy = <long>floor((ey - g0y) / res)
    w.eiz = <long>floor((ez - g0z) / res)

    if seg_len < _EPS_LEN:
        w.degenerate = 1
        return
    w.degenerate = 0
    dx /= seg_len
    dy /= seg_len
    dz /= seg_len
    w.total = total_len if total_len > seg_len else seg_len

    if dx > 0.0:
        w.sx = 1; w.tx = (g0x + (w.ix + 1) * res - ox) / dx; w.ddx = res / dx
    elif dx < 0.0:
        w.sx = -1; w.tx = (g0x + w.ix * res - ox) / dx; w.ddx = -res / dx
    else:
        w.sx = 0; w.tx = INF; w.ddx = INF
    if dy > 0.0:
        w.sy = 1; w.ty = (g0y + (w.iy + 1) * res - oy) / dy; w.ddy = res / dy
    elif dy < 0.0:
        w.sy = -1; w.ty = (g0y + w.iy * res - oy) / dy; w.ddy = -res / dy
    else:
        w.sy = 0; w.ty = INF; w.ddy = INF
    if dz > 0.0:
        w.sz = 1; w.tz = (g0z + (w.iz + 1) * res - oz) / dz; w.ddz = res / dz
    elif dz < 0.0:
        w.sz = -1; w.tz = (g0z + w.iz * res - oz) / dz; w.ddz = -res / dz
    else:
        w.sz = 0; w.tz = INF; w.ddz = INF


cdef inline int _ray_step(Ray* w) nogil:
    # Advance one cell; returns 0 when the walk is finished.
    if w.degenerate:
        return 0
    if w.tx <= w.ty and w.tx <= w.tz:
        if w.tx >= w.total:
            return 0
        w.ix += w.sx
        w.tx += w.ddx
    elif w.ty <= w.tz:
        if w.ty >= w.total:
            return 0
        w.iy += w.sy
        w.ty += w.ddy
    else:
        if w.tz >= w.total:
            return 0
        w.iz += w.sz
        w.tz += w.ddz
    return 1


cdef inline int _in_bounds(Ray* w, long nx, long ny, long nz) nogil:
    return (0 <= w.ix < nx) and (0 <= w.iy < ny) and (0 <= w.iz < nz)


def raycast_path(double ox, double oy, double oz,
                 double ex, double ey, double ez, double extend_to,
                 double g0x, double g0y, double g0z, double res,
                 long nx, long ny, long nz):
    """Traversed cells plus before/hit/behind flags relative to the endpoint.

    Returns (indices int64 (n,3), flags int8 (n,)).
    """
    cdef long cap = nx + ny + nz + 4
    idx_arr = np.empty((cap, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef Ray w
    _ray_init(&w, ox, oy, oz, ex, ey, ez, extend_to, g0x, g0y, g0z, res)
    cdef long n = 0
    cdef long hit_pos = -1
    with nogil:
        while _in_bounds(&w, nx, ny, nz) and n < cap:
            idx[n, 0] = w.ix
            idx[n, 1] = w.iy
            idx[n, 2] = w.iz
            if w.ix == w.eix and w.iy == w.eiy and w.iz == w.eiz:
                hit_pos = n
            n += 1
            if not _ray_step(&w):
                break
    flags = np.zeros(n, dtype=np.int8)
    if hit_pos >= 0:
        flags[hit_pos] = FLAG_HIT
        flags[hit_pos + 1:] = FLAG_BEHIND
    return idx_arr[:n].copy(), flags


def update_occupancy(double[:, :, ::1] log_odds,
                     double[::1] origin, double[:, ::1] ends,
                     cnp.uint8_t[::1] hits,
                     double l_miss, double l_hit,
                     double l_min, double l_max,
                     double[::1] g0, double res):
    """Fuse one scan into the log-odds array, ray by ray, in place."""
    cdef long nx = log_odds.shape[0]
    cdef long ny = log_odds.shape[1]
    cdef long nz = log_odds.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double g0x = g0[0], g0y = g0[1], g0z = g0[2]
    cdef Py_ssize_t r
    cdef int hit, at_end
    cdef double v
    cdef Ray w
    with nogil:
        for r in range(ends.shape[0]):
            _ray_init(&w, ox, oy, oz, ends[r, 0], ends[r, 1], ends[r, 2],
                      0.0, g0x, g0y, g0z, res)
            hit = hits[r]
            while _in_bounds(&w, nx, ny, nz):
                at_end = (w.ix == w.eix and w.iy == w.eiy and w.iz == w.eiz)
                if hit and at_end:
                    v = log_odds[w.ix, w.iy, w.iz] + l_hit
                else:
                    v = log_odds[w.ix, w.iy, w.iz] + l_miss
                if v < l_min:
                    v = l_min
                elif v > l_max:
                    v = l_max
                log_odds[w.ix, w.iy, w.iz] = v
                if hit and at_end:
                    break
                if not _ray_step(&w):
                    break


def update_distance(double[:, :, ::1] dist,
                    double[::1] origin, double[:, ::1] ends,
                    cnp.uint8_t[::1] hits, double total_range,
                    double[::1] g0, double res):
    """Min-fuse obstacle distances along each hit ray, in place."""
    cdef long nx = dist.shape[0]
    cdef long ny = dist.shape[1]
    cdef long nz = dist.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double g0x = g0[0], g0y = g0[1], g0z = g0[2]
    cdef long cap = nx + ny + nz + 4
    cells_arr = np.empty((cap, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] cells = cells_arr
    cdef Py_ssize_t r
    cdef long n, hit_pos, p
    cdef double cx, cy, cz, px, py, pz, d
    cdef Ray w
    with nogil:
        for r in range(ends.shape[0]):
            if not hits[r]:
                continue
            _ray_init(&w, ox, oy, oz, ends[r, 0], ends[r, 1], ends[r, 2],
                      total_range, g0x, g0y, g0z, res)
            n = 0
            hit_pos = -1
            while _in_bounds(&w, nx, ny, nz) and n < cap:
                cells[n, 0] = w.ix
                cells[n, 1] = w.iy
                cells[n, 2] = w.iz
                if w.ix == w.eix and w.iy == w.eiy and w.iz == w.eiz:
                    hit_pos = n
                n += 1
                if not _ray_step(&w):
                    break
            if hit_pos < 0:
                continue
            cx = g0x + (cells[hit_pos, 0] + 0.5) * res
            cy = g0y + (cells[hit_pos, 1] + 0.5) * res
            cz = g0z + (cells[hit_pos, 2] + 0.5) * res
            for p in range(n):
                px = g0x + (cells[p, 0] + 0.5) * res - cx
                py = g0y + (cells[p, 1] + 0.5) * res - cy
                pz = g0z + (cells[p, 2] + 0.5) * res - cz
                d = sqrt(px * px + py * py + pz * pz)
                if d < dist[cells[p, 0], cells[p, 1], cells[p, 2]]:
                    dist[cells[p, 0], cells[p, 1], cells[p, 2]] = d


def score_view(double[:, :, ::1] log_odds,
               cnp.uint8_t[:, :, ::1] roi,
               double[:, :, ::1] dist,
               double[::1] origin, double[:, ::1] dirs, double max_range,
               int objective, int roi_filter,
               double alpha_roi, double alpha_pa, double d_max,
               double unknown_lo, double unknown_hi, double occupied_stop,
               double[::1] g0, double res):
    """Score a candidate viewpoint by raycasting the current map.

    Beams terminate after the first cell already known occupied
    (o >= occupied_stop). Returns (score, roi_cells); roi_cells counts
    raycasted ROI cells per beam. The outcome model always uses the full
    (truncated) beam; roi_filter only gates which cells contribute to a
    CSQMI sum.
    """
    cdef long nx = log_odds.shape[0]
    cdef long ny = log_odds.shape[1]
    cdef long nz = log_odds.shape[2]
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double g0x = g0[0], g0y = g0[1], g0z = g0[2]
    cdef long cap = nx + ny + nz + 4

    o_arr = np.empty(cap, dtype=np.float64)
    b_arr = np.empty(cap, dtype=np.uint8)
    d_arr = np.empty(cap, dtype=np.float64)
    sq_arr = np.empty(cap, dtype=np.float64)
    cdef double[::1] ob = o_arr
    cdef cnp.uint8_t[::1] bb = b_arr
    cdef double[::1] db = d_arr
    cdef double[::1] sq = sq_arr

    cdef double score = 0.0
    cdef long roi_cells = 0
    cdef Py_ssize_t r
    cdef long n, j
    cdef double ex, ey, ez
    cdef double pref, p_pass, p_out, total_sq, cum
    cdef double s_before, s_after, a, s1, s2, s3, contrib
    cdef double q, one_q, pv, h, f_roi, f_pa
    cdef Ray w
    with nogil:
        for r in range(dirs.shape[0]):
            ex = ox + dirs[r, 0] * max_range
            ey = oy + dirs[r, 1] * max_range
            ez = oz + dirs[r, 2] * max_range
            _ray_init(&w, ox, oy, oz, ex, ey, ez, max_range,
                      g0x, g0y, g0z, res)
            n = 0
            while _in_bounds(&w, nx, ny, nz) and n < cap:
                ob[n] = 1.0 / (1.0 + exp(-log_odds[w.ix, w.iy, w.iz]))
                bb[n] = roi[w.ix, w.iy, w.iz]
                db[n] = dist[w.ix, w.iy, w.iz]
                if bb[n]:
                    roi_cells += 1
                n += 1
                if ob[n - 1] >= occupied_stop:
                    break
                if not _ray_step(&w):
                    break
            if n == 0:
                continue
            if objective == 0:  # CSQMI / ROI-CSQMI
                pref = 1.0
                total_sq = 0.0
                for j in range(n):
                    p_out = ob[j] * pref
                    sq[j] = p_out * p_out
                    total_sq += sq[j]
                    pref *= 1.0 - ob[j]
                p_pass = pref
                total_sq += p_pass * p_pass
                s_before = 0.0
                cum = 0.0
                for j in range(n):
                    cum += sq[j]
                    s_after = total_sq - cum
                    if s_after < 0.0:
                        s_after = 0.0
                    if (not roi_filter) or bb[j]:
                        q = ob[j]
                        one_q = 1.0 - q
                        a = q * q + one_q * one_q
                        s1 = a * s_before + sq[j] + s_after
                        s2 = a * (s_before + sq[j] + s_after)
                        s3 = a * s_before + q * sq[j] + one_q * s_after
                        contrib = log(s1) + log(s2) - 2.0 * log(s3)
                        if contrib > 0.0:
                            score += contrib
                    s_before += sq[j]
            else:  # OAVI
                pv = 1.0
                for j in range(n):
                    q = ob[j]
                    one_q = 1.0 - q
                    h = -(q * log2(q) + one_q * log2(one_q))
                    f_roi = 1.0 if bb[j] else alpha_roi
                    if q > unknown_lo and q < unknown_hi and db[j] <= d_max:
                        f_pa = d_max - db[j]
                    else:
                        f_pa = alpha_pa
                    score += h * pv * f_roi * f_pa
                    pv *= one_q
    return score, roi_cells
