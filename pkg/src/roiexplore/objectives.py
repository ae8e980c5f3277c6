"""View-utility objectives: CSQMI, ROI-CSQMI, and OAVI.

All three score a candidate viewpoint by raycasting the current map and
summing per-cell terms along each beam:

* CSQMI: Cauchy-Schwarz quadratic mutual information between each cell and
  the beam-termination outcome, cells treated independently, contributions
  added over all raycasted cells.
* ROI-CSQMI: identical physics, but only cells flagged as ROI contribute to
  the sum. A view with no ROI cell scores exactly zero.
* OAVI: per-cell product of entropy x visibility, an ROI weight, and an
  obstacle-proximity weight, summed over raycasted cells.

The per-cell functions here are the plain reference implementations; the
view-level functions delegate the hot loop to the kernel backend.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import impl as _impl
from .grid_map import FREE_THRESHOLD, OCCUPIED_THRESHOLD
from .sensor import raycast_cells


class ObjectiveKind(enum.Enum):
    CSQMI = "csqmi"
    ROI_CSQMI = "roi-csqmi"
    OAVI = "oavi"


# Candidate beams are cut just after the first cell at or above this
# occupancy: an expected measurement cannot see past a mapped surface.
BEAM_STOP_OCCUPANCY = OCCUPIED_THRESHOLD


@dataclass
class OaviParams:
    """Weights for the OAVI objective.

    alpha_roi scales unknown space outside the ROI, alpha_pa is the
    proximity weight for cells without a usable distance, d_max is the
    robot sensor max range.
    """

    alpha_roi: float = 0.10
    alpha_pa: float = 0.15
    d_max: float = 5.0

    def __post_init__(self):
        if not (0.0 <= self.alpha_roi < 1.0):
            raise ValueError(f"alpha_roi must lie in [0, 1), got {self.alpha_roi}")
        if not (0.0 <= self.alpha_pa < 1.0):
            raise ValueError(f"alpha_pa must lie in [0, 1), got {self.alpha_pa}")
        if self.d_max <= 0.0:
            raise ValueError("d_max must be positive")


@dataclass
class BeamCells:
    """Cells along one candidate beam, in traversal order from the sensor."""

    o: np.ndarray        # occupancy probabilities, each in (0, 1)
    b: np.ndarray        # ROI flags
    d: np.ndarray        # obstacle distances, meters

    def __post_init__(self):
        self.o = np.asarray(self.o, dtype=float)
        self.b = np.asarray(self.b, dtype=bool)
        self.d = np.asarray(self.d, dtype=float)

    def __len__(self):
        return len(self.o)


def beam_outcome_distribution(beam: BeamCells) -> np.ndarray:
    """Probabilities of the beam terminating at each cell, plus pass-through.

    Entry j (< n) is p(e_j) = o_j * prod_{k<j}(1 - o_k); the last entry is
    the pass-through probability prod_k(1 - o_k). Sums to 1.
    """
    if len(beam) == 0:
        raise ValueError("beam must contain at least one cell")
    one_m = 1.0 - beam.o
    pref = np.concatenate([[1.0], np.cumprod(one_m)[:-1]])
    return np.concatenate([beam.o * pref, [float(np.prod(one_m))]])


def visibility(beam: BeamCells, j: int) -> float:
    """Probability that no cell before j blocks the beam; 1 for the first."""
    return float(np.prod(1.0 - beam.o[:j]))


def csqmi_cell(beam: BeamCells, j: int) -> float:
    """Cauchy-Schwarz QMI between cell j and the beam-termination outcome.

    The joint distribution couples the Bernoulli cell variable with the
    outcome alphabet: terminating at j requires the cell occupied,
    terminating beyond j (or passing through) requires it free, and
    terminations before j are independent of it. Natural log; nonnegative;
    0 for a deterministic cell.
    """
    q = float(beam.o[j])
    if q <= 0.0 or q >= 1.0:
        return 0.0
    p = beam_outcome_distribution(beam)
    sq = p * p
    a = q * q + (1.0 - q) * (1.0 - q)
    s_before = float(np.sum(sq[:j]))
    s_after = float(np.sum(sq[j + 1:]))
    s1 = a * s_before + sq[j] + s_after
    s2 = a * (s_before + sq[j] + s_after)
    s3 = a * s_before + q * sq[j] + (1.0 - q) * s_after
    return max(math.log(s1) + math.log(s2) - 2.0 * math.log(s3), 0.0)


def i_ua(o: float, pv: float) -> float:
    """Uncertainty term: Bernoulli entropy (bits) weighted by visibility."""
    if o <= 0.0 or o >= 1.0:
        return 0.0
    h = -(o * math.log2(o) + (1.0 - o) * math.log2(1.0 - o))
    return h * pv


def i_roi(b: bool, params: OaviParams) -> float:
    """ROI weight: 1 inside the ROI, alpha_roi elsewhere."""
    return 1.0 if b else params.alpha_roi


def i_pa(o: float, d: float, params: OaviParams) -> float:
    """Proximity weight: d_max - d for unknown cells with a usable distance,
    alpha_pa otherwise. The unknown band stands in for "o = 0.5" since exact
    equality does not survive a single log-odds update.
    """
    if FREE_THRESHOLD < o < OCCUPIED_THRESHOLD and d <= params.d_max:
        return params.d_max - d
    return params.alpha_pa


def csqmi_beam(beam: BeamCells, roi_only: bool = False) -> float:
    """Summed per-cell CSQMI along one beam, optionally ROI-filtered."""
    total = 0.0
    for j in range(len(beam)):
        if roi_only and not beam.b[j]:
            continue
        total += csqmi_cell(beam, j)
    return total


def oavi_beam(beam: BeamCells, params: OaviParams) -> float:
    """Summed OAVI contributions along one beam."""
    total = 0.0
    pv = 1.0
    for j in range(len(beam)):
        o = float(beam.o[j])
        total += i_ua(o, pv) * i_roi(bool(beam.b[j]), params) * i_pa(
            o, float(beam.d[j]), params
        )
        pv *= 1.0 - o
    return total


def extract_beams(grid, bundle) -> list[BeamCells]:
    """BeamCells for every ray of a candidate bundle against ``grid``.

    Like the scoring kernels, beams are truncated just after the first cell
    already known occupied: an expected measurement cannot see past a mapped
    surface.
    """
    from .grid_map import probability

    beams = []
    origin = np.asarray(bundle.origin, dtype=float)
    for k in range(len(bundle.directions)):
        end = origin + bundle.directions[k] * bundle.max_range
        idx, _ = raycast_cells(grid, origin[: grid.dim], end[: grid.dim],
                               extend_to=bundle.max_range)
        if len(idx) == 0:
            continue
        sel = tuple(idx.T) if grid.dim == 3 else (idx[:, 0], idx[:, 1], 0)
        o = probability(grid.log_odds[sel])
        blocked = np.nonzero(o >= BEAM_STOP_OCCUPANCY)[0]
        stop = blocked[0] + 1 if len(blocked) else len(o)
        beams.append(BeamCells(
            o=o[:stop],
            b=grid.roi[sel][:stop].astype(bool),
            d=grid.dist[sel][:stop],
        ))
    return beams


def _score(grid, bundle, objective: int, roi_filter: bool,
           params: OaviParams | None):
    p = params or OaviParams()
    origin3 = grid._pad3(bundle.origin)
    dirs = np.asarray(bundle.directions, dtype=np.float64)
    if dirs.shape[1] == 2:
        dirs = np.column_stack([dirs, np.zeros(len(dirs))])
    if not grid.is_inside(bundle.origin):
        raise ValueError("candidate origin lies outside the map bounds")
    return _impl.score_view(
        grid.log_odds, grid.roi, grid.dist,
        origin3, np.ascontiguousarray(dirs), float(bundle.max_range),
        objective, int(roi_filter),
        p.alpha_roi, p.alpha_pa, p.d_max,
        FREE_THRESHOLD, OCCUPIED_THRESHOLD, BEAM_STOP_OCCUPANCY,
        grid._origin3, grid.resolution,
    )


def csqmi_view(grid, bundle) -> float:
    """Total CSQMI of a candidate view: sum over rays and raycasted cells."""
    score, _ = _score(grid, bundle, _impl.OBJ_CSQMI, False, None)
    return score


def roi_csqmi_view(grid, bundle) -> float:
    """CSQMI restricted to ROI cells; beams without ROI cells contribute 0."""
    score, _ = _score(grid, bundle, _impl.OBJ_CSQMI, True, None)
    return score


def oavi_view(grid, bundle, params: OaviParams) -> float:
    """Total OAVI utility of a candidate view."""
    score, _ = _score(grid, bundle, _impl.OBJ_OAVI, False, params)
    return score


def evaluate_view(grid, bundle, kind: ObjectiveKind,
                  params: OaviParams | None = None):
    """Score a view with the chosen objective.

    Returns (score, roi_cells) where roi_cells counts raycasted ROI cells
    (used by trial logs to flag views that intersect the ROI).
    """
    if kind is ObjectiveKind.CSQMI:
        return _score(grid, bundle, _impl.OBJ_CSQMI, False, params)
    if kind is ObjectiveKind.ROI_CSQMI:
        return _score(grid, bundle, _impl.OBJ_CSQMI, True, params)
    return _score(grid, bundle, _impl.OBJ_OAVI, False, params)
