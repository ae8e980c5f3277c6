"""Human-tasked occlusion-aware exploration on shared occupancy grids.

A single depth-camera observation from a human marks a region of interest in
a shared map; a robot planner maximizes information-gain objectives (CSQMI,
ROI-CSQMI, OAVI) over forward-arc motion primitives to explore the parts of
that region occluded to the human.
"""

from ._kernels import BACKEND
from .grid_map import GridMap, new_map
from .objectives import (BeamCells, OaviParams, ObjectiveKind, csqmi_view,
                         oavi_view, roi_csqmi_view)
from .planner import (MotionPrimitive, PrimitiveLibrary, SafetyParams,
                      generate_library, propagate, select_best)
from .sensor import CameraModel, Frustum, Pose, Scan, build_frustum
from .simulator import (Environment, TrialConfig, TrialResult,
                        builtin_environment, load_environment, run_batch,
                        run_trial, sample_robot_start)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BeamCells",
    "CameraModel",
    "Environment",
    "Frustum",
    "GridMap",
    "MotionPrimitive",
    "OaviParams",
    "ObjectiveKind",
    "Pose",
    "PrimitiveLibrary",
    "SafetyParams",
    "Scan",
    "TrialConfig",
    "TrialResult",
    "build_frustum",
    "builtin_environment",
    "csqmi_view",
    "generate_library",
    "load_environment",
    "new_map",
    "oavi_view",
    "propagate",
    "roi_csqmi_view",
    "run_batch",
    "run_trial",
    "sample_robot_start",
    "select_best",
    "__version__",
]
