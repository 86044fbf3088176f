"""Response-surface modelling of 2IFC displacement data."""

from .contour import (
    ThresholdContour,
    extract_contour,
    polygon_area_centroid,
    threshold_radii,
    threshold_radius,
)
from .gp import GPModel, Limits, TrialRecord, fit_gp, fit_gp_arrays
from .projection import (
    ProjectedPosterior,
    denormalize,
    detect_prob,
    monotone_project,
    normalize,
    project_moments,
    r_max,
)
from .stats import TTestResult, paired_t_test

__all__ = [
    "GPModel",
    "Limits",
    "ProjectedPosterior",
    "TTestResult",
    "ThresholdContour",
    "TrialRecord",
    "denormalize",
    "detect_prob",
    "extract_contour",
    "fit_gp",
    "fit_gp_arrays",
    "monotone_project",
    "normalize",
    "paired_t_test",
    "polygon_area_centroid",
    "project_moments",
    "r_max",
    "threshold_radii",
    "threshold_radius",
]
