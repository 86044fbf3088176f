"""World-locked rendering error toolkit.

Geometry of displaced render cameras, canonical viewing scenes, 2IFC
threshold modelling, simulated adaptive experiments and encoder prediction.
"""

from .errors import WLRError
from .geometry import (
    DisplacementError,
    EyeModel,
    HeadRig,
    RenderSetup,
    apply_displacement,
    binocular_angles,
    ocular_parallax,
    panum_limit,
    point_errors,
    project_to_plane,
    rig_state,
    triangulate,
    vor_sweep,
    zone_of_comfort,
)
from .predictor import PredictorConfig, predict, predictor_weights
from .scenarios import PRESETS, Scene, build_scenario, fig6_setup, yawed_error_setup

__version__ = "0.1.0"

__all__ = [
    "PRESETS",
    "DisplacementError",
    "EyeModel",
    "HeadRig",
    "PredictorConfig",
    "RenderSetup",
    "Scene",
    "WLRError",
    "apply_displacement",
    "binocular_angles",
    "build_scenario",
    "fig6_setup",
    "yawed_error_setup",
    "ocular_parallax",
    "panum_limit",
    "point_errors",
    "predict",
    "predictor_weights",
    "project_to_plane",
    "rig_state",
    "triangulate",
    "vor_sweep",
    "zone_of_comfort",
]
