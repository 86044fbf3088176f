"""Canonical scenes and error presets for the AR/VR viewing conditions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnknownPreset
from .geometry import DisplacementError, EyeModel, HeadRig, RenderSetup, vec3

NEAR_DISPLAY_MM = 507.0  # 1.97 D
NEAR_POST_MM = 383.0  # 2.61 D
FAR_DISPLAY_D = 0.77
FAR_DISPLAY_MM = 1300.0
AR_POST_OFFSET_D = 0.64
POST_SPACING_MM = 100.0
TEXT_SLANT_DEG = 12.8

PRESETS = ("ar-near", "ar-far", "vr-grid-near", "vr-grid-far", "text-slant")


@dataclass
class Scene:
    points: list[tuple[str, np.ndarray]]
    fixation: np.ndarray
    display_distance_mm: float

    def __post_init__(self):
        if not self.points:
            raise ValueError("a scene needs at least one point")
        self.fixation = vec3(self.fixation)
        self.points = [(str(pid), vec3(p)) for pid, p in self.points]

    @property
    def point_array(self) -> np.ndarray:
        return np.array([p for _, p in self.points])

    @property
    def fixation_id(self) -> str | None:
        for pid, p in self.points:
            if np.allclose(p, self.fixation, atol=1e-9):
                return pid
        return None

    def to_json(self) -> dict:
        return {
            "display_distance_mm": self.display_distance_mm,
            "fixation": self.fixation.tolist(),
            "points": [{"id": pid, "xyz": p.tolist()} for pid, p in self.points],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Scene":
        return cls(
            points=[(pt["id"], pt["xyz"]) for pt in data["points"]],
            fixation=data["fixation"],
            display_distance_mm=float(data["display_distance_mm"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _ar_posts(display_mm: float, post_mm: float) -> Scene:
    pts = [
        ("post_left", (-POST_SPACING_MM, 0.0, post_mm)),
        ("post_center", (0.0, 0.0, post_mm)),
        ("post_right", (POST_SPACING_MM, 0.0, post_mm)),
    ]
    return Scene(points=pts, fixation=(0.0, 0.0, post_mm), display_distance_mm=display_mm)


def _grid(display_mm: float, n: int = 5, half_xy: float = 250.0, half_z: float = 300.0) -> Scene:
    xs = np.linspace(-half_xy, half_xy, n)
    zs = display_mm + np.linspace(-half_z, half_z, n)
    pts = []
    for k, z in enumerate(zs):
        for j, y in enumerate(xs):
            for i, x in enumerate(xs):
                pts.append((f"g{i}_{j}_{k}", (x, y, z)))
    return Scene(points=pts, fixation=(0.0, 0.0, display_mm), display_distance_mm=display_mm)


def _text_plane(display_mm: float, n: int = 11, half: float = 150.0, slant_deg: float = TEXT_SLANT_DEG) -> Scene:
    # top edge tilts away from the viewer
    a = np.radians(slant_deg)
    u = np.linspace(-half, half, n)
    pts = []
    for j, v in enumerate(u):
        for i, x in enumerate(u):
            pts.append((f"t{i}_{j}", (x, v * np.cos(a), display_mm + v * np.sin(a))))
    return Scene(points=pts, fixation=(0.0, 0.0, display_mm), display_distance_mm=display_mm)


def build_scenario(preset: str) -> tuple[Scene, RenderSetup]:
    """Scene and render plane for a named viewing condition."""
    if preset == "ar-near":
        scene = _ar_posts(NEAR_DISPLAY_MM, NEAR_POST_MM)
    elif preset == "ar-far":
        scene = _ar_posts(FAR_DISPLAY_MM, 1000.0 / (FAR_DISPLAY_D + AR_POST_OFFSET_D))
    elif preset == "vr-grid-near":
        scene = _grid(NEAR_DISPLAY_MM)
    elif preset == "vr-grid-far":
        scene = _grid(FAR_DISPLAY_MM)
    elif preset == "text-slant":
        scene = _text_plane(NEAR_DISPLAY_MM)
    else:
        raise UnknownPreset(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    return scene, RenderSetup(scene.display_distance_mm)


@dataclass(frozen=True)
class YawedErrorSetup:
    eye: EyeModel
    head: HeadRig
    yaw_deg: float
    fit: DisplacementError
    tracking: DisplacementError
    preset: str = "vr-grid-near"

    @property
    def fit_baseline_mm(self) -> float:
        return self.eye.ipd_mm + self.fit.x_err_mm


def yawed_error_setup() -> YawedErrorSetup:
    """63 mm IPD observer at -20 deg yaw with a 12 mm IPD or tracking error."""
    return YawedErrorSetup(
        eye=EyeModel(ipd_mm=63.0),
        head=HeadRig(),
        yaw_deg=-20.0,
        fit=DisplacementError(-12.0, 0.0, "fit"),
        tracking=DisplacementError(-12.0, 0.0, "tracking"),
    )


# older name for the same setup
fig6_setup = yawed_error_setup
