"""Binocular viewing geometry for displaced render cameras.

World frame: right-handed, millimetres, origin at the cyclopean eye with the
head unrotated, +x right, +y up, +z toward the display. Head yaw is a
rotation about the vertical axis through ``(0, 0, -eye_to_axis_mm)``;
positive yaw turns +z toward +x.

The error model runs in three stages. Ground-truth angles are taken from
the true eye centres of projection (CoP). Each scene point is then projected
through the displaced render cameras onto the display plane, and those
plane points are viewed from the true CoPs. Finally the viewed angles are
compared with ground truth and the viewed rays are triangulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import DegenerateFixation, DegeneratePoint, Divergent, NoIntersection

ARCMIN_PER_DEG = 60.0
_PARALLEL_EPS = 1e-12


def vec3(x, y=None, z=None) -> np.ndarray:
    """Build a float Vec3 from three numbers or one length-3 sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float)
    else:
        v = np.array([x, y, z], dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {v.shape}")
    return v


def rot_y(yaw_deg: float) -> np.ndarray:
    """Rotation matrix about +y; positive angles carry +z toward +x."""
    a = np.radians(yaw_deg)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _is_direction(p: np.ndarray) -> bool:
    return not np.all(np.isfinite(p))


def _as_direction(p: np.ndarray) -> np.ndarray:
    """Unit direction for a point given with infinite components."""
    d = np.where(np.isinf(p), np.sign(p), 0.0)
    return _unit(d)


@dataclass(frozen=True)
class EyeModel:
    cor_to_cop_mm: float = 7.8
    # (left, right) yaw of the visual axis relative to the optical axis
    visual_axis_offset_deg: tuple[float, float] = (0.0, 0.0)
    ipd_mm: float = 63.0

    def __post_init__(self):
        if not self.cor_to_cop_mm > 0:
            raise ValueError("cor_to_cop_mm must be positive")
        if not 40.0 <= self.ipd_mm <= 80.0:
            raise ValueError("ipd_mm must lie in [40, 80]")

    def cor_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Eye centres of rotation with the head unrotated."""
        h = self.ipd_mm / 2.0
        return vec3(-h, 0.0, -self.cor_to_cop_mm), vec3(h, 0.0, -self.cor_to_cop_mm)


@dataclass(frozen=True)
class HeadRig:
    eye_to_axis_mm: float = 93.0
    yaw_deg: float = 0.0

    def __post_init__(self):
        if not self.eye_to_axis_mm > 0:
            raise ValueError("eye_to_axis_mm must be positive")
        if abs(self.yaw_deg) > 90.0:
            raise ValueError("|yaw_deg| must not exceed 90")

    @property
    def pivot(self) -> np.ndarray:
        return vec3(0.0, 0.0, -self.eye_to_axis_mm)


@dataclass(frozen=True)
class RigState:
    cop_left: np.ndarray
    cop_right: np.ndarray
    gaze_left: np.ndarray
    gaze_right: np.ndarray
    fixation: np.ndarray
    cor_left: np.ndarray
    cor_right: np.ndarray
    yaw_deg: float

    @property
    def cyclopean(self) -> np.ndarray:
        return 0.5 * (self.cop_left + self.cop_right)


@dataclass(frozen=True)
class DisplacementError:
    """Render camera error in the head frame.

    ``tracking`` moves both cameras by ``(x, 0, z)``. ``fit`` treats
    ``x_err_mm`` as the total baseline error, split evenly between the eyes
    (negative values shift each camera nasally), plus a common ``z`` shift.
    """

    x_err_mm: float = 0.0
    z_err_mm: float = 0.0
    mode: str = "tracking"

    def __post_init__(self):
        if self.mode not in ("tracking", "fit"):
            raise ValueError(f"unknown displacement mode {self.mode!r}")
        if not (np.isfinite(self.x_err_mm) and np.isfinite(self.z_err_mm)):
            raise ValueError("displacement must be finite")

    def head_offsets(self) -> tuple[np.ndarray, np.ndarray]:
        x, z = self.x_err_mm, self.z_err_mm
        if self.mode == "tracking":
            return vec3(x, 0.0, z), vec3(x, 0.0, z)
        return vec3(-x / 2.0, 0.0, z), vec3(x / 2.0, 0.0, z)


@dataclass(frozen=True)
class DisplacedCameras:
    cam_left: np.ndarray
    cam_right: np.ndarray


@dataclass(frozen=True)
class RenderSetup:
    plane_distance_mm: float

    def __post_init__(self):
        if not self.plane_distance_mm > 0:
            raise ValueError("plane_distance_mm must be positive")

    @property
    def diopters(self) -> float:
        return 1000.0 / self.plane_distance_mm


@dataclass(frozen=True)
class FusionModel:
    limit_at_fovea_arcmin: float = 20.0
    limit_at_6deg_arcmin: float = 60.0
    growth_per_deg: float = 0.07
    knee_deg: float = 6.0


@dataclass
class PointErrorRecord:
    point_id: str
    disparity_err_arcmin: float
    visual_dir_err_arcmin: float
    depth_err_diopters: float | None
    skew_mm: float | None
    reconstructed: np.ndarray | None
    fusible: bool
    divergent: bool = False
    # False when a camera ray misses the display plane; angles are then NaN
    projected: bool = True

    def as_row(self) -> dict:
        return {
            "point_id": self.point_id,
            "disparity_err_arcmin": self.disparity_err_arcmin,
            "visual_dir_err_arcmin": self.visual_dir_err_arcmin,
            "depth_err_diopters": self.depth_err_diopters,
            "skew_mm": self.skew_mm,
            "fusible": self.fusible,
        }


class BinocularAngles(NamedTuple):
    azimuth_left: float
    azimuth_right: float
    disparity: float
    cyclopean: float


# ---------------------------------------------------------------------------
# Eye and camera placement
# ---------------------------------------------------------------------------


def rig_state(
    yaw_deg: float | None,
    fixation,
    eye: EyeModel = EyeModel(),
    head: HeadRig = HeadRig(),
) -> RigState:
    """Place both eyes for a head yaw while they counter-rotate onto ``fixation``.

    ``yaw_deg=None`` takes the yaw from ``head``. A fixation with infinite
    components is treated as a direction (gaze parallel to it).
    """
    yaw = head.yaw_deg if yaw_deg is None else float(yaw_deg)
    if abs(yaw) > 90.0:
        raise ValueError("|yaw_deg| must not exceed 90")
    fix = np.asarray(fixation, dtype=float)
    R = rot_y(yaw)
    pivot = head.pivot
    cops, gazes, cors = [], [], []
    for cor0, offset in zip(eye.cor_positions(), eye.visual_axis_offset_deg):
        cor = pivot + R @ (cor0 - pivot)
        if _is_direction(fix):
            gaze = _as_direction(fix)
        else:
            to_fix = fix - cor
            dist = np.linalg.norm(to_fix)
            if dist < 1.0:
                raise DegenerateFixation(f"fixation is {dist:.3g} mm from an eye centre of rotation")
            gaze = to_fix / dist
        if offset:
            gaze = rot_y(offset) @ gaze
        cops.append(cor + eye.cor_to_cop_mm * gaze)
        gazes.append(gaze)
        cors.append(cor)
    return RigState(
        cop_left=cops[0],
        cop_right=cops[1],
        gaze_left=gazes[0],
        gaze_right=gazes[1],
        fixation=fix,
        cor_left=cors[0],
        cor_right=cors[1],
        yaw_deg=yaw,
    )


def ocular_parallax(yaw_of_eye_deg: float, eye: EyeModel = EyeModel()) -> float:
    """Translation of the CoP (mm) for a pure eye rotation about its CoR."""
    if abs(yaw_of_eye_deg) > 180.0:
        raise ValueError("eye rotation must lie within [-180, 180] degrees")
    return 2.0 * eye.cor_to_cop_mm * abs(np.sin(np.radians(yaw_of_eye_deg) / 2.0))


def apply_displacement(rig: RigState, err: DisplacementError) -> DisplacedCameras:
    """Move the render cameras off the CoPs by a head-frame error."""
    R = rot_y(rig.yaw_deg)
    off_l, off_r = err.head_offsets()
    return DisplacedCameras(cam_left=rig.cop_left + R @ off_l, cam_right=rig.cop_right + R @ off_r)


# ---------------------------------------------------------------------------
# Projection, triangulation and angles
# ---------------------------------------------------------------------------


def project_to_plane(camera, point, setup: RenderSetup) -> np.ndarray:
    """Intersect the ray camera -> point with the plane z = plane_distance_mm."""
    c = np.asarray(camera, dtype=float)
    d = np.asarray(point, dtype=float) - c
    if abs(d[2]) < _PARALLEL_EPS * max(1.0, np.linalg.norm(d)):
        raise NoIntersection("ray is parallel to the display plane")
    t = (setup.plane_distance_mm - c[2]) / d[2]
    if t <= 0:
        raise NoIntersection("display plane lies behind the camera along this ray")
    q = c + t * d
    return q[:2]


def _closest_approach(o1, d1, o2, d2):
    """Vectorised closest approach between rays; returns (mid, skew, ok)."""
    w0 = o1 - o2
    a = np.sum(d1 * d1, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d2 * d2, axis=-1)
    d = np.sum(d1 * w0, axis=-1)
    e = np.sum(d2 * w0, axis=-1)
    den = a * c - b * b
    parallel = den <= _PARALLEL_EPS * a * c
    safe = np.where(parallel, 1.0, den)
    s = (b * e - c * d) / safe
    t = (a * e - b * d) / safe
    p1 = o1 + s[..., None] * d1
    p2 = o2 + t[..., None] * d2
    ok = ~parallel & (s >= 0) & (t >= 0)
    return 0.5 * (p1 + p2), np.linalg.norm(p1 - p2, axis=-1), ok


def triangulate(origin_l, dir_l, origin_r, dir_r) -> tuple[np.ndarray, float]:
    """Midpoint and length of the shortest segment between two forward rays.

    Raises Divergent when the rays are parallel or only meet behind an origin.
    """
    mid, skew, ok = _closest_approach(
        np.asarray(origin_l, float), np.asarray(dir_l, float),
        np.asarray(origin_r, float), np.asarray(dir_r, float),
    )
    if not ok:
        raise Divergent("rays do not converge in front of both origins")
    return mid, float(skew)


def _azimuth(v: np.ndarray) -> np.ndarray:
    return np.arctan2(v[..., 0], v[..., 2])


def binocular_angles(cop_l, cop_r, point) -> BinocularAngles:
    """Signed horizontal azimuths (degrees) of a point seen from both CoPs."""
    p = np.asarray(point, dtype=float)
    cop_l = np.asarray(cop_l, dtype=float)
    cop_r = np.asarray(cop_r, dtype=float)
    if _is_direction(p):
        az_l = az_r = float(_azimuth(_as_direction(p)))
    else:
        vl, vr = p - cop_l, p - cop_r
        if min(np.linalg.norm(vl), np.linalg.norm(vr)) == 0.0:
            raise DegeneratePoint("point coincides with a centre of projection")
        az_l, az_r = float(_azimuth(vl)), float(_azimuth(vr))
    az_l, az_r = np.degrees(az_l), np.degrees(az_r)
    return BinocularAngles(az_l, az_r, az_l - az_r, 0.5 * (az_l + az_r))


# ---------------------------------------------------------------------------
# Fusion and comfort
# ---------------------------------------------------------------------------


def panum_limit(eccentricity_deg, fusion: FusionModel = FusionModel()):
    """Fusion limit in arcmin: linear to the knee, then compounding growth."""
    e = np.asarray(eccentricity_deg, dtype=float)
    if np.any(e < 0):
        raise ValueError("eccentricity must be non-negative")
    k = fusion.knee_deg
    lo, hi = fusion.limit_at_fovea_arcmin, fusion.limit_at_6deg_arcmin
    inner = lo + (hi - lo) * (e / k)
    outer = hi * (1.0 + fusion.growth_per_deg) ** (e - k)
    out = np.where(e <= k, inner, outer)
    return float(out) if out.ndim == 0 else out


def zone_of_comfort(display_diopters: float, half_width_d: float = 0.6) -> tuple[float, float]:
    if not display_diopters > 0:
        raise ValueError("display_diopters must be positive")
    return max(display_diopters - half_width_d, 0.0), display_diopters + half_width_d


# ---------------------------------------------------------------------------
# Error model
# ---------------------------------------------------------------------------


@dataclass
class PointErrorBatch:
    """Column-wise errors for many points under one rig/camera configuration."""

    disparity_err_arcmin: np.ndarray
    visual_dir_err_arcmin: np.ndarray
    depth_err_diopters: np.ndarray
    skew_mm: np.ndarray
    reconstructed: np.ndarray
    fusible: np.ndarray
    divergent: np.ndarray
    projected: np.ndarray
    eccentricity_deg: np.ndarray = field(repr=False, default=None)

    def records(self, point_ids: Sequence[str]) -> list[PointErrorRecord]:
        out = []
        for i, pid in enumerate(point_ids):
            ok_depth = self.projected[i] and not self.divergent[i]
            out.append(
                PointErrorRecord(
                    point_id=str(pid),
                    disparity_err_arcmin=float(self.disparity_err_arcmin[i]),
                    visual_dir_err_arcmin=float(self.visual_dir_err_arcmin[i]),
                    depth_err_diopters=float(self.depth_err_diopters[i]) if ok_depth else None,
                    skew_mm=float(self.skew_mm[i]) if ok_depth else None,
                    reconstructed=self.reconstructed[i].copy() if ok_depth else None,
                    fusible=bool(self.fusible[i]),
                    divergent=bool(self.divergent[i]),
                    projected=bool(self.projected[i]),
                )
            )
        return out


def point_errors_batch(
    points,
    rig: RigState,
    cams: DisplacedCameras,
    setup: RenderSetup,
    fusion: FusionModel = FusionModel(),
) -> PointErrorBatch:
    """Disparity, visual direction and depth errors for an (N, 3) point array."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    D = setup.plane_distance_mm
    cops = (rig.cop_left, rig.cop_right)
    camlist = (cams.cam_left, cams.cam_right)

    true_az, view_az, view_dirs = [], [], []
    projected = np.ones(len(P), dtype=bool)
    for cop, cam in zip(cops, camlist):
        true_az.append(_azimuth(P - cop))
        d = P - cam
        dz = d[:, 2]
        bad = np.abs(dz) < _PARALLEL_EPS * np.maximum(1.0, np.linalg.norm(d, axis=1))
        t = (D - cam[2]) / np.where(bad, 1.0, dz)
        bad |= t <= 0
        projected &= ~bad
        q = cam + t[:, None] * d
        v = q - cop
        view_az.append(_azimuth(v))
        view_dirs.append(_unit(v))

    to_arcmin = np.degrees(1.0) * ARCMIN_PER_DEG
    true_disp = true_az[0] - true_az[1]
    view_disp = view_az[0] - view_az[1]
    disp_err = (view_disp - true_disp) * to_arcmin
    dir_err = 0.5 * ((view_az[0] + view_az[1]) - (true_az[0] + true_az[1])) * to_arcmin

    recon, skew, ok = _closest_approach(cops[0], view_dirs[0], cops[1], view_dirs[1])
    divergent = ~ok & projected
    with np.errstate(divide="ignore", invalid="ignore"):
        depth_err = 1000.0 / np.linalg.norm(recon, axis=1) - 1000.0 / np.linalg.norm(P, axis=1)

    # Fusion: rendered disparity relative to the vergence demand of fixation.
    cyc = rig.cyclopean
    if _is_direction(rig.fixation):
        fix_dir = _as_direction(rig.fixation)
        fix_disp = 0.0
    else:
        fix_dir = _unit(rig.fixation - cyc)
        fix_disp = float(_azimuth(rig.fixation - cops[0]) - _azimuth(rig.fixation - cops[1]))
    cosang = np.clip(_unit(P - cyc) @ fix_dir, -1.0, 1.0)
    ecc = np.degrees(np.arccos(cosang))
    rel = np.abs(view_disp - fix_disp) * to_arcmin
    fusible = projected & (rel <= panum_limit(ecc, fusion))

    nan = np.nan
    disp_err = np.where(projected, disp_err, nan)
    dir_err = np.where(projected, dir_err, nan)
    good = projected & ok
    return PointErrorBatch(
        disparity_err_arcmin=disp_err,
        visual_dir_err_arcmin=dir_err,
        depth_err_diopters=np.where(good, depth_err, nan),
        skew_mm=np.where(good, skew, nan),
        reconstructed=np.where(good[:, None], recon, nan),
        fusible=fusible,
        divergent=divergent,
        projected=projected,
        eccentricity_deg=ecc,
    )


def point_errors(
    point,
    rig: RigState,
    cams: DisplacedCameras,
    setup: RenderSetup,
    fusion: FusionModel = FusionModel(),
    point_id: str = "p0",
) -> PointErrorRecord:
    """Errors for a single point.

    Raises NoIntersection when a camera ray misses the display plane. A
    divergent reconstruction is reported on the record, not raised.
    """
    batch = point_errors_batch(vec3(point)[None, :], rig, cams, setup, fusion)
    if not batch.projected[0]:
        raise NoIntersection(f"point {point_id} does not project onto the display plane")
    return batch.records([point_id])[0]


# ---------------------------------------------------------------------------
# Head sweeps
# ---------------------------------------------------------------------------


def sweep_yaws(yaw_range: tuple[float, float], step: float) -> np.ndarray:
    """Inclusive, evenly stepped yaw samples."""
    lo, hi = yaw_range
    if not step > 0:
        raise ValueError("step must be positive")
    if hi < lo:
        raise ValueError("yaw range must be increasing")
    n = int(np.floor((hi - lo) / step + 1e-9))
    yaws = lo + step * np.arange(n + 1)
    if hi - yaws[-1] > 1e-9:
        yaws = np.append(yaws, hi)
    return yaws


@dataclass
class PointSweepSummary:
    point_id: str
    visual_dir_p2p_arcmin: float
    max_abs_disparity_err_arcmin: float
    min_abs_disparity_err_arcmin: float


@dataclass
class SweepResult:
    samples: list[tuple[float, list[PointErrorRecord]]]
    summary: dict[str, PointSweepSummary]

    def rows(self):
        for yaw, recs in self.samples:
            for rec in recs:
                yield {"phi_deg": yaw, **rec.as_row()}


def vor_sweep(
    scene,
    err: DisplacementError,
    setup: RenderSetup,
    yaw_range: tuple[float, float] = (-20.0, 20.0),
    step: float = 1.0,
    eye: EyeModel = EyeModel(),
    head: HeadRig = HeadRig(),
    fusion: FusionModel = FusionModel(),
) -> SweepResult:
    """Evaluate every scene point across a horizontal VOR head sweep.

    Points that fail to project are kept as flagged records; the sweep
    itself never aborts on a per-point failure.
    """
    ids = [pid for pid, _ in scene.points]
    P = np.array([p for _, p in scene.points], dtype=float)
    samples = []
    dir_cols, disp_cols = [], []
    for yaw in sweep_yaws(yaw_range, step):
        rig = rig_state(float(yaw), scene.fixation, eye, head)
        cams = apply_displacement(rig, err)
        batch = point_errors_batch(P, rig, cams, setup, fusion)
        samples.append((float(yaw), batch.records(ids)))
        dir_cols.append(batch.visual_dir_err_arcmin)
        disp_cols.append(batch.disparity_err_arcmin)
    dirs = np.array(dir_cols)
    disps = np.abs(np.array(disp_cols))
    summary = {}
    for j, pid in enumerate(ids):
        d, a = dirs[:, j], disps[:, j]
        d, a = d[np.isfinite(d)], a[np.isfinite(a)]
        summary[pid] = PointSweepSummary(
            point_id=pid,
            visual_dir_p2p_arcmin=float(np.ptp(d)) if d.size else float("nan"),
            max_abs_disparity_err_arcmin=float(a.max()) if a.size else float("nan"),
            min_abs_disparity_err_arcmin=float(a.min()) if a.size else float("nan"),
        )
    return SweepResult(samples=samples, summary=summary)
