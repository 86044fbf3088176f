"""Iso-probability threshold contours and polygon summaries."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ..errors import FullyCensored
from .gp import Limits
from .projection import DEFAULT_M, RayEnvelope, denormalize, r_max

MAX_CENSORED_FRACTION = 0.25


def polygon_area_centroid(vertices) -> tuple[float, tuple[float, float]]:
    """Shoelace area (absolute) and area centroid of a simple polygon."""
    v = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(v) == 0:
        return 0.0, (float("nan"), float("nan"))
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a2 = cross.sum()
    if abs(a2) < 1e-15 * max(1.0, np.abs(v).max() ** 2):
        c = v.mean(axis=0)
        return 0.0, (float(c[0]), float(c[1]))
    cx = ((x + xn) * cross).sum() / (3.0 * a2)
    cy = ((y + yn) * cross).sum() / (3.0 * a2)
    return float(abs(a2) / 2.0), (float(cx), float(cy))


@dataclass
class ThresholdContour:
    p_target: float
    vertices: list[tuple[float, float]]
    censored_angles: list[float]
    area_mm2: float
    centroid: tuple[float, float]
    fully_censored: bool = False
    angles: list[float] = field(default_factory=list)

    @property
    def mean_radius_mm(self) -> float:
        if not self.vertices:
            return float("nan")
        return float(np.mean(np.hypot(*np.asarray(self.vertices).T)))

    def to_json(self) -> dict:
        return {
            "p_target": self.p_target,
            "vertices": [[float(x), float(z)] for x, z in self.vertices],
            "censored_angles": [float(t) for t in self.censored_angles],
            "area_mm2": self.area_mm2,
            "centroid": [float(c) for c in self.centroid],
            "fully_censored": self.fully_censored,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ThresholdContour":
        return cls(
            p_target=float(d["p_target"]),
            vertices=[tuple(v) for v in d["vertices"]],
            censored_angles=list(d["censored_angles"]),
            area_mm2=float(d["area_mm2"]),
            centroid=tuple(d["centroid"]),
            fully_censored=bool(d.get("fully_censored", False)),
        )


def threshold_radii(model, thetas, p_target: float = 0.75, m: int = DEFAULT_M, rtol: float = 1e-4):
    """Normalised radius where detection probability reaches ``p_target``.

    Works on an array of angles at once; censored angles (probability still
    below target at the edge of the search box) come back as NaN. The
    probability is the plug-in ``Phi(mu_hat)`` of :func:`monotone_project`;
    ``m`` is accepted for signature compatibility and does not affect it.
    """
    if not 0.5 < p_target < 1.0:
        raise ValueError("p_target must lie in (0.5, 1)")
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    hi = r_max(thetas)
    lo = np.zeros_like(hi)

    env = RayEnvelope(model, thetas, hi)
    cos, sin = np.cos(thetas), np.sin(thetas)

    def prob(r):
        mu = model.predict(np.stack([r * cos, r * sin], axis=-1))[0]
        return ndtr(env.sup(r, mu))

    censored = prob(hi) < p_target
    at_origin = prob(lo) >= p_target
    hi = np.where(at_origin, 0.0, hi)
    while True:
        active = (hi - lo) > rtol * np.maximum(hi, 1e-12)
        active &= ~censored
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        above = prob(mid) >= p_target
        hi = np.where(active & above, mid, hi)
        lo = np.where(active & ~above, mid, lo)
    r = 0.5 * (lo + hi)
    return np.where(censored, np.nan, r)


def threshold_radius(model, theta: float, p_target: float = 0.75, m: int = DEFAULT_M) -> float | None:
    """Scalar form of :func:`threshold_radii`; ``None`` when censored."""
    r = float(threshold_radii(model, [theta], p_target, m)[0])
    return None if np.isnan(r) else r


def extract_contour(model, p_target: float = 0.75, n_angles: int = 64, limits: Limits | None = None,
                    m: int = DEFAULT_M) -> ThresholdContour:
    """Threshold contour in mm over ``n_angles`` evenly spaced angles.

    Raises FullyCensored (carrying the partial contour) when more than a
    quarter of the angles are censored or fewer than three vertices remain.
    """
    if n_angles < 8:
        raise ValueError("n_angles must be at least 8")
    limits = limits or model.limits
    thetas = 2.0 * np.pi * np.arange(n_angles) / n_angles
    r = threshold_radii(model, thetas, p_target, m)
    ok = ~np.isnan(r)
    x, z = denormalize(r[ok], thetas[ok], limits)
    verts = list(zip(x.tolist(), z.tolist()))
    area, centroid = polygon_area_centroid(verts) if len(verts) >= 3 else (0.0, (float("nan"), float("nan")))
    contour = ThresholdContour(
        p_target=p_target,
        vertices=verts,
        censored_angles=thetas[~ok].tolist(),
        area_mm2=area,
        centroid=centroid,
        angles=thetas[ok].tolist(),
    )
    n_cens = int((~ok).sum())
    if n_cens > MAX_CENSORED_FRACTION * n_angles or len(verts) < 3:
        contour.fully_censored = True
        raise FullyCensored(f"{n_cens}/{n_angles} angles censored", contour)
    return contour
