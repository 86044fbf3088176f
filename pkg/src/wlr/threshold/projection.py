"""Polar normalisation and the radial monotone projection of the posterior."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .gp import Limits

DEFAULT_M = 20
# node spacing (normalised radius) of the running-supremum envelope
ENVELOPE_STEP = 0.005
GOLDEN_ITERS = 64


def to_polar(xn, zn):
    """Polar form of normalised coordinates; theta in [0, 2pi), 0 at the origin."""
    xn = np.asarray(xn, dtype=float)
    zn = np.asarray(zn, dtype=float)
    r = np.hypot(xn, zn)
    theta = np.mod(np.arctan2(zn, xn), 2.0 * np.pi)
    return r, theta


def normalize(x_mm, z_mm, limits: Limits):
    """Map mm displacements to normalised polar ``(r, theta)``."""
    return to_polar(np.asarray(x_mm, float) / limits.lx, np.asarray(z_mm, float) / limits.lz)


def denormalize(r, theta, limits: Limits):
    """Inverse of :func:`normalize`, returning mm ``(x, z)``."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return r * np.cos(theta) * limits.lx, r * np.sin(theta) * limits.lz


def r_max(theta):
    """Radius at which a ray from the origin leaves the unit search box."""
    theta = np.asarray(theta, dtype=float)
    return 1.0 / np.maximum(np.abs(np.cos(theta)), np.abs(np.sin(theta)))


@dataclass(frozen=True)
class ProjectedPosterior:
    mu_hat: np.ndarray | float
    sd_hat: np.ndarray | float
    mu: np.ndarray | float  # unprojected posterior at the query itself
    sd: np.ndarray | float
    m: int = DEFAULT_M


def project_moments(mu_seq, sd_seq):
    """Project posterior moments sampled along a ray (last axis, origin first).

    Returns the running-max mean and the width of the projected +/-2 sd band
    divided by four.
    """
    mu_seq = np.asarray(mu_seq, dtype=float)
    sd_seq = np.asarray(sd_seq, dtype=float)
    mu_hat = mu_seq.max(axis=-1)
    lower = (mu_seq - 2.0 * sd_seq).max(axis=-1)
    upper = (mu_seq + 2.0 * sd_seq).max(axis=-1)
    return mu_hat, (upper - lower) / 4.0


class RayEnvelope:
    """Running supremum of the posterior mean along rays from the origin.

    The mean is sampled at fixed nodes on each ray and every discrete local
    maximum is refined by golden-section search, so ``sup_{t <= r} mu(t)``
    is recovered to rounding error for surfaces that are smooth on the node
    spacing. Because the nodes do not move with the query radius, the
    result is non-decreasing in r and never below ``mu(r)``.
    """

    def __init__(self, model, theta, r_hi, step: float = ENVELOPE_STEP):
        self.model = model
        self.theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r_hi = np.broadcast_to(np.asarray(r_hi, dtype=float), self.theta.shape)
        k = max(2, int(math.ceil(float(r_hi.max(initial=0.0)) / step)))
        self.h = r_hi / k
        nodes = self.h[:, None] * np.arange(k + 1)
        mu = self._mu(nodes, self.theta[:, None])
        self.node_max = np.maximum.accumulate(mu, axis=1)

        # discrete local maxima, ends included; plateaus count once
        left = np.concatenate([np.full((len(mu), 1), -np.inf), mu[:, :-1]], axis=1)
        right = np.concatenate([mu[:, 1:], np.full((len(mu), 1), -np.inf)], axis=1)
        ray, idx = np.nonzero((mu > left) & (mu >= right))
        lo = nodes[ray, np.maximum(idx - 1, 0)]
        hi = nodes[ray, np.minimum(idx + 1, k)]
        t, val = self._golden_max(lo, hi, self.theta[ray])
        better = mu[ray, idx] >= val
        t = np.where(better, nodes[ray, idx], t)
        val = np.where(better, mu[ray, idx], val)

        # per-ray peak table sorted by location, padded, with running max
        counts = np.bincount(ray, minlength=len(mu))
        width = max(1, int(counts.max(initial=0)))
        self.peak_t = np.full((len(mu), width), np.inf)
        peak_v = np.full((len(mu), width), -np.inf)
        order = np.lexsort((t, ray))
        ray, t, val = ray[order], t[order], val[order]
        slot = np.arange(len(ray)) - np.repeat(np.cumsum(counts) - counts, counts)
        self.peak_t[ray, slot] = t
        peak_v[ray, slot] = val
        self.peak_max = np.maximum.accumulate(peak_v, axis=1)

    def _mu(self, r, theta):
        r, theta = np.broadcast_arrays(r, theta)
        pts = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=-1).reshape(-1, 2)
        return self.model.predict(pts)[0].reshape(r.shape)

    def _golden_max(self, a, b, theta):
        """Vectorised golden-section maximisation of the mean on ``[a, b]``."""
        g = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = b - g * (b - a), a + g * (b - a)
        fc, fd = self._mu(c, theta), self._mu(d, theta)
        for _ in range(GOLDEN_ITERS):
            left = fc >= fd
            a, b = np.where(left, a, c), np.where(left, d, b)
            new_c = np.where(left, b - g * (b - a), d)
            new_d = np.where(left, c, a + g * (b - a))
            f_new = self._mu(np.where(left, new_c, new_d), theta)
            fc, fd = np.where(left, f_new, fd), np.where(left, fc, f_new)
            c, d = new_c, new_d
        return np.where(fc >= fd, c, d), np.maximum(fc, fd)

    def sup(self, r, mu_r, rays=None):
        """``sup_{t <= r} mu(t)`` given ``mu_r = mu(r)``.

        ``rays`` indexes the envelope's angles for each query (default: one
        query per ray, in order).
        """
        r = np.asarray(r, dtype=float)
        rays = np.arange(len(self.theta)) if rays is None else np.asarray(rays)
        h = self.h[rays]
        k = np.floor(r / np.where(h > 0, h, 1.0) + 1e-12).astype(int)
        k = np.clip(k, 0, self.node_max.shape[1] - 1)
        out = np.maximum(self.node_max[rays, k], mu_r)
        n_peaks = (self.peak_t[rays] <= r[:, None]).sum(axis=1)
        has = n_peaks > 0
        out[has] = np.maximum(out[has], self.peak_max[rays[has], n_peaks[has] - 1])
        return out


def monotone_project(model, r, theta, m: int = DEFAULT_M) -> ProjectedPosterior:
    """Projected posterior at normalised polar ``(r, theta)``; broadcasts.

    ``model`` needs only a ``predict(X) -> (mu, var)`` method over normalised
    Cartesian points. The spread uses the discrete ``m``-point rule; the
    mean is the running supremum along the ray (see :class:`RayEnvelope`).
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    if np.any(r < 0):
        raise ValueError("r must be non-negative")
    frac = np.arange(m + 1) / m
    rr = r[..., None] * frac
    th = np.broadcast_to(theta[..., None], rr.shape)
    pts = np.stack([rr * np.cos(th), rr * np.sin(th)], axis=-1).reshape(-1, 2)
    mu, var = model.predict(pts)
    mu = mu.reshape(rr.shape)
    sd = np.sqrt(np.maximum(var, 0.0)).reshape(rr.shape)
    _, sd_hat = project_moments(mu, sd)

    # one envelope per distinct angle, reaching the largest radius asked for
    flat_r, flat_t = r.ravel(), theta.ravel()
    uniq, inv = np.unique(flat_t, return_inverse=True)
    r_hi = np.zeros(len(uniq))
    np.maximum.at(r_hi, inv, flat_r)
    env = RayEnvelope(model, uniq, r_hi)
    mu_hat = env.sup(flat_r, mu[..., -1].ravel(), inv)
    mu_hat = mu_hat.reshape(r.shape)
    if r.ndim == 0:
        return ProjectedPosterior(float(mu_hat), float(sd_hat), float(mu[-1]), float(sd[-1]), m)
    return ProjectedPosterior(mu_hat, sd_hat, mu[..., -1], sd[..., -1], m)


def detect_prob(proj: ProjectedPosterior, marginalize: bool = False):
    """Detection probability from a projected posterior.

    The default is the plug-in ``Phi(mu_hat)``, which inherits the monotonicity
    of ``mu_hat`` in r. ``marginalize=True`` gives the probit predictive mean
    ``Phi(mu_hat / sqrt(1 + sd_hat^2))``; that form is not monotone in r
    because ``sd_hat`` is not.
    """
    mu = np.asarray(proj.mu_hat, dtype=float)
    if marginalize:
        mu = mu / np.sqrt(1.0 + np.asarray(proj.sd_hat, dtype=float) ** 2)
    p = ndtr(mu)
    return float(p) if p.ndim == 0 else p
