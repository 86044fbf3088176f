import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from wlr.errors import DegenerateVariance, FullyCensored
from wlr.threshold import (
    Limits,
    ProjectedPosterior,
    TrialRecord,
    denormalize,
    detect_prob,
    extract_contour,
    fit_gp,
    fit_gp_arrays,
    monotone_project,
    normalize,
    paired_t_test,
    polygon_area_centroid,
    project_moments,
    r_max,
    threshold_radius,
)
from wlr.threshold.gp import neg_log_marginal, se_kernel

Z75 = 0.6744897501960817


class RadialSurface:
    """Stand-in posterior with mean and sd given as functions of r."""

    def __init__(self, mu, sd=lambda r: np.full_like(r, 0.3), limits=Limits()):
        self.mu, self.sd, self.limits = mu, sd, limits

    def predict(self, X):
        X = np.atleast_2d(X)
        r = np.hypot(X[:, 0], X[:, 1])
        return self.mu(r), self.sd(r) ** 2


class BumpSurface:
    """Random smooth non-monotone posterior for property tests."""

    def __init__(self, rng):
        self.c = rng.uniform(-1.2, 1.2, size=(5, 2))
        self.w = rng.normal(scale=2.0, size=5)
        self.s = rng.uniform(0.1, 0.6, size=5)
        self.v = rng.uniform(0.05, 2.0)
        self.limits = Limits()

    def predict(self, X):
        X = np.atleast_2d(X)
        d2 = ((X[:, None, :] - self.c[None]) ** 2).sum(-1)
        k = np.exp(-0.5 * d2 / self.s**2)
        return k @ self.w, self.v * (1.0 - 0.9 * k.max(1))


# --- normalisation -------------------------------------------------------------


@pytest.mark.parametrize("xz,expected", [((15, 0), (1, 0)), ((0, 0), (0, 0)), ((-15, 15), (math.sqrt(2), 3 * math.pi / 4))])
def test_normalize(xz, expected):
    r, th = normalize(*xz, Limits(15, 15))
    assert (float(r), float(th)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(x=st.floats(-60, 60), z=st.floats(-60, 60), lx=st.floats(1, 100), lz=st.floats(1, 100))
def test_normalize_round_trip(x, z, lx, lz):
    lim = Limits(lx, lz)
    xb, zb = denormalize(*normalize(x, z, lim), lim)
    assert float(xb) == pytest.approx(x, abs=1e-9)
    assert float(zb) == pytest.approx(z, abs=1e-9)


def test_r_max_box():
    assert r_max(0.0) == pytest.approx(1.0)
    assert r_max(math.pi / 4) == pytest.approx(math.sqrt(2))


# --- GP fit ------------------------------------------------------------------


def test_prior_without_trials():
    m = fit_gp([])
    mu, var = m.predict([[0.3, 0.2]])
    assert mu[0] == 0.0 and var[0] == m.variance
    assert detect_prob(monotone_project(m, 0.5, 1.0)) == 0.5


def test_all_correct_far_gives_positive_mean():
    trials = [TrialRecord(15 * math.cos(a), 15 * math.sin(a), True) for a in np.linspace(0, 2 * np.pi, 12, endpoint=False)]
    m = fit_gp(trials)
    mu, _ = m.predict(np.array([[1.0, 0.0], [0.0, -1.0]]))
    assert (mu > 0).all()


def test_dense_synthetic_recovers_midpoint():
    """Radial profile of a 500-trial fit to p(r) = Phi((r - 0.5) / 0.1).

    A single angle is too noisy (a 0.1 band in p is 0.025 in r), so the
    fitted probability is averaged over angles and the median over seeds
    is checked.
    """
    thetas = np.linspace(0, 2 * np.pi, 32, endpoint=False)
    means = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n = 500
        r = rng.uniform(0, 1, n)
        th = rng.uniform(0, 2 * np.pi, n)
        X = np.c_[r * np.cos(th), r * np.sin(th)]
        y = np.where(rng.random(n) < ndtr((r - 0.5) / 0.1), 1.0, -1.0)
        m = fit_gp_arrays(X, y, n_restarts=1)
        means.append(detect_prob(monotone_project(m, 0.5, thetas)).mean())
    assert abs(np.median(means) - 0.5) <= 0.1


def test_marginal_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.uniform(-1, 1, (30, 2))
    y = np.where(rng.random(30) < ndtr(3 * np.hypot(*X.T) - 1.5), 1.0, -1.0)
    theta = np.log([0.4, 0.7, 2.0])
    _, g, _ = neg_log_marginal(theta, X, y)
    h = 1e-5
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (neg_log_marginal(theta + e, X, y)[0] - neg_log_marginal(theta - e, X, y)[0]) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_fit_is_order_independent_and_deterministic():
    rng = np.random.default_rng(5)
    trials = [TrialRecord(x, z, bool(c)) for x, z, c in zip(rng.uniform(-15, 15, 40), rng.uniform(-15, 15, 40),
                                                         rng.random(40) < 0.6)]
    a = fit_gp(trials, seed=2)
    b = fit_gp(trials[::-1], seed=2)
    q = np.array([[0.1, 0.2], [-0.5, 0.7]])
    np.testing.assert_allclose(a.predict(q)[0], b.predict(q)[0], rtol=1e-9, atol=1e-12)
    assert a.variance == b.variance


def test_posterior_variance_non_negative():
    rng = np.random.default_rng(9)
    X = rng.uniform(-1, 1, (25, 2))
    m = fit_gp_arrays(X, np.where(rng.random(25) < 0.5, 1.0, -1.0))
    _, var = m.predict(rng.uniform(-1.5, 1.5, (200, 2)))
    assert (var >= 0).all() and np.isfinite(var).all()


def test_se_kernel_diagonal():
    X = np.random.default_rng(0).normal(size=(4, 2))
    np.testing.assert_allclose(np.diag(se_kernel(X, X, (0.3, 0.5), 2.0)), 2.0)


def test_non_finite_trial_rejected():
    with pytest.raises(ValueError):
        TrialRecord(float("nan"), 0.0, True)


# --- monotone projection -------------------------------------------------------


def test_projection_identity_on_monotone_constant_sd():
    s = RadialSurface(lambda r: 2 * r - 0.5, lambda r: np.full_like(r, 1.0))
    p = monotone_project(s, 0.8, 0.3)
    assert p.mu_hat == pytest.approx(p.mu, abs=1e-12)
    assert p.sd_hat == pytest.approx(1.0, abs=1e-12)


def test_project_moments_examples():
    mu_hat, sd_hat = project_moments([-1.0, 0.5, 0.2], [1.0, 1.0, 1.0])
    assert mu_hat == 0.5 and sd_hat == 1.0


@pytest.mark.parametrize("mu,sd,p", [(0.0, 3.0, 0.5), (Z75, 0.0, 0.75), (40.0, 1.0, 1.0)])
def test_detect_prob_examples(mu, sd, p):
    proj = ProjectedPosterior(mu, sd, mu, sd)
    assert detect_prob(proj) == pytest.approx(p, abs=1e-12)
    assert detect_prob(proj, marginalize=True) == pytest.approx(p, abs=1e-9)


def test_marginalized_prob_shrinks_toward_half():
    proj = ProjectedPosterior(1.0, 2.0, 1.0, 2.0)
    assert detect_prob(proj, marginalize=True) == pytest.approx(ndtr(1 / math.sqrt(5)), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(0, 2 * np.pi), r=st.floats(0, 1.4))
def test_mu_hat_dominates_mu(seed, theta, r):
    p = monotone_project(BumpSurface(np.random.default_rng(seed)), r, theta)
    assert p.mu_hat >= p.mu - 1e-12
    assert p.sd_hat >= 0


@settings(max_examples=200, deadline=None)
@given(
    incs=st.lists(st.floats(0, 3), min_size=4, max_size=4),
    offset=st.floats(-3, 3),
    sd=st.floats(0.01, 2),
    r=st.floats(0, 1.4),
    theta=st.floats(0, 2 * np.pi),
)
def test_projection_idempotent_on_monotone(incs, offset, sd, r, theta):
    """A posterior already monotone in r (constant sd) passes through unchanged."""
    knots = np.linspace(0, 1.5, 5)
    vals = offset + np.concatenate([[0.0], np.cumsum(incs)])
    s = RadialSurface(lambda q: np.interp(q, knots, vals), lambda q: np.full_like(q, sd))
    p = monotone_project(s, r, theta)
    assert p.mu_hat == pytest.approx(p.mu, abs=1e-12)
    assert p.sd_hat == pytest.approx(sd, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), theta=st.floats(0, 2 * np.pi))
def test_detect_prob_non_decreasing_along_ray(seed, theta):
    rs = np.linspace(0.0, 1.4, 400)
    p = detect_prob(monotone_project(BumpSurface(np.random.default_rng(seed)), rs, theta))
    assert np.all(np.diff(p) >= 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_envelope_matches_dense_running_max(seed):
    """Running max over a fine uniform grid is an independent lower bound."""
    s = BumpSurface(np.random.default_rng(seed))
    theta = 0.37 * (seed + 1)
    rs = np.linspace(0.0, 1.2, 200_001)
    mu = s.predict(np.stack([rs * np.cos(theta), rs * np.sin(theta)], axis=1))[0]
    dense = np.maximum.accumulate(mu)
    q = np.linspace(0.0, 1.2, 97)
    got = monotone_project(s, q, theta).mu_hat
    mu_q = s.predict(np.stack([q * np.cos(theta), q * np.sin(theta)], axis=1))[0]
    want = np.maximum(dense[np.searchsorted(rs, q, side="right") - 1], mu_q)
    assert np.all(got >= want - 1e-12)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


# --- thresholds and contours ---------------------------------------------------


def _dense_scan_crossing(model, theta, p):
    rs = np.linspace(0, 1, 100_001)
    probs = detect_prob(monotone_project(model, rs, theta))
    return rs[np.argmax(probs >= p)]


def test_threshold_radius_matches_dense_scan():
    s = RadialSurface(lambda r: Z75 * (r / 0.4) ** 1.5 - 0.0)
    oracle = _dense_scan_crossing(s, 0.7, 0.75)
    assert oracle == pytest.approx(0.4, abs=1e-4)
    assert threshold_radius(s, 0.7, 0.75) == pytest.approx(0.4, abs=1e-3)


def test_flat_surface_is_censored_everywhere():
    s = RadialSurface(lambda r: np.zeros_like(r))
    assert threshold_radius(s, 1.0) is None
    with pytest.raises(FullyCensored) as exc:
        extract_contour(s)
    assert exc.value.contour.fully_censored
    assert len(exc.value.contour.censored_angles) == 64


def test_circle_contour_area():
    a_mm = 9.0
    s = RadialSurface(lambda r: Z75 + 4 * (r - a_mm / 15.0))
    c = extract_contour(s, 0.75, 64, Limits(15, 15))
    expected = 0.5 * 64 * a_mm**2 * math.sin(2 * math.pi / 64)
    assert c.area_mm2 == pytest.approx(expected, rel=1e-3)
    assert c.area_mm2 == pytest.approx(math.pi * a_mm**2, rel=5e-3)
    assert c.centroid == pytest.approx((0.0, 0.0), abs=1e-6)
    assert c.mean_radius_mm == pytest.approx(a_mm, rel=1e-3)


def test_partial_censoring_below_quarter_is_kept():
    # threshold reachable only along the box diagonals
    s = RadialSurface(lambda r: Z75 + 4 * (r - 1.05))
    with pytest.raises(FullyCensored):
        extract_contour(s, n_angles=64)
    s2 = RadialSurface(lambda r: Z75 + 4 * (r - 0.99))
    c = extract_contour(s2, n_angles=64)
    assert not c.fully_censored and not c.censored_angles


def test_unit_square_shoelace():
    area, c = polygon_area_centroid([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert area == 1.0 and c == pytest.approx((0.5, 0.5))


def test_contour_json_round_trip():
    s = RadialSurface(lambda r: Z75 + 4 * (r - 0.5))
    c = extract_contour(s, n_angles=16)
    from wlr.threshold import ThresholdContour

    back = ThresholdContour.from_json(c.to_json())
    assert back.area_mm2 == c.area_mm2 and back.vertices == [tuple(v) for v in c.vertices]


@pytest.mark.parametrize("p", [0.5, 1.0, 0.3])
def test_p_target_bounds(p):
    with pytest.raises(ValueError):
        threshold_radius(RadialSurface(lambda r: r), 0.0, p)


# --- paired t-test -----------------------------------------------------------


def test_t_test_betainc_oracle():
    # p frozen from scipy.special.betainc(df/2, 1/2, df/(df+t^2))
    res = paired_t_test([1, 2, 3], [2, 3, 5])
    assert res.t == pytest.approx(-4.0, abs=1e-12)
    assert res.df == 2
    assert res.p == pytest.approx(0.05719095841793663, abs=1e-12)


def test_t_test_second_oracle():
    a = [410.0, 380, 295, 350, 500, 270]
    b = [300.0, 330, 310, 260, 420, 200]
    res = paired_t_test(a, b)
    assert res.t == pytest.approx(3.6019080768824074, rel=1e-12)
    assert res.p == pytest.approx(0.015512035516958289, rel=1e-9)


def test_t_test_degenerate():
    with pytest.raises(DegenerateVariance):
        paired_t_test([1, 2, 3], [1, 2, 3])


def test_t_test_needs_pairs():
    with pytest.raises(ValueError):
        paired_t_test([1], [2])
