import math

import numpy as np
import pytest

from conftest import median_radius
from wlr.errors import ObserverSpecError
from wlr.harness import (
    ExperimentConfig,
    ExperimentLog,
    SimulatedObserver,
    acquire_next,
    candidate_lattice,
    init_design,
    lattice_projection,
    run_experiment,
    straddle_scores,
)
from wlr.threshold import Limits, TrialRecord, fit_gp, monotone_project
from wlr.threshold.projection import project_moments, to_polar

R_STAR = 8.0 + 2.0 * 0.6744897501960817


# --- observer ----------------------------------------------------------------


def test_observer_threshold_radius():
    assert SimulatedObserver(8, 2).threshold_radius_mm() == pytest.approx(R_STAR, abs=1e-12)


def test_observer_probability():
    obs = SimulatedObserver(8, 2)
    assert obs.p_true(R_STAR, 0.0) == pytest.approx(0.75, abs=1e-12)
    assert obs.p_true(0.0, 0.0) < 1e-4
    assert SimulatedObserver(8, 2, chance_floor=True).p_true(0.0, 0.0) == 0.5


def test_elliptical_observer_scales_axes():
    obs = SimulatedObserver(8, 2, x_scale=1.0, z_scale=2.0)
    assert obs.p_true(0.0, 2 * R_STAR) == pytest.approx(0.75, abs=1e-12)
    assert obs.kind == "elliptical"


def test_parse_observer():
    obs = SimulatedObserver.parse("circular:a=8,s=2,lapse=0.05", seed=3)
    assert (obs.a_mm, obs.s_mm, obs.lapse, obs.seed) == (8.0, 2.0, 0.05, 3)
    ell = SimulatedObserver.parse("elliptical:a=6,s=1,kx=1.5,kz=0.5")
    assert (ell.x_scale, ell.z_scale) == (1.5, 0.5)


@pytest.mark.parametrize("spec", ["circular:a=8,s=2,lapse=0.5", "square:a=1", "circular:a=8,kx=2", "circular:a=x",
                                  "circular:s=-1"])
def test_parse_rejects(spec):
    with pytest.raises(ObserverSpecError):
        SimulatedObserver.parse(spec)


# --- design and acquisition ----------------------------------------------------


def test_init_design_layout():
    pts = init_design(ExperimentConfig())
    assert len(pts) == 25
    r, th = to_polar(*(np.array(pts) / 15.0).T)
    np.testing.assert_allclose(r[:8], 0.9, atol=1e-12)
    np.testing.assert_allclose(np.sort(th[:8]), np.arange(8) * math.pi / 4, atol=1e-12)
    assert (np.abs(np.array(pts[8:])) <= 0.4 * 15.0 + 1e-12).all()
    assert init_design(ExperimentConfig()) == pts


def test_init_design_size_range():
    assert len(init_design(ExperimentConfig(n_init=32))) == 32
    with pytest.raises(ValueError):
        ExperimentConfig(n_init=24)


def test_zero_sd_candidate_never_beats_uncertain_one():
    s = straddle_scores(np.array([1.5, 1.5, 0.6744897501960817 - 0.8]), np.array([0.0, 0.2, 0.2]))
    assert s[0] < 0
    assert s[0] < s[1] and s[0] < s[2]


def test_ties_go_to_lowest_index():
    class Flat:
        limits = Limits()

        def predict(self, X):
            return np.zeros(len(X)), np.ones(len(X))

    x, z = acquire_next(Flat(), ExperimentConfig())
    assert (x, z) == (-15.0, -15.0)


def test_lattice_projection_matches_discrete_rule():
    rng = np.random.default_rng(1)
    trials = [TrialRecord(x, z, bool(c)) for x, z, c in zip(rng.uniform(-15, 15, 30), rng.uniform(-15, 15, 30),
                                                         rng.random(30) < 0.7)]
    m = fit_gp(trials, n_restarts=0)
    mu_hat, sd_hat = lattice_projection(m)
    c = candidate_lattice()
    r, th = to_polar(c[:, 0], c[:, 1])
    frac = np.arange(21) / 20
    rr, tt = r[:, None] * frac, np.broadcast_to(th[:, None], (len(r), 21))
    mu, var = m.predict(np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1).reshape(-1, 2))
    want_mu, want_sd = project_moments(mu.reshape(rr.shape), np.sqrt(np.maximum(var, 0)).reshape(rr.shape))
    np.testing.assert_allclose(mu_hat, want_mu, atol=1e-12)
    np.testing.assert_allclose(sd_hat, want_sd, atol=1e-12)
    np.testing.assert_allclose(sd_hat, monotone_project(m, r, th).sd_hat, atol=1e-12)


def test_adaptive_samples_concentrate_in_threshold_band(circular_runs):
    fracs = []
    for res in circular_runs:
        r = np.array([math.hypot(t.x_err_mm, t.z_err_mm) for t in res.log.trials[60:]])
        fracs.append(np.mean((r >= 0.7 * R_STAR) & (r <= 1.3 * R_STAR)))
    assert np.mean(fracs) >= 0.6


# --- experiment loop ---------------------------------------------------------


def test_log_length_and_phase_order(circular_runs):
    res = circular_runs[0]
    assert len(res.log) == 110
    assert res.log.phases[:25] == ["init"] * 25
    assert set(res.log.phases[25:]) == {"adaptive"}


def test_log_rejects_late_init():
    log = ExperimentLog()
    log.append(TrialRecord(0, 0, True), "adaptive")
    with pytest.raises(ValueError):
        log.append(TrialRecord(0, 0, True), "init")


def test_replay_is_bit_identical():
    cfg = ExperimentConfig(budget=32, seed=4)
    a = run_experiment(SimulatedObserver(8, 2, seed=4), cfg)
    b = run_experiment(SimulatedObserver(8, 2, seed=4), cfg)
    assert a.log.trials == b.log.trials
    assert a.contour.to_json() == b.contour.to_json()


def test_different_seeds_differ():
    a = run_experiment(SimulatedObserver(8, 2, seed=1), ExperimentConfig(budget=30, seed=1))
    b = run_experiment(SimulatedObserver(8, 2, seed=2), ExperimentConfig(budget=30, seed=2))
    assert [t.correct for t in a.log.trials] != [t.correct for t in b.log.trials]


def test_unreachable_threshold_is_flagged_not_raised():
    res = run_experiment(SimulatedObserver(30, 2, seed=0), ExperimentConfig(budget=40))
    assert res.contour.fully_censored
    assert len(res.log) == 40


def test_lapse_robustness(circular_runs, circular_lapse_runs):
    base = median_radius(circular_runs)
    lapsed = median_radius(circular_lapse_runs)
    assert abs(lapsed - base) / base < 0.15
