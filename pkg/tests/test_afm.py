"""Learner-model fitting: predictor, penalized MLE, rolling windows, mastery."""

from __future__ import annotations

import math

import numpy as np
import pytest

from engagecast.afm import (
    AfmConfig,
    AfmParams,
    NoGradedEvents,
    QMatrix,
    UnknownSkill,
    UnknownStudent,
    afm_features,
    export_params,
    fit_afm,
    import_params,
    mastery_sweep,
    opportunity_counts_by_week,
    penalized_gradient,
    predict_correct,
    rolling_refit,
)
from engagecast.ingest import Outcome
from engagecast.weeks import WeekId

from .generators import event, sample_afm_events
from .oracles import logistic

W1 = WeekId(2011, 1)


def _params(theta=0.0, beta=0.0, gamma=0.0, student="s", kc="kc0"):
    return AfmParams(
        theta={student: theta}, beta={kc: beta}, gamma={kc: gamma}, window=(W1, W1)
    )


# --- predict_correct -------------------------------------------------------

def test_predict_all_zero_is_half():
    assert predict_correct(_params(), "s", ["kc0"], {"kc0": 0}) == pytest.approx(0.5)


def test_predict_scalar_logistic_value():
    # theta=1.0, beta=0.5, gamma=0.1, T=5 -> logit^-1(2.0)
    p = predict_correct(_params(1.0, 0.5, 0.1), "s", ["kc0"], {"kc0": 5})
    assert p == pytest.approx(logistic(2.0), abs=1e-9)
    assert p == pytest.approx(0.88080, abs=5e-6)


def test_predict_two_kcs_additivity():
    params = AfmParams(
        theta={"s": 0.3},
        beta={"a": 0.4, "b": -0.9},
        gamma={"a": 0.0, "b": 0.0},
        window=(W1, W1),
    )
    combined = predict_correct(params, "s", ["a", "b"], {"a": 2, "b": 7})
    merged = _params(0.3, 0.4 + -0.9, 0.0, kc="ab")
    assert combined == pytest.approx(
        predict_correct(merged, "s", ["ab"], {"ab": 0}), abs=1e-12
    )


def test_predict_strict_unknowns_raise_and_lenient_defaults():
    params = _params(1.0)
    with pytest.raises(UnknownStudent):
        predict_correct(params, "ghost", ["kc0"], {"kc0": 0})
    with pytest.raises(UnknownSkill):
        predict_correct(params, "s", ["nope"], {"nope": 0})
    assert predict_correct(params, "ghost", ["kc0"], {"kc0": 0}, strict=False) == (
        pytest.approx(0.5)
    )


def test_predict_monotone_in_theta_and_opportunities():
    thetas = np.linspace(-2, 2, 9)
    probs = [
        predict_correct(_params(t, 0.2, 0.05), "s", ["kc0"], {"kc0": 3}) for t in thetas
    ]
    assert all(b > a for a, b in zip(probs, probs[1:]))
    ts = range(0, 10)
    probs_t = [
        predict_correct(_params(0.1, -0.3, 0.07), "s", ["kc0"], {"kc0": t}) for t in ts
    ]
    assert all(b >= a for a, b in zip(probs_t, probs_t[1:]))


# --- gradient oracle -------------------------------------------------------

def _finite_diff_grad(events, qmatrix, config, theta, beta, gamma, h=1e-5):
    packs = [theta.copy(), beta.copy(), gamma.copy()]
    grads = []
    for which in range(3):
        g = np.zeros_like(packs[which])
        for j in range(len(g)):
            plus = [p.copy() for p in packs]
            minus = [p.copy() for p in packs]
            plus[which][j] += h
            minus[which][j] -= h
            f_plus, *_ = penalized_gradient(events, qmatrix, config, *plus)
            f_minus, *_ = penalized_gradient(events, qmatrix, config, *minus)
            g[j] = (f_plus - f_minus) / (2 * h)
        grads.append(g)
    return grads


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(42)
    for trial in range(8):
        n_students = int(rng.integers(2, 10))
        n_skills = int(rng.integers(1, 5))
        events, _ = sample_afm_events(n_students, n_skills, 12, seed=100 + trial)
        qm = QMatrix.from_events(events)
        config = AfmConfig()
        theta = rng.normal(0, 0.5, n_students)
        beta = rng.normal(0, 0.5, n_skills)
        gamma = rng.uniform(0.01, 0.3, n_skills)
        _, g_t, g_b, g_g = penalized_gradient(events, qm, config, theta, beta, gamma)
        fd_t, fd_b, fd_g = _finite_diff_grad(events, qm, config, theta, beta, gamma)
        for analytic, numeric in ((g_t, fd_t), (g_b, fd_b), (g_g, fd_g)):
            denom = np.maximum(np.abs(numeric), 1e-8)
            assert np.max(np.abs(analytic - numeric) / denom) < 1e-4


# --- fit_afm ---------------------------------------------------------------

def test_fit_all_correct_reaches_stationarity():
    events = [
        event("s", 0, ("kc0",), Outcome.CORRECT, minute=i, problem=f"p{i}")
        for i in range(30)
    ]
    config = AfmConfig(tolerance=1e-12, max_iters=2000)
    fit = fit_afm(events, config=config)
    qm = QMatrix.from_events(events)
    theta = np.array([fit.theta["s"]])
    beta = np.array([fit.beta["kc0"]])
    gamma = np.array([fit.gamma["kc0"]])
    _, g_t, g_b, g_g = penalized_gradient(events, qm, config, theta, beta, gamma)
    assert theta[0] > 0
    assert abs(g_t[0]) < 1e-4 and abs(g_b[0]) < 1e-4
    # Projected stationarity for the constrained coordinate.
    assert abs(g_g[0]) < 1e-4 or (gamma[0] == 0.0 and g_g[0] <= 0)


def test_fit_recovers_known_parameters_small():
    events, truth = sample_afm_events(60, 6, 80, seed=5)
    fit = fit_afm(events, config=AfmConfig(max_iters=800))
    est = np.array([fit.theta[s] for s in sorted(truth["theta"])])
    true = np.array([truth["theta"][s] for s in sorted(truth["theta"])])
    r = np.corrcoef(est, true)[0, 1]
    assert r > 0.8


def test_fit_duplication_equals_halved_penalty():
    # Equal-weight duplication of every design row (weight 2) must match a
    # single-copy fit with all penalties halved: 2*LL - P = 2*(LL - P/2).
    events, _ = sample_afm_events(8, 3, 25, seed=9)
    config = AfmConfig(tolerance=1e-12, max_iters=4000)
    half = AfmConfig(
        l2_theta=config.l2_theta / 2,
        l2_beta=config.l2_beta / 2,
        l2_gamma=config.l2_gamma / 2,
        tolerance=1e-12,
        max_iters=4000,
    )
    doubled = fit_afm(events, config=config, sample_weight=[2.0] * len(events))
    halved = fit_afm(events, config=half)
    for key in doubled.theta:
        assert doubled.theta[key] == pytest.approx(halved.theta[key], abs=2e-4)
    for key in doubled.beta:
        assert doubled.beta[key] == pytest.approx(halved.beta[key], abs=2e-4)
        assert doubled.gamma[key] == pytest.approx(halved.gamma[key], abs=2e-4)


def test_fit_objective_monotone_in_iteration_budget():
    events, _ = sample_afm_events(10, 3, 20, seed=11)
    objectives = [
        fit_afm(events, config=AfmConfig(max_iters=k)).objective
        for k in (1, 2, 4, 8, 16, 32)
    ]
    assert all(b >= a - 1e-12 for a, b in zip(objectives, objectives[1:]))


def test_fit_deterministic_bitwise():
    events, _ = sample_afm_events(12, 4, 15, seed=3)
    a = fit_afm(events, seed=7)
    b = fit_afm(events, seed=7)
    assert a.theta == b.theta and a.beta == b.beta and a.gamma == b.gamma


def test_fit_gamma_nonnegative():
    # Declining success with practice would push gamma negative; the
    # projection must pin it at zero.
    events = []
    for i in range(40):
        outcome = Outcome.CORRECT if i < 10 else Outcome.INCORRECT
        events.append(event("s", 0, ("kc0",), outcome, minute=i, problem=f"p{i}"))
    fit = fit_afm(events)
    assert fit.gamma["kc0"] == 0.0


def test_fit_requires_graded_events():
    with pytest.raises(NoGradedEvents):
        fit_afm([event("s", 0, kcs=())])


# --- rolling_refit ---------------------------------------------------------

def test_rolling_three_week_coldstart_window():
    events = [event("s", w, minute=i, problem=f"p{w}{i}") for w in range(3) for i in range(4)]
    fits = rolling_refit(events, AfmConfig(window_weeks=5))
    w3 = WeekId(2011, 3)
    assert fits[w3].window == (WeekId(2011, 1), w3)
    assert fits[w3].n_events == 12


def test_rolling_week10_ignores_week5():
    base = [
        event("s", w, minute=i, problem=f"p{w}{i}")
        for w in range(10)
        for i in range(3)
    ]
    variant = [
        ev if ev.week != WeekId(2011, 5) else event(
            "s", 4, ("kc0",), Outcome.INCORRECT, minute=99, problem="x"
        )
        for ev in base
    ]
    # Replace week-5 events by different week-5 events instead: build two
    # datasets identical outside week 5.
    week5_a = [event("s", 4, ("kc0",), Outcome.CORRECT, minute=i, problem=f"a{i}") for i in range(3)]
    week5_b = [event("s", 4, ("kc0",), Outcome.INCORRECT, minute=i, problem=f"b{i}") for i in range(9)]
    others = [ev for ev in base if ev.week != WeekId(2011, 5)]
    fits_a = rolling_refit(others + week5_a, AfmConfig(window_weeks=5))
    fits_b = rolling_refit(others + week5_b, AfmConfig(window_weeks=5))
    w10 = WeekId(2011, 10)
    assert fits_a[w10].theta == fits_b[w10].theta
    assert fits_a[w10].beta == fits_b[w10].beta
    del variant


def test_rolling_stationary_drift_below_recovery_noise():
    events, truth = sample_afm_events(30, 4, 60, seed=21, n_weeks=8)
    fits = rolling_refit(events, AfmConfig(window_weeks=5))
    weeks = sorted(fits)
    students = sorted(truth["theta"])
    est = np.array(
        [[fits[w].theta_of(s) for s in students] for w in weeks[4:]]
    )
    recovery_noise = np.std(
        est[-1] - np.array([truth["theta"][s] for s in students])
    )
    drift = np.mean(np.std(np.diff(est, axis=0), axis=1))
    assert drift < 2.0 * recovery_noise


# --- mastery_sweep ---------------------------------------------------------

def _fixed_fits(events, theta, beta, gamma):
    weeks = sorted({ev.week for ev in events})
    params = AfmParams(theta=theta, beta=beta, gamma=gamma, window=(weeks[0], weeks[-1]))
    from engagecast.weeks import week_range

    return {w: params for w in week_range(weeks[0], weeks[-1])}


def test_mastery_never_at_half_probability():
    events = [event("s", w, ("kc0",), minute=w) for w in range(5)]
    fits = _fixed_fits(events, {"s": 0.0}, {"kc0": 0.0}, {"kc0": 0.0})
    assert mastery_sweep(events, fits=fits) == []


def test_mastery_first_week_when_logit_3():
    events = [event("s", 2, ("kc0",), minute=0)]
    fits = _fixed_fits(events, {"s": 1.5}, {"kc0": 1.5}, {"kc0": 0.0})
    out = mastery_sweep(events, fits=fits)
    assert out == [("s", "kc0", WeekId(2011, 3))]
    assert logistic(3.0) > 0.95  # sanity on the threshold arithmetic


def test_mastery_extreme_threshold_empty():
    events, _ = sample_afm_events(5, 2, 20, seed=2)
    out = mastery_sweep(events, config=AfmConfig(mastery_threshold=0.999999))
    assert out == []


def test_mastery_unique_pairs_and_after_first_practice():
    events, _ = sample_afm_events(10, 3, 30, seed=13)
    out = mastery_sweep(events)
    pairs = [(s, kc) for s, kc, _ in out]
    assert len(pairs) == len(set(pairs))
    first_practice = {}
    from engagecast.afm import event_sort_key

    for ev in sorted(events, key=event_sort_key):
        for kc in ev.kc_ids:
            first_practice.setdefault((ev.student_id, kc), ev.week)
    for s, kc, w in out:
        assert w >= first_practice[(s, kc)]


# --- opportunity counting --------------------------------------------------

def test_opportunity_counts_cumulative_by_week():
    events = [
        event("s", 0, ("kc0",), minute=0, problem="p0"),
        event("s", 0, ("kc0",), minute=1, problem="p1"),
        event("s", 2, ("kc0",), minute=0, problem="p2"),
    ]
    counts = opportunity_counts_by_week(events)
    assert counts[WeekId(2011, 1)][("s", "kc0")] == 2
    assert counts[WeekId(2011, 2)][("s", "kc0")] == 2  # inactive week carries forward
    assert counts[WeekId(2011, 3)][("s", "kc0")] == 3


# --- afm_features ----------------------------------------------------------

def test_week_difficulty_single_skill():
    events = [event("s", 0, ("kc0",), minute=0)]
    fits = _fixed_fits(events, {"s": 0.2}, {"kc0": -1.0}, {"kc0": 0.0})
    state = afm_features(fits, events, WeekId(2011, 1))["s"]
    assert state.week_difficulty == pytest.approx(1.0)
    assert state.ability == pytest.approx(0.2)


def test_week_difficulty_weighted_mean():
    events = [
        event("s", 0, ("a",), minute=0, problem="p1"),
        event("s", 0, ("b",), minute=1, problem="p2"),
        event("s", 0, ("b",), minute=2, problem="p3"),
        event("s", 0, ("b",), minute=3, problem="p4"),
    ]
    fits = _fixed_fits(events, {"s": 0.0}, {"a": 0.0, "b": 2.0}, {"a": 0.0, "b": 0.0})
    state = afm_features(fits, events, WeekId(2011, 1))["s"]
    # T = (1, 3); -(0*1 + 2*3)/4 = -1.5
    assert state.week_difficulty == pytest.approx(-1.5)


def test_learning_rate_zero_gamma():
    events = [event("s", 0, ("a",))]
    fits = _fixed_fits(events, {"s": 0.0}, {"a": 0.0}, {"a": 0.0})
    assert afm_features(fits, events, WeekId(2011, 1))["s"].learning_rate == 0.0


def test_learning_rate_weighted_vs_cumulative():
    events = [
        event("s", 0, ("a",), minute=0, problem="p1"),
        event("s", 0, ("a",), minute=1, problem="p2"),
        event("s", 0, ("b",), minute=2, problem="p3"),
    ]
    fits = _fixed_fits(events, {"s": 0.0}, {"a": 0.0, "b": 0.0}, {"a": 0.1, "b": 0.4})
    weighted = afm_features(fits, events, WeekId(2011, 1))["s"].learning_rate
    # T = (2, 1): (0.1*2 + 0.4*1)/3
    assert weighted == pytest.approx(0.2)
    cumulative = afm_features(
        fits, events, WeekId(2011, 1), AfmConfig(learning_rate_form="cumulative")
    )["s"].learning_rate
    assert cumulative == pytest.approx(0.6)


def test_inactive_student_absent_from_features():
    events = [event("s", 0, ("a",)), event("other", 1, ("a",))]
    fits = rolling_refit(events)
    feats = afm_features(fits, events, WeekId(2011, 2))
    assert "s" not in feats and "other" in feats


# --- parameter export ------------------------------------------------------

def test_params_json_roundtrip():
    events, _ = sample_afm_events(5, 2, 10, seed=1)
    fits = rolling_refit(events)
    data = export_params(fits)
    back = import_params(data)
    week = sorted(fits)[0]
    assert back[week].theta == fits[week].theta
    assert back[week].window == fits[week].window
