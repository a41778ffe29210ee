"""Evaluation machinery: splits, folds, forecasting loop, statistics."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engagecast.evaluation import (
    BootstrapConfig,
    DegenerateBlocks,
    EmptyInput,
    Forecast,
    SplitSpec,
    TooFewStudents,
    TooFewWeeks,
    ZeroComparator,
    bootstrap_ci,
    cliffs_delta,
    compare_stats,
    delta_pct,
    error_reduction_pct,
    forecast_loop,
    forecast_mae,
    friedman_kendall,
    mae,
    mean_signed_error,
    segment_maes,
    student_split,
    timeseries_cv,
    training_rows,
    weekly_trend,
)
from engagecast.features import build_matrix, to_imputed
from engagecast.predictors import PredictorKind, fit_heuristic, fit_supervised
from engagecast.weeks import WeekId

from . import oracles
from .panels import W0, make_panel


# --- student_split -----------------------------------------------------------

def test_split_cardinality_and_disjoint():
    ids = [f"s{i}" for i in range(10)]
    dev, holdout = student_split(ids, SplitSpec(dev_fraction=0.7, seed=1))
    assert len(dev) == 7 and len(holdout) == 3
    assert not set(dev) & set(holdout)
    assert set(dev) | set(holdout) == set(ids)


def test_split_deterministic_same_seed():
    ids = [f"s{i}" for i in range(25)]
    assert student_split(ids, SplitSpec(seed=9)) == student_split(ids, SplitSpec(seed=9))


def test_split_varies_across_seeds():
    ids = [f"s{i}" for i in range(425)]
    a, _ = student_split(ids, SplitSpec(seed=1))
    b, _ = student_split(ids, SplitSpec(seed=2))
    assert a != b


def test_split_too_few_students():
    with pytest.raises(TooFewStudents):
        student_split(["only"], SplitSpec())


# --- timeseries_cv -------------------------------------------------------------

def test_cv_twelve_weeks_five_folds():
    weeks = [W0.shift(i) for i in range(12)]
    folds = timeseries_cv(weeks, 5)
    assert len(folds) == 5
    train1, val1 = folds[0]
    assert train1 == (W0, W0.shift(1))
    assert val1 == (W0.shift(2), W0.shift(3))
    train5, val5 = folds[4]
    assert len(train5) == 10 and val5 == (W0.shift(10), W0.shift(11))


def test_cv_single_fold_midpoint():
    weeks = [W0.shift(i) for i in range(8)]
    folds = timeseries_cv(weeks, 1)
    assert len(folds) == 1
    train, val = folds[0]
    assert len(train) == 4 and len(val) == 4


def test_cv_validation_strictly_after_training():
    weeks = [W0.shift(i) for i in range(13)]
    for train, val in timeseries_cv(weeks, 4):
        assert max(train) < min(val)


def test_cv_too_few_weeks():
    with pytest.raises(TooFewWeeks):
        timeseries_cv([W0, W0.shift(1)], 5)


# --- forecast_loop --------------------------------------------------------------

def _last_value_model():
    return fit_heuristic(PredictorKind.LAST_VALUE, [1.0], [1.0], target="minutes")


def test_forecast_three_weeks_two_rows():
    panel = make_panel({"s": {"minutes": [10, 20, 30]}})
    out = forecast_loop(_last_value_model(), panel, None, "minutes")
    assert len(out) == 2
    assert [f.week for f in out] == [W0.shift(1), W0.shift(2)]


def test_forecast_last_value_definition():
    panel = make_panel({"s": {"minutes": [10, 20, 30]}})
    out = forecast_loop(_last_value_model(), panel, None, "minutes")
    assert [f.y_pred for f in out] == [10.0, 20.0]
    assert [f.y_true for f in out] == [20.0, 30.0]


def test_forecast_truncation_causality():
    panel = make_panel({"s": {"minutes": [10, 20, 30, 40, 50]}})
    full = forecast_loop(_last_value_model(), panel, None, "minutes")
    cut = [r for r in panel if r.week <= W0.shift(2)]
    truncated = forecast_loop(_last_value_model(), cut, None, "minutes")
    kept = [f for f in full if f.week <= W0.shift(2)]
    assert truncated == kept


def test_forecast_skips_excluded_target_weeks():
    panel = make_panel(
        {"s": {"minutes": [10, 500, 30], "excluded": [False, True, False]}}
    )
    out = forecast_loop(_last_value_model(), panel, None, "minutes")
    assert [str(f.week) for f in out] == [str(W0.shift(2))]


def test_forecast_include_final_horizon():
    panel = make_panel({"s": {"minutes": [10, 20]}})
    out = forecast_loop(_last_value_model(), panel, None, "minutes", include_final=True)
    assert len(out) == 2
    assert out[-1].week == W0.shift(2) and out[-1].y_true is None
    assert out[-1].y_pred == 20.0


def test_forecast_supervised_uses_previous_week_features():
    panel = make_panel({"s": {"minutes": [10, 20, 30, 40]}, "t": {"minutes": [5, 5, 5, 5]}})
    matrix = to_imputed(build_matrix(panel, {}))
    x, y = training_rows(panel, matrix, "minutes")
    assert len(y) == 6  # 3 transitions per student
    model = fit_supervised(
        PredictorKind.OLS, None, x, y, matrix.feature_names, seed=0, target="minutes"
    )
    out = forecast_loop(model, panel, matrix, "minutes")
    assert len(out) == 6
    assert all(np.isfinite(f.y_pred) and f.y_pred >= 0 for f in out)


def test_training_rows_exclude_tukey_rows():
    panel = make_panel(
        {"s": {"minutes": [10, 500, 30, 40], "excluded": [False, True, False, False]}}
    )
    matrix = to_imputed(build_matrix(panel, {}))
    x, y = training_rows(panel, matrix, "minutes")
    # transitions: 1->2 and 2->3 touch the excluded row; only 3->4 survives
    assert len(y) == 1 and y[0] == 40.0


# --- mae / delta_pct -------------------------------------------------------------

def test_mae_perfect_zero():
    assert mae([(1.0, 1.0), (2.0, 2.0)]) == 0.0


def test_mae_symmetric_example():
    assert mae([(0.0, 10.0), (10.0, 0.0)]) == 10.0


def test_mae_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    pairs = [(float(a), float(b)) for a, b in rng.normal(0, 5, (100, 2))]
    assert mae(pairs) == pytest.approx(oracles.mean_absolute_error(pairs), abs=1e-12)


def test_mae_empty_raises():
    with pytest.raises(EmptyInput):
        mae([])


def test_delta_pct_paper_table2_values():
    assert delta_pct(8.05, 10.37) == pytest.approx(-22.4, abs=0.1)
    assert delta_pct(3.51, 5.21) == pytest.approx(-32.6, abs=0.1)


def test_delta_pct_equal_is_zero_and_reduction_sign():
    assert delta_pct(4.0, 4.0) == 0.0
    assert error_reduction_pct(8.0, 10.0) == pytest.approx(20.0)


def test_delta_pct_zero_comparator():
    with pytest.raises(ZeroComparator):
        delta_pct(1.0, 0.0)


# --- bootstrap -------------------------------------------------------------------

def test_bootstrap_constant_diffs_degenerate_ci():
    out = bootstrap_ci([2.5] * 10, BootstrapConfig(replicates=200, seed=1))
    assert out.lower == out.upper == out.point == 2.5


def test_bootstrap_symmetric_diffs_straddle_zero():
    diffs = [3.0, -3.0] * 10
    out = bootstrap_ci(diffs, BootstrapConfig(replicates=500, seed=2))
    assert out.lower < 0 < out.upper


def test_bootstrap_width_scales_inverse_sqrt_n():
    rng = np.random.default_rng(11)
    small = rng.normal(0, 1, 50)
    large = rng.normal(0, 1, 200)
    cfg = BootstrapConfig(replicates=2000, seed=3)
    w_small = (lambda r: r.upper - r.lower)(bootstrap_ci(small, cfg))
    w_large = (lambda r: r.upper - r.lower)(bootstrap_ci(large, cfg))
    ratio = w_small / w_large
    assert 2.0 * 0.8 <= ratio <= 2.0 * 1.2


def test_bootstrap_bitwise_deterministic():
    diffs = list(np.random.default_rng(5).normal(0, 1, 40))
    cfg = BootstrapConfig(replicates=300, seed=7)
    a = bootstrap_ci(diffs, cfg)
    b = bootstrap_ci(diffs, cfg)
    assert (a.lower, a.upper, a.point) == (b.lower, b.upper, b.point)


def test_bootstrap_too_few_students():
    with pytest.raises(TooFewStudents):
        bootstrap_ci([1.0], BootstrapConfig(replicates=10))


# --- weekly_trend -----------------------------------------------------------------

def test_trend_single_student_zero_band():
    fx = [Forecast("s", W0.shift(i), 10.0, 12.0) for i in range(3)]
    out = weekly_trend({"m": fx})
    assert all(rec["truth_std"] == 0.0 for rec in out)


def test_trend_constant_predictor_flat():
    fx = [
        Forecast(s, W0.shift(i), 7.0, float(i))
        for s in ("a", "b")
        for i in range(4)
    ]
    out = weekly_trend({"m": fx})
    assert all(rec["pred_mean"]["m"] == 7.0 for rec in out)


def test_trend_fixture_matches_hand_computation():
    fx_m = [
        Forecast("a", W0, 10.0, 12.0),
        Forecast("b", W0, 20.0, 18.0),
        Forecast("a", W0.shift(1), 11.0, 9.0),
    ]
    fx_n = [
        Forecast("a", W0, 14.0, 12.0),
        Forecast("b", W0, 16.0, 18.0),
        Forecast("a", W0.shift(1), 13.0, 9.0),
    ]
    out = weekly_trend({"m": fx_m, "n": fx_n})
    first = out[0]
    assert first["truth_mean"] == pytest.approx(15.0)
    assert first["truth_std"] == pytest.approx(oracles.population_std([12.0, 18.0]))
    assert first["pred_mean"] == {"m": 15.0, "n": 15.0}
    assert out[1]["pred_mean"] == {"m": 11.0, "n": 13.0}


# --- compare_stats ------------------------------------------------------------------

def test_cliffs_delta_identical_zero():
    assert cliffs_delta([1, 2, 3], [1, 2, 3]) == 0.0


def test_cliffs_delta_disjoint_one():
    assert cliffs_delta([5, 6], [1, 2]) == 1.0


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=25),
    st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=25),
)
def test_cliffs_delta_matches_bruteforce(a, b):
    assert cliffs_delta(a, b) == pytest.approx(oracles.cliffs_delta(a, b), abs=1e-12)


def test_compare_stats_fields_and_null_case():
    rng = np.random.default_rng(17)
    a = list(rng.normal(5, 1, 30))
    out = compare_stats(a, a, BootstrapConfig(replicates=300, seed=1))
    assert out["mean_diff"] == 0.0
    assert out["cliffs_delta"] == 0.0
    assert out["ci_lower"] <= 0.0 <= out["ci_upper"]
    assert 0.0 < out["p_value"] <= 1.0


def test_compare_stats_detects_shift():
    rng = np.random.default_rng(18)
    b = list(rng.normal(5, 0.5, 40))
    a = [v + 2.0 for v in b]
    out = compare_stats(a, b, BootstrapConfig(replicates=500, seed=2))
    assert out["mean_diff"] == pytest.approx(2.0)
    assert out["p_value"] < 0.01
    assert out["ci_lower"] > 0.0


# --- friedman_kendall ----------------------------------------------------------------

def test_friedman_identical_rankings_w_one():
    blocks = [[1.0, 2.0, 3.0, 4.0]] * 6
    out = friedman_kendall(blocks)
    assert out["kendall_w"] == pytest.approx(1.0)


def test_friedman_alternating_winners_w_near_zero():
    blocks = [[1.0, 2.0], [2.0, 1.0]] * 4
    out = friedman_kendall(blocks)
    assert out["kendall_w"] == pytest.approx(0.0, abs=1e-12)


def test_friedman_fixture_matches_direct_formula_oracle():
    rng = np.random.default_rng(23)
    blocks = rng.normal(0, 1, (6, 4)).round(1).tolist()  # rounding induces ties
    got = friedman_kendall(blocks)
    chi2, w = oracles.friedman_kendall_w(blocks)
    assert got["statistic"] == pytest.approx(chi2, abs=1e-9)
    assert got["kendall_w"] == pytest.approx(w, abs=1e-9)


def test_friedman_degenerate_blocks():
    with pytest.raises(DegenerateBlocks):
        friedman_kendall([[1.0, 1.0], [2.0, 2.0]])


# --- segments -------------------------------------------------------------------------

def test_segment_maes_structure():
    fx = [Forecast("s", W0.shift(i), 10.0, 10.0 + i) for i in range(1, 12)]
    out = segment_maes(fx, first_week=W0, from_week_index=9)
    assert out["overall"] == pytest.approx(np.mean(np.arange(1, 12)))
    assert out["final_week"] == pytest.approx(11.0)
    # weeks >= W0+8 (index 9): offsets 8..11 -> errors 8, 9, 10, 11
    assert out["from_week_9"] == pytest.approx(9.5)
    assert out["signed_overall"] < 0  # predictions undershoot
    assert mean_signed_error(fx) == pytest.approx(-np.mean(np.arange(1, 12)))
    assert forecast_mae(fx) == out["overall"]
