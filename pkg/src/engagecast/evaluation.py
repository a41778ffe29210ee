"""Evaluation protocol: splits, chronological forecasting, error statistics.

Students are partitioned once into development and holdout sets; inside the
development set an expanding-window time-series split drives model
selection. Forecasts are one-step and causal. Reported statistics are MAE
(overall and per segment), signed relative differences, percentile bootstrap
intervals over students, Cliff's delta, and Friedman/Kendall's W for blocked
rank comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2, rankdata as _rankdata

from .features import ImputedMatrix
from .ingest import StudentWeek
from .predictors import (
    SUPERVISED_KINDS,
    TrainedModel,
    predict_history,
    predict_supervised,
)
from .weeks import WeekId


class EvalError(Exception):
    pass


class TooFewStudents(EvalError):
    pass


class TooFewWeeks(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class ZeroComparator(EvalError):
    pass


class DegenerateBlocks(EvalError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    dev_fraction: float = 0.70
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.dev_fraction < 1:
            raise ValueError("dev_fraction must be in (0, 1)")
        if self.cv_folds < 1:
            raise ValueError("cv_folds must be >= 1")


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 10_000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not 0 < self.level < 1:
            raise ValueError("level must be in (0, 1)")


def student_split(
    student_ids: Iterable[str], spec: SplitSpec
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Random student-disjoint partition, deterministic by seed."""
    ids = sorted(set(student_ids))
    if len(ids) < 2:
        raise TooFewStudents("need at least 2 students to split")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(ids))
    n_dev = int(round(len(ids) * spec.dev_fraction))
    n_dev = min(max(n_dev, 1), len(ids) - 1)
    dev = tuple(sorted(ids[i] for i in order[:n_dev]))
    holdout = tuple(sorted(ids[i] for i in order[n_dev:]))
    assert not set(dev) & set(holdout)
    return dev, holdout


def timeseries_cv(
    weeks: Sequence[WeekId], folds: int
) -> list[tuple[tuple[WeekId, ...], tuple[WeekId, ...]]]:
    """Expanding-window folds over the global chronological week range.

    The distinct weeks are cut into ``folds + 1`` contiguous blocks (earlier
    blocks absorb any remainder); fold j trains on blocks 1..j and validates
    on block j+1.
    """
    distinct = sorted(set(weeks))
    if len(distinct) < folds + 1:
        raise TooFewWeeks(f"need >= {folds + 1} distinct weeks, have {len(distinct)}")
    blocks = [list(b) for b in np.array_split(np.array(distinct, dtype=object), folds + 1)]
    out = []
    for j in range(folds):
        train = tuple(w for block in blocks[: j + 1] for w in block)
        val = tuple(blocks[j + 1])
        out.append((train, val))
    return out


@dataclass(frozen=True)
class Forecast:
    student_id: str
    week: WeekId          # the predicted (target) week
    y_pred: float
    y_true: float | None  # None on the unscored final horizon


def target_value(row: StudentWeek, target: str) -> float:
    if target == "minutes":
        assert row.y_min is not None
        return float(row.y_min)
    if target == "skills":
        assert row.y_skill is not None
        return float(row.y_skill)
    raise ValueError(f"unknown target {target!r}")


def panel_by_student(panel: Sequence[StudentWeek]) -> dict[str, list[StudentWeek]]:
    out: dict[str, list[StudentWeek]] = {}
    for row in panel:
        out.setdefault(row.student_id, []).append(row)
    for rows in out.values():
        rows.sort(key=lambda r: r.week)
    return out


def training_rows(
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix,
    target: str,
    students: Iterable[str] | None = None,
    weeks: Iterable[WeekId] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) one-step training samples.

    A sample pairs the feature row at week t with the target at t+1. Both
    endpoint rows must be inside the training span and neither may be
    Tukey-excluded, so no outlier row ever enters a fold.
    """
    students_set = set(students) if students is not None else None
    weeks_set = set(weeks) if weeks is not None else None
    xs: list[int] = []
    ys: list[float] = []
    for student, rows in panel_by_student(panel).items():
        if students_set is not None and student not in students_set:
            continue
        for cur, nxt in zip(rows, rows[1:]):
            if cur.excluded or nxt.excluded:
                continue
            if weeks_set is not None and (
                cur.week not in weeks_set or nxt.week not in weeks_set
            ):
                continue
            xs.append(matrix.row_index[(student, str(cur.week))])
            ys.append(target_value(nxt, target))
    if not xs:
        return np.zeros((0, matrix.x.shape[1])), np.zeros(0)
    return matrix.x[np.array(xs)], np.asarray(ys)


def forecast_loop(
    model: TrainedModel,
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix | None,
    target: str,
    students: Iterable[str] | None = None,
    target_weeks: Iterable[WeekId] | None = None,
    include_final: bool = False,
) -> list[Forecast]:
    """One-step forecasts in chronological order per student.

    Each scored row predicts the target at week u from information at weeks
    <= u-1. Tukey-excluded target weeks are skipped. ``include_final`` adds
    the unscored forecast one week past each student's last panel week
    (needed for live serving parity checks).
    """
    students_set = set(students) if students is not None else None
    weeks_set = set(target_weeks) if target_weeks is not None else None
    supervised = model.kind in SUPERVISED_KINDS
    out: list[Forecast] = []
    feature_rows: list[int] = []
    meta: list[tuple[str, WeekId, float | None]] = []

    for student, rows in panel_by_student(panel).items():
        if students_set is not None and student not in students_set:
            continue
        values = [target_value(r, target) for r in rows]
        horizon = len(rows) + 1 if include_final else len(rows)
        for idx in range(1, horizon):
            scored = idx < len(rows)
            week = rows[idx].week if scored else rows[-1].week.next()
            if weeks_set is not None and week not in weeks_set:
                continue
            if scored and rows[idx].excluded:
                continue
            y_true = values[idx] if scored else None
            if supervised:
                assert matrix is not None, "supervised forecasts need the matrix"
                feature_rows.append(matrix.row_index[(student, str(rows[idx - 1].week))])
                meta.append((student, week, y_true))
            else:
                pred = predict_history(model, values[:idx])
                out.append(Forecast(student, week, float(pred), y_true))

    if supervised and feature_rows:
        preds = predict_supervised(
            model, matrix.x[np.array(feature_rows)], matrix.feature_names
        )
        for (student, week, y_true), pred in zip(meta, preds):
            out.append(Forecast(student, week, float(pred), y_true))
    out.sort(key=lambda f: (f.student_id, f.week))
    return out


def mae(pairs: Sequence[tuple[float, float]]) -> float:
    """Mean absolute error over (prediction, truth) pairs."""
    if len(pairs) == 0:
        raise EmptyInput("mae needs at least one pair")
    arr = np.asarray(pairs, dtype=float)
    return float(np.mean(np.abs(arr[:, 0] - arr[:, 1])))


def forecast_mae(forecasts: Sequence[Forecast]) -> float:
    return mae([(f.y_pred, f.y_true) for f in forecasts if f.y_true is not None])


def mean_signed_error(forecasts: Sequence[Forecast]) -> float:
    """Mean (prediction - truth); positive means systematic overshoot."""
    scored = [(f.y_pred, f.y_true) for f in forecasts if f.y_true is not None]
    if not scored:
        raise EmptyInput("no scored forecasts")
    arr = np.asarray(scored, dtype=float)
    return float(np.mean(arr[:, 0] - arr[:, 1]))


def delta_pct(mae_model: float, mae_comparator: float) -> float:
    """Signed relative MAE difference; negative means the model is better.

    This is the table convention ((model - comparator) / comparator). The
    opposite-sign "error reduction" form is exposed separately because the
    two appear with conflicting signs in the source material.
    """
    if mae_comparator == 0:
        raise ZeroComparator("comparator MAE is zero")
    return (mae_model - mae_comparator) / mae_comparator * 100.0


def error_reduction_pct(mae_model: float, mae_comparator: float) -> float:
    """(comparator - model) / comparator * 100; positive means improvement."""
    return -delta_pct(mae_model, mae_comparator)


@dataclass(frozen=True)
class BootstrapResult:
    lower: float
    upper: float
    point: float

    def excludes_zero(self) -> bool:
        return self.lower > 0.0 or self.upper < 0.0


def _replicate_rng(seed: int, index: int) -> np.random.Generator:
    # Per-replicate generators keyed by (seed, index) make the bootstrap
    # order-independent and therefore safely parallelizable.
    return np.random.default_rng([seed, index])


def bootstrap_index_matrix(n: int, config: BootstrapConfig) -> np.ndarray:
    """(replicates, n) resample indices; row b comes from its own keyed rng."""
    out = np.empty((config.replicates, n), dtype=np.int64)
    for b in range(config.replicates):
        out[b] = _replicate_rng(config.seed, b).integers(0, n, n)
    return out


def _percentile_interval(stats: np.ndarray, level: float) -> tuple[float, float]:
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(stats, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def bootstrap_ci(
    differences: Sequence[float], config: BootstrapConfig
) -> BootstrapResult:
    """Percentile CI for the mean of per-student paired differences."""
    diffs = np.asarray(differences, dtype=float)
    if len(diffs) < 2:
        raise TooFewStudents("bootstrap needs >= 2 students")
    idx = bootstrap_index_matrix(len(diffs), config)
    stats = diffs[idx].mean(axis=1)
    lo, hi = _percentile_interval(stats, config.level)
    return BootstrapResult(lo, hi, float(diffs.mean()))


def bootstrap_statistic(
    per_student: Mapping[str, object],
    statistic,
    config: BootstrapConfig,
) -> BootstrapResult:
    """Percentile CI for an arbitrary statistic of resampled students.

    ``statistic`` maps a list of per-student payloads to a scalar; it is
    evaluated on the observed cohort for the point estimate and on each
    student resample for the replicates. For pooled-MAE style statistics
    prefer :func:`bootstrap_pooled_ratio`, which vectorizes.
    """
    students = sorted(per_student)
    if len(students) < 2:
        raise TooFewStudents("bootstrap needs >= 2 students")
    payloads = [per_student[s] for s in students]
    point = float(statistic(payloads))
    idx = bootstrap_index_matrix(len(students), config)
    stats = np.empty(config.replicates)
    for b in range(config.replicates):
        stats[b] = statistic([payloads[i] for i in idx[b]])
    lo, hi = _percentile_interval(stats, config.level)
    return BootstrapResult(lo, hi, point)


def bootstrap_pooled_delta(
    model_errors: Mapping[str, Sequence[float]],
    comparator_errors: Sequence[Mapping[str, Sequence[float]]],
    config: BootstrapConfig,
    scale: str = "percent",
) -> BootstrapResult:
    """Paired student bootstrap of a pooled-MAE comparison.

    The statistic is ``(mae_model - mae_comp) / mae_comp * 100`` (or the raw
    difference when ``scale='difference'``) where ``mae_comp`` averages the
    pooled MAEs of the comparator kinds. Pooled MAEs reduce to per-student
    (sum, count) sufficient statistics, so replicates are a fancy-indexed
    sum rather than a Python loop.
    """
    students = sorted(model_errors)
    if len(students) < 2:
        raise TooFewStudents("bootstrap needs >= 2 students")

    def suff(errors: Mapping[str, Sequence[float]]) -> tuple[np.ndarray, np.ndarray]:
        sums = np.array([float(np.sum(errors.get(s, []))) for s in students])
        counts = np.array([float(len(errors.get(s, []))) for s in students])
        return sums, counts

    m_sum, m_cnt = suff(model_errors)
    comp = [suff(e) for e in comparator_errors]

    def stat_for(idx: np.ndarray) -> np.ndarray:
        axis = 1 if idx.ndim == 2 else 0
        mae_m = m_sum[idx].sum(axis=axis) / m_cnt[idx].sum(axis=axis)
        comp_maes = [
            s[idx].sum(axis=axis) / c[idx].sum(axis=axis) for s, c in comp
        ]
        mae_c = np.mean(comp_maes, axis=0)
        if scale == "percent":
            return (mae_m - mae_c) / mae_c * 100.0
        return mae_m - mae_c

    observed = np.arange(len(students))
    point = float(stat_for(observed))
    idx = bootstrap_index_matrix(len(students), config)
    stats = stat_for(idx)
    lo, hi = _percentile_interval(stats, config.level)
    return BootstrapResult(lo, hi, point)


def weekly_trend(
    forecasts_by_model: Mapping[str, Sequence[Forecast]],
) -> list[dict]:
    """Per-week truth mean/std band plus each model's mean prediction.

    Only scored rows contribute; weeks with no rows are omitted. The band is
    the population standard deviation of the truth across students.
    """
    if not forecasts_by_model:
        raise EmptyInput("no forecasts")
    weeks: dict[WeekId, dict] = {}
    first = True
    for model_name in sorted(forecasts_by_model):
        for f in forecasts_by_model[model_name]:
            if f.y_true is None:
                continue
            bucket = weeks.setdefault(f.week, {"truth": [], "preds": {}})
            if first:
                bucket["truth"].append(f.y_true)
            bucket["preds"].setdefault(model_name, []).append(f.y_pred)
        if first:
            # Truth series comes from the first model's scored rows; all
            # models score the same row set by construction.
            first = False
    out = []
    for week in sorted(weeks):
        bucket = weeks[week]
        truth = np.asarray(bucket["truth"], dtype=float)
        out.append(
            {
                "week": str(week),
                "truth_mean": float(truth.mean()),
                "truth_std": float(truth.std()),
                "pred_mean": {
                    name: float(np.mean(vals)) for name, vals in sorted(bucket["preds"].items())
                },
            }
        )
    return out


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> float:
    """(#{a>b} - #{a<b}) / (n*m) over all cross pairs."""
    if len(a) == 0 or len(b) == 0:
        raise EmptyInput("cliffs_delta needs nonempty samples")
    xa = np.asarray(a, dtype=float)[:, None]
    xb = np.asarray(b, dtype=float)[None, :]
    gt = int(np.count_nonzero(xa > xb))
    lt = int(np.count_nonzero(xa < xb))
    return (gt - lt) / (len(a) * len(b))


def compare_stats(
    a: Sequence[float], b: Sequence[float], config: BootstrapConfig
) -> dict:
    """Paired comparison summary: mean diff, CI, Cliff's delta, p-value.

    ``a`` and ``b`` are per-student error samples paired by position. The
    p-value is two-sided from the shifted (null-centered) bootstrap of the
    mean difference.
    """
    if len(a) == 0 or len(b) == 0:
        raise EmptyInput("compare_stats needs nonempty samples")
    if len(a) != len(b):
        raise EvalError("paired samples must have equal length")
    diffs = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    ci = bootstrap_ci(diffs, config)
    observed = float(diffs.mean())
    centered = diffs - observed
    idx = bootstrap_index_matrix(len(diffs), config)
    exceed = int(np.count_nonzero(np.abs(centered[idx].mean(axis=1)) >= abs(observed)))
    p_value = (1 + exceed) / (config.replicates + 1)
    return {
        "mean_diff": observed,
        "ci_lower": ci.lower,
        "ci_upper": ci.upper,
        "cliffs_delta": cliffs_delta(a, b),
        "p_value": p_value,
    }


def friedman_kendall(blocks: Sequence[Sequence[float]]) -> dict:
    """Tie-corrected Friedman test plus Kendall's W over blocked scores.

    ``blocks`` is blocks x configurations (e.g. folds x hyperparameter
    settings); lower scores rank better. W = chi2 / (n_blocks * (k - 1)).
    """
    arr = np.asarray(blocks, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise DegenerateBlocks("need >= 2 blocks and >= 2 configurations")
    n, k = arr.shape
    ranks = np.vstack([_rankdata(row) for row in arr])
    rank_totals = ranks.sum(axis=0)
    correction = 0.0
    for row in arr:
        _, counts = np.unique(row, return_counts=True)
        correction += float(np.sum(counts**3 - counts))
    denom = n * n * k * (k * k - 1) - n * correction
    if denom <= 0:
        raise DegenerateBlocks("every configuration tied in every block")
    s = float(np.sum(rank_totals**2))
    w = (12 * s - 3 * n * n * k * (k + 1) ** 2) / denom
    statistic = n * (k - 1) * w
    p_value = float(_chi2.sf(statistic, k - 1))
    return {"statistic": statistic, "p_value": p_value, "kendall_w": w}


def segment_maes(
    forecasts: Sequence[Forecast], first_week: WeekId, from_week_index: int = 9
) -> dict:
    """Overall, final-week, and late-segment MAE plus signed errors.

    Segments reuse the same forecast set (no refitting): "final week" is the
    last scored week in the set; the late segment starts at the panel's
    ``from_week_index``-th week (1-based from ``first_week``).
    """
    scored = [f for f in forecasts if f.y_true is not None]
    if not scored:
        raise EmptyInput("no scored forecasts")
    last_week = max(f.week for f in scored)
    cutoff = first_week.shift(from_week_index - 1)
    final = [f for f in scored if f.week == last_week]
    late = [f for f in scored if f.week >= cutoff]
    out = {
        "overall": forecast_mae(scored),
        "final_week": forecast_mae(final),
        "signed_overall": mean_signed_error(scored),
    }
    out["from_week_9"] = forecast_mae(late) if late else None
    out["signed_from_week_9"] = mean_signed_error(late) if late else None
    return out


def per_student_abs_errors(forecasts: Sequence[Forecast]) -> dict[str, list[float]]:
    out: dict[str, list[float]] = {}
    for f in forecasts:
        if f.y_true is None:
            continue
        out.setdefault(f.student_id, []).append(abs(f.y_pred - f.y_true))
    return out
