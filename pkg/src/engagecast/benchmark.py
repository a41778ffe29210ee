"""End-to-end pipeline stages and the predictor benchmark.

``ingest_pipeline`` turns raw events into the target-bearing panel (rolling
learner-model fits included); ``feature_pipeline`` builds the tagged matrix;
``run_benchmark`` reproduces the evaluation protocol: student split,
expanding-window CV on the development set, holdout retraining, segment
MAEs, relative differences with paired student-bootstrap intervals, weekly
trend series, family comparisons, and (optionally) blocked hyperparameter
sensitivity tests. Reports are plain JSON-able dicts, deterministic for a
fixed root seed.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ._util import derive_seed
from .afm import (
    AfmConfig,
    QMatrix,
    learner_states_by_week,
    mastery_sweep,
    rolling_refit,
)
from .evaluation import (
    BootstrapConfig,
    Forecast,
    SplitSpec,
    bootstrap_pooled_delta,
    compare_stats,
    delta_pct,
    error_reduction_pct,
    forecast_loop,
    forecast_mae,
    friedman_kendall,
    per_student_abs_errors,
    segment_maes,
    student_split,
    timeseries_cv,
    training_rows,
    weekly_trend,
)
from .features import (
    FeatureConfig,
    FeatureMatrix,
    ImputedMatrix,
    build_matrix,
    early_skill_totals,
    to_imputed,
)
from .ingest import (
    IngestConfig,
    InteractionEvent,
    StudentWeek,
    aggregate_weekly,
    build_targets,
)
from .predictors import (
    ADAMS_KINDS,
    BUILT_KINDS,
    HEURISTIC_KINDS,
    HYPERPARAM_GRID,
    SUPERVISED_KINDS,
    PredictorKind,
    TrainedModel,
    fit_heuristic,
    fit_supervised,
    model_from_json,
    model_to_json,
)
from .weeks import WeekId

TARGETS = ("minutes", "skills")

BASELINE_KINDS = HEURISTIC_KINDS + ADAMS_KINDS

FAMILIES = {
    "linear": (PredictorKind.OLS, PredictorKind.RIDGE, PredictorKind.LASSO),
    "tree": (PredictorKind.RANDOM_FOREST, PredictorKind.GRADIENT_BOOST),
    "neural": (PredictorKind.MLP,),
}


@dataclass
class RunConfig:
    """Everything a benchmark run needs; serialized into every report."""

    seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    afm: AfmConfig = field(default_factory=AfmConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    predictors: tuple[PredictorKind, ...] = BUILT_KINDS
    hyperparams: dict = field(default_factory=dict)
    targets: tuple[str, ...] = TARGETS
    sensitivity: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        # Child components inherit derived seeds unless set explicitly.
        if self.split.seed == 0:
            self.split = SplitSpec(
                self.split.dev_fraction, self.split.cv_folds,
                derive_seed(self.seed, "split"),
            )
        if self.bootstrap.seed == 0:
            self.bootstrap = BootstrapConfig(
                self.bootstrap.replicates, self.bootstrap.level,
                derive_seed(self.seed, "bootstrap"),
            )

    def hyper_for(self, kind: PredictorKind) -> dict | None:
        raw = self.hyperparams.get(kind.value)
        return dict(raw) if raw else None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "split": {
                "dev_fraction": self.split.dev_fraction,
                "cv_folds": self.split.cv_folds,
                "seed": self.split.seed,
            },
            "bootstrap": {
                "replicates": self.bootstrap.replicates,
                "level": self.bootstrap.level,
                "seed": self.bootstrap.seed,
            },
            "afm": {
                "l2_theta": self.afm.l2_theta,
                "l2_beta": self.afm.l2_beta,
                "l2_gamma": self.afm.l2_gamma,
                "mastery_threshold": self.afm.mastery_threshold,
                "window_weeks": self.afm.window_weeks,
                "max_iters": self.afm.max_iters,
                "tolerance": self.afm.tolerance,
                "learning_rate_form": self.afm.learning_rate_form,
            },
            "features": {
                "lags": list(self.features.lags),
                "gap_lookback": self.features.gap_lookback,
                "early_weeks": self.features.early_weeks,
                "late_weeks": self.features.late_weeks,
                "change_window": self.features.change_window,
            },
            "ingest": {"tukey_k": self.ingest.tukey_k},
            "predictors": [k.value for k in self.predictors],
            "hyperparams": {
                kind: dict(params) for kind, params in sorted(self.hyperparams.items())
            },
            "targets": list(self.targets),
            "sensitivity": self.sensitivity,
            "jobs": self.jobs,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "RunConfig":
        split = data.get("split", {})
        bootstrap = data.get("bootstrap", {})
        afm = data.get("afm", {})
        feats = data.get("features", {})
        ingest = data.get("ingest", {})
        if "lags" in feats:
            feats = dict(feats, lags=tuple(feats["lags"]))
        return cls(
            seed=int(data.get("seed", 0)),
            split=SplitSpec(**split),
            bootstrap=BootstrapConfig(**bootstrap),
            afm=AfmConfig(**afm),
            features=FeatureConfig(**feats),
            ingest=IngestConfig(**ingest),
            predictors=tuple(
                PredictorKind(v) for v in data.get(
                    "predictors", [k.value for k in BUILT_KINDS]
                )
            ),
            hyperparams=dict(data.get("hyperparams", {})),
            targets=tuple(data.get("targets", TARGETS)),
            sensitivity=bool(data.get("sensitivity", False)),
            jobs=int(data.get("jobs", 1)),
        )


@dataclass
class PipelineData:
    panel: list[StudentWeek]
    fits: dict
    mastery: list[tuple[str, str, WeekId]]
    qmatrix: QMatrix


def ingest_pipeline(
    events: Sequence[InteractionEvent],
    ingest_config: IngestConfig | None = None,
    afm_config: AfmConfig | None = None,
) -> PipelineData:
    """Events -> aggregated panel with mastery-derived targets."""
    ingest_config = ingest_config or IngestConfig()
    afm_config = afm_config or AfmConfig()
    qmatrix = QMatrix.from_events(events)
    fits = rolling_refit(events, afm_config, qmatrix)
    mastery = mastery_sweep(events, qmatrix, afm_config, fits)
    panel = build_targets(aggregate_weekly(events), mastery, ingest_config)
    return PipelineData(panel=panel, fits=fits, mastery=mastery, qmatrix=qmatrix)


def feature_pipeline(
    panel: Sequence[StudentWeek],
    events: Sequence[InteractionEvent],
    fits: Mapping,
    feature_config: FeatureConfig | None = None,
    afm_config: AfmConfig | None = None,
    quartile_reference: Mapping[str, float] | None = None,
) -> FeatureMatrix:
    states = learner_states_by_week(fits, events, afm_config or AfmConfig())
    return build_matrix(panel, states, feature_config, quartile_reference)


def _heuristic_training_data(
    panel: Sequence[StudentWeek], dev: Sequence[str], target: str
) -> tuple[list[float], list[float]]:
    from .evaluation import panel_by_student, target_value

    dev_set = set(dev)
    all_values: list[float] = []
    week1: list[float] = []
    for student, rows in panel_by_student(panel).items():
        if student not in dev_set:
            continue
        kept = [r for r in rows if not r.excluded]
        all_values.extend(target_value(r, target) for r in kept)
        if rows and not rows[0].excluded:
            week1.append(target_value(rows[0], target))
    return all_values, week1


def _fit_supervised_job(payload: dict) -> dict:
    model = fit_supervised(
        PredictorKind(payload["kind"]),
        payload["hyper"],
        payload["x"],
        payload["y"],
        payload["feature_names"],
        seed=payload["seed"],
        target=payload["target"],
    )
    return model_to_json(model)


def _run_fit_jobs(payloads: list[dict], jobs: int) -> list[TrainedModel]:
    """Fit jobs in order or across processes; results merge by input order."""
    if jobs <= 1 or len(payloads) <= 1:
        docs = [_fit_supervised_job(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            docs = list(pool.map(_fit_supervised_job, payloads))
    return [model_from_json(d) for d in docs]


def fit_predictor(
    kind: PredictorKind,
    target: str,
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix | None,
    students: Sequence[str],
    config: RunConfig,
    weeks: Sequence[WeekId] | None = None,
) -> TrainedModel:
    """Train any built kind for one target on the given students/weeks."""
    seed = derive_seed(config.seed, "fit", kind.value, target)
    if kind in BASELINE_KINDS:
        values, week1 = _heuristic_training_data(panel, students, target)
        return fit_heuristic(kind, values, week1, target=target, seed=seed)
    x, y = training_rows(panel, matrix, target, students=students, weeks=weeks)
    return fit_supervised(
        kind, config.hyper_for(kind), x, y, matrix.feature_names,
        seed=seed, target=target,
    )


def _delta_with_ci(
    model_errors: Mapping[str, list[float]],
    comparator_errors_by_kind: Mapping[str, Mapping[str, list[float]]],
    bootstrap: BootstrapConfig,
) -> dict:
    """Delta% of pooled MAE vs a (possibly averaged) comparator, with CI.

    The comparator MAE is the mean of the pooled MAEs of the given kinds
    (a single kind is the common case). Resampling is paired over students.
    """
    comparators = [
        comparator_errors_by_kind[k] for k in sorted(comparator_errors_by_kind)
    ]
    ci = bootstrap_pooled_delta(model_errors, comparators, bootstrap)
    return {
        "delta_pct": ci.point,
        "error_reduction_pct": -ci.point,
        "ci_lower": ci.lower,
        "ci_upper": ci.upper,
        "significant": ci.excludes_zero(),
    }


def _grid_combinations(kind: PredictorKind) -> list[dict]:
    grid = HYPERPARAM_GRID.get(kind, {})
    combos: list[dict] = [{}]
    for key, values in sorted(grid.items()):
        combos = [dict(c, **{key: v}) for c in combos for v in values]
    return combos


def run_benchmark(
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix,
    config: RunConfig,
) -> dict:
    """Full protocol over the prepared panel and feature matrix."""
    students = sorted({r.student_id for r in panel})
    dev, holdout = student_split(students, config.split)
    assert not set(dev) & set(holdout)
    all_weeks = sorted({r.week for r in panel})
    first_week = all_weeks[0]
    folds = timeseries_cv(all_weeks, config.split.cv_folds)

    kinds = [k for k in config.predictors if k in BUILT_KINDS]
    supervised = [k for k in kinds if k in SUPERVISED_KINDS]
    baselines = [k for k in kinds if k in BASELINE_KINDS]

    report: dict = {
        "config": config.to_dict(),
        "panel": {
            "students": len(students),
            "weeks": len(all_weeks),
            "rows": len(panel),
            "excluded_rows": sum(1 for r in panel if r.excluded),
            "first_week": str(first_week),
            "last_week": str(all_weeks[-1]),
        },
        "split": {"dev": list(dev), "holdout": list(holdout)},
        "cv": {"folds": [], "mae": {}},
        "holdout": {},
        "trends": {},
    }
    report["cv"]["folds"] = [
        {"train_weeks": [str(w) for w in tr], "val_weeks": [str(w) for w in va]}
        for tr, va in folds
    ]

    # --- cross-validation on the development students -----------------------
    heuristic_models: dict[tuple[str, str], TrainedModel] = {}
    for target in config.targets:
        for kind in baselines:
            heuristic_models[(kind.value, target)] = fit_predictor(
                kind, target, panel, None, dev, config
            )

    cv_mae: dict[str, dict[str, list[float]]] = {t: {} for t in config.targets}
    for target in config.targets:
        for j, (train_weeks, val_weeks) in enumerate(folds):
            payloads = []
            for kind in supervised:
                x, y = training_rows(
                    panel, matrix, target, students=dev, weeks=train_weeks
                )
                payloads.append(
                    {
                        "kind": kind.value,
                        "hyper": config.hyper_for(kind),
                        "x": x,
                        "y": y,
                        "feature_names": matrix.feature_names,
                        "seed": derive_seed(config.seed, "cv", kind.value, target, j),
                        "target": target,
                    }
                )
            models = _run_fit_jobs(payloads, config.jobs)
            for kind, model in zip(supervised, models):
                fx = forecast_loop(
                    model, panel, matrix, target, students=dev, target_weeks=val_weeks
                )
                cv_mae[target].setdefault(kind.value, []).append(forecast_mae(fx))
            for kind in baselines:
                model = heuristic_models[(kind.value, target)]
                fx = forecast_loop(
                    model, panel, None, target, students=dev, target_weeks=val_weeks
                )
                cv_mae[target].setdefault(kind.value, []).append(forecast_mae(fx))
    report["cv"]["mae"] = cv_mae

    # --- holdout: retrain on all development data ----------------------------
    holdout_errors: dict[str, dict[str, dict[str, list[float]]]] = {}
    holdout_forecasts: dict[str, dict[str, list[Forecast]]] = {}
    trained_models: dict[tuple[str, str], TrainedModel] = {}
    for target in config.targets:
        payloads = []
        for kind in supervised:
            x, y = training_rows(panel, matrix, target, students=dev)
            payloads.append(
                {
                    "kind": kind.value,
                    "hyper": config.hyper_for(kind),
                    "x": x,
                    "y": y,
                    "feature_names": matrix.feature_names,
                    "seed": derive_seed(config.seed, "fit", kind.value, target),
                    "target": target,
                }
            )
        models = _run_fit_jobs(payloads, config.jobs)
        per_kind: dict[str, list[Forecast]] = {}
        for kind, model in zip(supervised, models):
            trained_models[(kind.value, target)] = model
            per_kind[kind.value] = forecast_loop(
                model, panel, matrix, target, students=holdout
            )
        for kind in baselines:
            model = heuristic_models[(kind.value, target)]
            trained_models[(kind.value, target)] = model
            per_kind[kind.value] = forecast_loop(
                model, panel, None, target, students=holdout
            )
        holdout_forecasts[target] = per_kind
        holdout_errors[target] = {
            kind: per_student_abs_errors(fx) for kind, fx in per_kind.items()
        }

    # --- holdout statistics ----------------------------------------------------
    for target in config.targets:
        per_kind = holdout_forecasts[target]
        errors = holdout_errors[target]
        maes = {kind: forecast_mae(fx) for kind, fx in per_kind.items()}
        baseline_names = [k.value for k in baselines]
        best_heuristic = (
            min(baseline_names, key=lambda k: maes[k]) if baseline_names else None
        )
        adams_names = [k.value for k in ADAMS_KINDS if k.value in maes]

        target_report: dict = {}
        can_bootstrap = len(holdout) >= 2
        for kind_name, fx in per_kind.items():
            entry: dict = {"not_implemented": False}
            entry["mae"] = segment_maes(fx, first_week)
            comparisons: dict = {}
            if not can_bootstrap:
                entry["vs"] = comparisons
                target_report[kind_name] = entry
                continue
            if best_heuristic and kind_name != best_heuristic:
                comparisons["best_heuristic"] = dict(
                    comparator=best_heuristic,
                    **_delta_with_ci(
                        errors[kind_name],
                        {best_heuristic: errors[best_heuristic]},
                        config.bootstrap,
                    ),
                )
            if "adams_p50" in maes and kind_name != "adams_p50":
                comparisons["adams_p50"] = _delta_with_ci(
                    errors[kind_name], {"adams_p50": errors["adams_p50"]},
                    config.bootstrap,
                )
            if len(adams_names) == 3 and kind_name not in adams_names:
                comparisons["avg_adams"] = _delta_with_ci(
                    errors[kind_name],
                    {k: errors[k] for k in adams_names},
                    config.bootstrap,
                )
            if len(baseline_names) >= 2 and kind_name not in baseline_names:
                comparisons["baseline_avg"] = _delta_with_ci(
                    errors[kind_name],
                    {k: errors[k] for k in baseline_names},
                    config.bootstrap,
                )
            entry["vs"] = comparisons
            target_report[kind_name] = entry
        # The deep sequential slot stays visible in every report.
        target_report["lstm"] = {"not_implemented": True}
        report["holdout"][target] = target_report
        report["trends"][target] = weekly_trend(per_kind)

    # --- family comparisons over per-student holdout errors ---------------------
    family_stats: dict[str, dict] = {}
    for target in config.targets if len(holdout) >= 2 else ():
        errors = holdout_errors[target]
        per_family: dict[str, dict[str, float]] = {}
        for family, members in FAMILIES.items():
            present = [k.value for k in members if k.value in errors]
            if not present:
                continue
            per_student: dict[str, float] = {}
            for kind_name in present:
                for student, errs in errors[kind_name].items():
                    per_student.setdefault(student, 0.0)
            for student in per_student:
                pooled = [
                    e for kind_name in present
                    for e in errors[kind_name].get(student, [])
                ]
                per_student[student] = float(np.mean(pooled)) if pooled else 0.0
            per_family[family] = per_student
        pairs = {}
        names = sorted(per_family)
        for i, fam_a in enumerate(names):
            for fam_b in names[i + 1:]:
                shared = sorted(set(per_family[fam_a]) & set(per_family[fam_b]))
                pairs[f"{fam_a}_vs_{fam_b}"] = compare_stats(
                    [per_family[fam_a][s] for s in shared],
                    [per_family[fam_b][s] for s in shared],
                    config.bootstrap,
                )
        family_stats[target] = pairs
    report["cv"]["family_stats"] = family_stats

    # --- hyperparameter sensitivity (optional) -----------------------------------
    if config.sensitivity:
        sensitivity: dict[str, dict] = {}
        for target in config.targets:
            per_kind_sense: dict[str, dict] = {}
            for kind in supervised:
                combos = _grid_combinations(kind)
                if len(combos) < 2:
                    continue
                blocks: list[list[float]] = []
                for j, (train_weeks, val_weeks) in enumerate(folds):
                    x, y = training_rows(
                        panel, matrix, target, students=dev, weeks=train_weeks
                    )
                    row = []
                    for c, combo in enumerate(combos):
                        hyper = dict(config.hyper_for(kind) or {})
                        hyper.update(combo)
                        model = fit_supervised(
                            kind, hyper, x, y, matrix.feature_names,
                            seed=derive_seed(config.seed, "sense", kind.value, target, j, c),
                            target=target,
                        )
                        fx = forecast_loop(
                            model, panel, matrix, target,
                            students=dev, target_weeks=val_weeks,
                        )
                        row.append(forecast_mae(fx))
                    blocks.append(row)
                per_kind_sense[kind.value] = dict(
                    friedman_kendall(blocks),
                    combos=[dict(c) for c in combos],
                    blocks=blocks,
                )
            sensitivity[target] = per_kind_sense
        report["cv"]["sensitivity"] = sensitivity

    report["models"] = {
        f"{kind}:{target}": model_to_json(model)
        for (kind, target), model in sorted(trained_models.items())
    }
    return report


def quartile_reference_for(
    panel: Sequence[StudentWeek], dev: Sequence[str], early_weeks: int
) -> dict[str, float]:
    dev_rows = [r for r in panel if r.student_id in set(dev)]
    return early_skill_totals(dev_rows, early_weeks)


def prepare_matrix(
    events: Sequence[InteractionEvent],
    data: PipelineData,
    config: RunConfig,
) -> ImputedMatrix:
    """Feature matrix with start-quartile boundaries fit on dev students only."""
    dev, _ = student_split({r.student_id for r in data.panel}, config.split)
    reference = quartile_reference_for(data.panel, dev, config.features.early_weeks)
    fm = feature_pipeline(
        data.panel, events, data.fits, config.features, config.afm, reference
    )
    return to_imputed(fm)


def run_importance(
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix,
    config: RunConfig,
) -> dict:
    """Fold-averaged normalized importances plus cross-family rank agreement.

    Linear and tree kinds are attributed (heuristics and the MLP are
    reported as unavailable); fold models retrain on each expanding-window
    training span over development students.
    """
    from .explain import LINEAR_KINDS, TREE_KINDS, aggregate, importance, normalize, rank_agreement

    students = sorted({r.student_id for r in panel})
    dev, _ = student_split(students, config.split)
    all_weeks = sorted({r.week for r in panel})
    folds = timeseries_cv(all_weeks, config.split.cv_folds)
    kinds = [
        k for k in config.predictors if k in LINEAR_KINDS or k in TREE_KINDS
    ]
    unavailable = [
        k.value for k in config.predictors
        if k in SUPERVISED_KINDS and k not in kinds
    ]

    out: dict = {"targets": {}, "unavailable": sorted(unavailable)}
    for target in config.targets:
        per_kind: dict[str, dict] = {}
        tables = {}
        for kind in kinds:
            fold_importances = []
            for j, (train_weeks, _val) in enumerate(folds):
                x, y = training_rows(
                    panel, matrix, target, students=dev, weeks=train_weeks
                )
                model = fit_supervised(
                    kind, config.hyper_for(kind), x, y, matrix.feature_names,
                    seed=derive_seed(config.seed, "imp", kind.value, target, j),
                    target=target,
                )
                fold_importances.append(
                    normalize(importance(model, matrix.feature_names))
                )
            table = aggregate(fold_importances, matrix.groups)
            tables[kind] = table
            per_kind[kind.value] = {
                "per_feature": table.per_feature,
                "group_weights": {
                    g.value: w for g, w in sorted(
                        table.group_weights.items(), key=lambda kv: kv[0].value
                    )
                },
                "n_folds": table.n_folds,
            }
        agreement = {}
        linear_present = [k for k in kinds if k in LINEAR_KINDS]
        tree_present = [k for k in kinds if k in TREE_KINDS]
        if linear_present and tree_present:
            a = tables[linear_present[0]]
            b = tables[tree_present[-1]]
            agreement = {
                "linear_kind": linear_present[0].value,
                "tree_kind": tree_present[-1].value,
                "feature_tau": rank_agreement(a.per_feature, b.per_feature),
                "group_tau": rank_agreement(
                    {g.value: w for g, w in a.group_weights.items()},
                    {g.value: w for g, w in b.group_weights.items()},
                ),
            }
        out["targets"][target] = {"models": per_kind, "agreement": agreement}
    return out


def table2_rows(report: dict) -> list[dict]:
    """Overall summary: top supervised model vs the mean of the baselines."""
    rows = []
    for target, entries in sorted(report["holdout"].items()):
        baseline_maes = [
            entries[k.value]["mae"]["overall"]
            for k in BASELINE_KINDS
            if k.value in entries and not entries[k.value].get("not_implemented")
        ]
        supervised_entries = {
            k.value: entries[k.value]["mae"]["overall"]
            for k in SUPERVISED_KINDS
            if k.value in entries
        }
        if not baseline_maes or not supervised_entries:
            continue
        top_kind = min(supervised_entries, key=supervised_entries.get)
        baseline = float(np.mean(baseline_maes))
        top = supervised_entries[top_kind]
        rows.append(
            {
                "target": target,
                "baseline_mae": baseline,
                "top_model": top_kind,
                "top_model_mae": top,
                "delta_pct": delta_pct(top, baseline),
                "error_reduction_pct": error_reduction_pct(top, baseline),
            }
        )
    return rows


def table4_rows(report: dict) -> list[dict]:
    """Segmented comparison of the boosted model against the percentile rules."""
    rows = []
    segments = ("final_week", "overall", "from_week_9")
    for target, entries in sorted(report["holdout"].items()):
        adams = [k.value for k in ADAMS_KINDS if k.value in entries]
        gb = "gradient_boost" if "gradient_boost" in entries else None
        listed = adams + ([gb] if gb else [])
        if not adams:
            continue
        def adams_avg(segment: str) -> float | None:
            values = [entries[a]["mae"].get(segment) for a in adams]
            if any(v is None for v in values):
                return None
            return float(np.mean(values))

        for kind in listed:
            row = {"target": target, "model": kind}
            for segment in segments:
                value = entries[kind]["mae"].get(segment)
                row[f"mae_{segment}"] = value
                if "adams_p50" in entries and value is not None:
                    p50 = entries["adams_p50"]["mae"].get(segment)
                    row[f"delta_vs_p50_{segment}"] = (
                        delta_pct(value, p50) if p50 else None
                    )
                    avg = adams_avg(segment)
                    row[f"delta_vs_avg_adams_{segment}"] = (
                        delta_pct(value, avg) if avg else None
                    )
            rows.append(row)
        avg_row = {"target": target, "model": "avg_adams"}
        for segment in segments:
            avg = adams_avg(segment)
            avg_row[f"mae_{segment}"] = avg
            p50 = entries["adams_p50"]["mae"].get(segment)
            avg_row[f"delta_vs_p50_{segment}"] = (
                delta_pct(avg, p50) if (avg is not None and p50) else None
            )
            avg_row[f"delta_vs_avg_adams_{segment}"] = 0.0 if avg is not None else None
        rows.append(avg_row)
    return rows
