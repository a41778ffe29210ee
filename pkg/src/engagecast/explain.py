"""Feature attribution, rank agreement, and group ablations.

Linear models attribute by absolute standardized-space coefficient; tree
ensembles by accumulated squared-error reduction per split feature. Vectors
are normalized to sum to one, averaged across validation folds, and rolled
up into the four feature-group weights. The ablation grid retrains one model
kind per condition (same seed, same split) over column subsets built around
an always-on base set of current-week raw measures, and scores each
condition against the full matrix with a paired student bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .evaluation import (
    BootstrapConfig,
    SplitSpec,
    bootstrap_pooled_delta,
    delta_pct,
    forecast_loop,
    forecast_mae,
    per_student_abs_errors,
    student_split,
    training_rows,
)
from .features import BASE_FEATURES, FeatureGroup, ImputedMatrix
from .ingest import StudentWeek
from .predictors import (
    PredictorKind,
    TrainedModel,
    UnsupportedKind,
    fit_supervised,
)

LINEAR_KINDS = (PredictorKind.OLS, PredictorKind.RIDGE, PredictorKind.LASSO)
TREE_KINDS = (PredictorKind.RANDOM_FOREST, PredictorKind.GRADIENT_BOOST)


class ExplainError(Exception):
    pass


class SchemaMismatch(ExplainError):
    pass


class EmptyIntersection(ExplainError):
    pass


class EmptyFeatureSet(ExplainError):
    pass


def importance(model: TrainedModel, feature_names: Sequence[str]) -> dict[str, float]:
    """Raw (unnormalized) importance per feature name.

    Heuristics and the MLP have no accepted attribution here and are
    reported as unavailable rather than approximated.
    """
    if model.kind in LINEAR_KINDS:
        impl = model.require_impl()
        values = np.abs(impl.coef_std)
    elif model.kind in TREE_KINDS:
        impl = model.require_impl()
        values = impl.feature_importance()
    else:
        raise UnsupportedKind(
            f"importance unavailable for {model.kind.value}"
        )
    if len(values) != len(feature_names):
        raise SchemaMismatch("feature count does not match the model")
    return {name: float(v) for name, v in zip(feature_names, values)}


def normalize(raw: Mapping[str, float]) -> dict[str, float]:
    """Scale importances to sum to one; an all-zero vector becomes uniform."""
    total = float(sum(raw.values()))
    if any(v < 0 for v in raw.values()):
        raise ExplainError("importances must be nonnegative")
    if total == 0.0:
        return {k: 1.0 / len(raw) for k in raw}
    return {k: v / total for k, v in raw.items()}


@dataclass
class ImportanceTable:
    """Fold-averaged normalized importances and their group roll-up."""

    per_feature: dict[str, float]
    group_weights: dict[FeatureGroup, float]
    n_folds: int


def aggregate(
    fold_importances: Sequence[Mapping[str, float]],
    groups: Mapping[str, FeatureGroup],
) -> ImportanceTable:
    """Mean of normalized fold vectors, then group weights by summation."""
    if not fold_importances:
        raise ExplainError("no fold importances to aggregate")
    keys = set(fold_importances[0])
    for fold in fold_importances[1:]:
        if set(fold) != keys:
            raise SchemaMismatch("folds disagree on the feature schema")
    normalized = [normalize(fold) for fold in fold_importances]
    per_feature = {
        k: float(np.mean([fold[k] for fold in normalized])) for k in sorted(keys)
    }
    group_weights = {g: 0.0 for g in FeatureGroup}
    for name, weight in per_feature.items():
        group_weights[groups[name]] += weight
    return ImportanceTable(per_feature, group_weights, len(fold_importances))


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float:
    """Tau-b rank correlation with tie correction."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    n = len(xa)
    if n < 2:
        raise ExplainError("tau needs >= 2 items")
    dx = np.sign(xa[:, None] - xa[None, :])
    dy = np.sign(ya[:, None] - ya[None, :])
    iu = np.triu_indices(n, k=1)
    sx, sy = dx[iu], dy[iu]
    concordant = int(np.count_nonzero((sx * sy) > 0))
    discordant = int(np.count_nonzero((sx * sy) < 0))
    ties_x = int(np.count_nonzero(sx == 0))
    ties_y = int(np.count_nonzero(sy == 0))
    n0 = n * (n - 1) / 2
    denom = np.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0:
        raise ExplainError("tau-b undefined: one ranking is constant")
    return float((concordant - discordant) / denom)


def rank_agreement(
    table_a: Mapping[str, float],
    table_b: Mapping[str, float],
    level: str = "feature",
) -> float:
    """Kendall's tau-b between two importance tables over shared keys."""
    if level not in ("feature", "group"):
        raise ValueError("level must be 'feature' or 'group'")
    shared = sorted(set(table_a) & set(table_b), key=str)
    if not shared:
        raise EmptyIntersection("no shared keys between tables")
    a = [float(table_a[k]) for k in shared]
    b = [float(table_b[k]) for k in shared]
    return kendall_tau_b(a, b)


@dataclass(frozen=True)
class AblationCondition:
    """Column-subset rule: full set, base only, base + group, or all minus group."""

    kind: str
    group: FeatureGroup | None = None

    @classmethod
    def full(cls) -> "AblationCondition":
        return cls("full")

    @classmethod
    def base_only(cls) -> "AblationCondition":
        return cls("base_only")

    @classmethod
    def base_plus(cls, group: FeatureGroup) -> "AblationCondition":
        return cls("base_plus", group)

    @classmethod
    def all_except(cls, group: FeatureGroup) -> "AblationCondition":
        return cls("all_except", group)

    @property
    def label(self) -> str:
        if self.group is None:
            return self.kind
        return f"{self.kind}_{self.group.value.lower()}"


def table5_conditions() -> list[AblationCondition]:
    out = [AblationCondition.full(), AblationCondition.base_only()]
    out += [AblationCondition.base_plus(g) for g in FeatureGroup]
    out += [AblationCondition.all_except(g) for g in FeatureGroup]
    return out


def condition_columns(
    condition: AblationCondition,
    feature_names: Sequence[str],
    groups: Mapping[str, FeatureGroup],
) -> list[str]:
    """Feature names retained under a condition, preserving matrix order.

    The base set (current-week raw measures) stays in every condition and is
    not counted as part of any removable group.
    """
    base = [n for n in feature_names if n in BASE_FEATURES]
    if condition.kind == "full":
        return list(feature_names)
    if condition.kind == "base_only":
        return base
    members = [
        n
        for n in feature_names
        if n not in BASE_FEATURES and groups[n] == condition.group
    ]
    if condition.kind == "base_plus":
        keep = set(base) | set(members)
        return [n for n in feature_names if n in keep]
    if condition.kind == "all_except":
        drop = set(members)
        return [n for n in feature_names if n not in drop]
    raise ValueError(f"unknown condition kind {condition.kind!r}")


def subset_matrix(matrix: ImputedMatrix, names: Sequence[str]) -> ImputedMatrix:
    if not names:
        raise EmptyFeatureSet("condition retains no columns")
    index = {n: i for i, n in enumerate(matrix.feature_names)}
    cols = [index[n] for n in names]
    return ImputedMatrix(
        student_ids=matrix.student_ids,
        weeks=matrix.weeks,
        x=matrix.x[:, cols],
        feature_names=tuple(names),
        groups={n: matrix.groups[n] for n in names},
        row_index=dict(matrix.row_index),
    )


def ablation_grid(
    panel: Sequence[StudentWeek],
    matrix: ImputedMatrix,
    target: str,
    kind: PredictorKind = PredictorKind.GRADIENT_BOOST,
    conditions: Sequence[AblationCondition] | None = None,
    hyperparams: Mapping | None = None,
    split: SplitSpec | None = None,
    bootstrap: BootstrapConfig | None = None,
    seed: int = 0,
) -> list[dict]:
    """Retrain-per-condition grid scored on the holdout students.

    Every condition reuses the same student split, seed, and hyperparameters
    as the full reference. Significance means the paired student-bootstrap
    CI on the MAE difference vs FULL excludes zero.
    """
    split = split or SplitSpec()
    bootstrap = bootstrap or BootstrapConfig()
    conditions = list(conditions) if conditions is not None else table5_conditions()
    if not any(c.kind == "full" for c in conditions):
        conditions = [AblationCondition.full()] + conditions

    dev, holdout = student_split({r.student_id for r in panel}, split)

    def run(condition: AblationCondition):
        names = condition_columns(condition, matrix.feature_names, matrix.groups)
        sub = subset_matrix(matrix, names)
        x, y = training_rows(panel, sub, target, students=dev)
        model = fit_supervised(
            kind, hyperparams, x, y, sub.feature_names, seed=seed, target=target
        )
        forecasts = forecast_loop(model, panel, sub, target, students=holdout)
        return forecasts

    full_forecasts = run(AblationCondition.full())
    full_errors = per_student_abs_errors(full_forecasts)
    full_mae = forecast_mae(full_forecasts)

    results = []
    for condition in conditions:
        if condition.kind == "full":
            forecasts = full_forecasts
        else:
            forecasts = run(condition)
        cond_errors = per_student_abs_errors(forecasts)
        cond_mae = forecast_mae(forecasts)
        ci = bootstrap_pooled_delta(
            cond_errors, [full_errors], bootstrap, scale="difference"
        )
        results.append(
            {
                "condition": condition.label,
                "mae": cond_mae,
                "delta_pct_vs_full": delta_pct(cond_mae, full_mae),
                "ci_lower": ci.lower,
                "ci_upper": ci.upper,
                "significant": ci.excludes_zero(),
            }
        )
    return results
