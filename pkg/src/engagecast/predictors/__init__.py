"""Uniform fit/predict registry over the fourteen built predictor kinds.

Heuristic kinds forecast from the student's own target history plus cohort
cold-start statistics; supervised kinds consume the engineered feature
matrix. Every fitted predictor lives in the same ``TrainedModel`` envelope
and serializes to a versioned JSON document, so the benchmark, the CLI, and
the HTTP service all speak one format. The deep sequential predictor slot
(``LSTM``) is registered but intentionally unimplemented; reports carry it
as "not implemented" so result tables keep a fifteen-row layout.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateDesign,
    NonFiniteLoss,
    PredictorError,
    SchemaMismatch,
    UnsupportedKind,
)
from .heuristics import (
    AdamsConfig,
    DatasetStats,
    HeuristicError,
    MissingDatasetStats,
    percentile_of,
    predict_adams,
    predict_heuristic,
)
from .linear import (
    LinearModel,
    Standardizer,
    fit_lasso,
    fit_ols,
    fit_ridge,
    lasso_subgradient_violation,
)
from .mlp import MlpModel, MlpParams, fit_mlp, loss_and_grad
from .trees import (
    GradientBoost,
    RandomForest,
    Tree,
    fit_gradient_boost,
    fit_random_forest,
)

__all__ = [
    "PredictorKind", "TrainedModel", "DatasetStats", "AdamsConfig",
    "fit_supervised", "predict_supervised", "fit_heuristic", "predict_history",
    "validate_hyperparams", "model_to_json", "model_from_json", "schema_hash",
    "DegenerateDesign", "NonFiniteLoss", "PredictorError", "SchemaMismatch",
    "UnsupportedKind", "HeuristicError", "MissingDatasetStats",
    "HEURISTIC_KINDS", "ADAMS_KINDS", "SUPERVISED_KINDS", "BUILT_KINDS",
    "predict_heuristic", "predict_adams", "percentile_of",
    "lasso_subgradient_violation", "loss_and_grad", "MlpParams",
]

MODEL_FORMAT_VERSION = 1


class PredictorKind(enum.Enum):
    LAST_VALUE = "last_value"
    MEDIAN_ALL = "median_all"
    MEDIAN_NONZERO = "median_nonzero"
    MEAN_ALL = "mean_all"
    MEAN_NONZERO = "mean_nonzero"
    ADAMS_P50 = "adams_p50"
    ADAMS_P60 = "adams_p60"
    ADAMS_P70 = "adams_p70"
    OLS = "ols"
    RIDGE = "ridge"
    LASSO = "lasso"
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOST = "gradient_boost"
    MLP = "mlp"
    LSTM = "lstm"  # reserved slot; deliberately not implemented


HEURISTIC_KINDS = (
    PredictorKind.LAST_VALUE,
    PredictorKind.MEDIAN_ALL,
    PredictorKind.MEDIAN_NONZERO,
    PredictorKind.MEAN_ALL,
    PredictorKind.MEAN_NONZERO,
)
ADAMS_KINDS = (
    PredictorKind.ADAMS_P50,
    PredictorKind.ADAMS_P60,
    PredictorKind.ADAMS_P70,
)
SUPERVISED_KINDS = (
    PredictorKind.OLS,
    PredictorKind.RIDGE,
    PredictorKind.LASSO,
    PredictorKind.RANDOM_FOREST,
    PredictorKind.GRADIENT_BOOST,
    PredictorKind.MLP,
)
BUILT_KINDS = HEURISTIC_KINDS + ADAMS_KINDS + SUPERVISED_KINDS

ADAMS_PERCENTILE = {
    PredictorKind.ADAMS_P50: 50.0,
    PredictorKind.ADAMS_P60: 60.0,
    PredictorKind.ADAMS_P70: 70.0,
}

_DEFAULT_HYPERPARAMS: dict[PredictorKind, dict] = {
    PredictorKind.OLS: {},
    PredictorKind.RIDGE: {"lam": 1.0},
    PredictorKind.LASSO: {"alpha": 0.1, "tol": 1e-6},
    PredictorKind.RANDOM_FOREST: {
        "n_trees": 300, "max_depth": 12, "min_leaf": 5, "feature_fraction": 1.0 / 3.0,
    },
    PredictorKind.GRADIENT_BOOST: {
        "n_trees": 300, "max_depth": 3, "learning_rate": 0.05,
        "subsample": 0.8, "min_leaf": 5,
    },
    PredictorKind.MLP: {
        "hidden": 64, "learning_rate": 0.01, "epochs": 300,
        "patience": 25, "val_fraction": 0.1,
    },
}

# A small declared grid (three values per knob) for sensitivity sweeps.
HYPERPARAM_GRID: dict[PredictorKind, dict[str, tuple]] = {
    PredictorKind.RIDGE: {"lam": (0.1, 1.0, 10.0)},
    PredictorKind.LASSO: {"alpha": (0.01, 0.1, 1.0)},
    PredictorKind.GRADIENT_BOOST: {
        "learning_rate": (0.03, 0.05, 0.1), "max_depth": (2, 3, 4),
    },
    PredictorKind.RANDOM_FOREST: {"max_depth": (8, 12, 16)},
}


def validate_hyperparams(kind: PredictorKind, params: Mapping | None) -> dict:
    """Fill defaults and reject unknown keys for the given kind."""
    if kind in ADAMS_KINDS or kind in HEURISTIC_KINDS:
        if params:
            raise PredictorError(f"{kind.value} takes no hyperparameters")
        return {}
    if kind not in _DEFAULT_HYPERPARAMS:
        raise UnsupportedKind(f"no implementation for {kind.value}")
    merged = dict(_DEFAULT_HYPERPARAMS[kind])
    for key, value in (params or {}).items():
        if key not in merged:
            raise PredictorError(f"unknown hyperparameter {key!r} for {kind.value}")
        merged[key] = value
    return merged


def schema_hash(feature_names: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(feature_names).encode("utf-8")).hexdigest()


@dataclass
class TrainedModel:
    """Immutable fitted predictor plus everything needed to reuse it."""

    kind: PredictorKind
    target: str
    hyperparams: dict
    schema: str
    seed: int
    payload: dict
    impl: object | None = field(default=None, repr=False, compare=False)

    def require_impl(self):
        if self.impl is None:
            self.impl = _impl_from_payload(self.kind, self.payload)
        return self.impl

    def dataset_stats(self) -> DatasetStats:
        if self.kind not in HEURISTIC_KINDS and self.kind not in ADAMS_KINDS:
            raise PredictorError("dataset stats only exist on heuristic models")
        return DatasetStats(
            target_mean=self.payload["target_mean"],
            week1_mean=self.payload["week1_mean"],
            week1_values=tuple(self.payload["week1_values"]),
        )


def fit_heuristic(
    kind: PredictorKind,
    training_values: Sequence[float],
    week1_values: Sequence[float],
    target: str = "",
    seed: int = 0,
) -> TrainedModel:
    """Package cohort cold-start statistics for a history-based kind."""
    if kind not in HEURISTIC_KINDS and kind not in ADAMS_KINDS:
        raise UnsupportedKind(f"{kind.value} is not a heuristic kind")
    stats = DatasetStats.from_training(training_values, week1_values)
    payload = {
        "target_mean": stats.target_mean,
        "week1_mean": stats.week1_mean,
        "week1_values": list(stats.week1_values),
    }
    return TrainedModel(kind, target, {}, "", seed, payload)


def predict_history(model: TrainedModel, history: Sequence[float]) -> float:
    """Forecast the next value from a chronological target history."""
    stats = model.dataset_stats()
    if model.kind in ADAMS_KINDS:
        config = AdamsConfig(percentile=ADAMS_PERCENTILE[model.kind])
        return predict_adams(config, history, stats)
    return predict_heuristic(model.kind.name, history, stats.target_mean)


def fit_supervised(
    kind: PredictorKind,
    hyperparams: Mapping | None,
    x: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    seed: int = 0,
    target: str = "",
) -> TrainedModel:
    """Fit a feature-based kind; deterministic for a fixed seed."""
    if kind not in SUPERVISED_KINDS:
        raise UnsupportedKind(f"{kind.value} is not a supervised kind")
    hyper = validate_hyperparams(kind, hyperparams)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise PredictorError("matrix and target row counts differ")
    if x.shape[1] != len(feature_names):
        raise PredictorError("matrix width and feature names differ")

    if kind is PredictorKind.OLS:
        impl = fit_ols(x, y)
        payload = _linear_payload(impl, feature_names)
    elif kind is PredictorKind.RIDGE:
        impl = fit_ridge(x, y, hyper["lam"])
        payload = _linear_payload(impl, feature_names)
    elif kind is PredictorKind.LASSO:
        impl = fit_lasso(x, y, hyper["alpha"], tol=hyper["tol"])
        payload = _linear_payload(impl, feature_names)
    elif kind is PredictorKind.RANDOM_FOREST:
        impl = fit_random_forest(x, y, seed=seed, **hyper)
        payload = {
            "n_features": impl.n_features,
            "trees": [t.to_records() for t in impl.trees],
        }
    elif kind is PredictorKind.GRADIENT_BOOST:
        impl = fit_gradient_boost(x, y, seed=seed, **hyper)
        payload = {
            "n_features": impl.n_features,
            "base_score": impl.base_score,
            "learning_rate": impl.learning_rate,
            "trees": [t.to_records() for t in impl.trees],
        }
    else:  # MLP
        scaler = Standardizer.fit(x)
        net = fit_mlp(scaler.transform(x), y, seed=seed, **hyper)
        impl = (scaler, net)
        payload = {
            "scaler_mean": scaler.mean.tolist(),
            "scaler_scale": scaler.scale.tolist(),
            "w1": net.params.w1.tolist(),
            "b1": net.params.b1.tolist(),
            "w2": net.params.w2.tolist(),
            "b2": net.params.b2,
        }
    return TrainedModel(
        kind, target, hyper, schema_hash(feature_names), seed, payload, impl
    )


def _linear_payload(impl: LinearModel, feature_names: Sequence[str]) -> dict:
    # Coefficients live in a name-keyed map (standardized space); the order
    # list makes the dense vector reconstructible.
    return {
        "coefficients": {
            name: float(c) for name, c in zip(feature_names, impl.coef_std)
        },
        "feature_order": list(feature_names),
        "intercept": impl.intercept,
        "scaler_mean": impl.scaler.mean.tolist(),
        "scaler_scale": impl.scaler.scale.tolist(),
    }


def _impl_from_payload(kind: PredictorKind, payload: dict):
    if kind in (PredictorKind.OLS, PredictorKind.RIDGE, PredictorKind.LASSO):
        order = payload["feature_order"]
        return LinearModel(
            coef_std=np.array([payload["coefficients"][n] for n in order]),
            intercept=payload["intercept"],
            scaler=Standardizer(
                np.array(payload["scaler_mean"]), np.array(payload["scaler_scale"])
            ),
        )
    if kind is PredictorKind.RANDOM_FOREST:
        return RandomForest(
            trees=[Tree.from_records(r) for r in payload["trees"]],
            n_features=payload["n_features"],
        )
    if kind is PredictorKind.GRADIENT_BOOST:
        return GradientBoost(
            base_score=payload["base_score"],
            learning_rate=payload["learning_rate"],
            trees=[Tree.from_records(r) for r in payload["trees"]],
            n_features=payload["n_features"],
        )
    if kind is PredictorKind.MLP:
        scaler = Standardizer(
            np.array(payload["scaler_mean"]), np.array(payload["scaler_scale"])
        )
        net = MlpModel(
            MlpParams(
                w1=np.array(payload["w1"]),
                b1=np.array(payload["b1"]),
                w2=np.array(payload["w2"]),
                b2=payload["b2"],
            )
        )
        return scaler, net
    raise UnsupportedKind(f"cannot rebuild {kind.value}")


def predict_supervised(
    model: TrainedModel,
    x: np.ndarray,
    feature_names: Sequence[str],
) -> np.ndarray:
    """Clamped, finite predictions for one or more feature rows."""
    if model.kind not in SUPERVISED_KINDS:
        raise UnsupportedKind(f"{model.kind.value} does not predict from features")
    if model.schema != schema_hash(feature_names):
        raise SchemaMismatch("feature schema does not match the trained model")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    impl = model.require_impl()
    if model.kind is PredictorKind.MLP:
        scaler, net = impl
        raw = net.predict(scaler.transform(x))
    else:
        raw = impl.predict(x)
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise NonFiniteLoss("non-finite prediction")
    return np.maximum(0.0, raw)


def model_to_json(model: TrainedModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "target": model.target,
        "hyperparams": model.hyperparams,
        "schema_hash": model.schema,
        "seed": model.seed,
        "payload": model.payload,
    }


def model_from_json(data: Mapping) -> TrainedModel:
    if data.get("version") != MODEL_FORMAT_VERSION:
        raise PredictorError(f"unsupported model format: {data.get('version')!r}")
    return TrainedModel(
        kind=PredictorKind(data["kind"]),
        target=data["target"],
        hyperparams=dict(data["hyperparams"]),
        schema=data["schema_hash"],
        seed=data["seed"],
        payload=dict(data["payload"]),
    )
