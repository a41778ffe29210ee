"""History-only baselines: carry-forward, mean/median variants, percentile rules.

The percentile rules predict the p-th percentile of the student's nine most
recent recorded values, with a staged cold start while history is short:
week 1 uses the cohort's week-1 average, week 2 anchors on the student's
week-1 value plus the cohort's (P_p - P50) week-1 gap, and later short-history
weeks move the previous prediction p/100 of the way toward the student's best
value so far. Zero-activity weeks count as recorded values; only the
"nonzero" mean/median variants skip them, by definition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


class HeuristicError(Exception):
    pass


class MissingDatasetStats(HeuristicError):
    pass


@dataclass(frozen=True)
class AdamsConfig:
    percentile: float = 60.0
    window: int = 9

    def __post_init__(self) -> None:
        if not 0 < self.percentile < 100:
            raise ValueError("percentile must be in (0, 100)")
        if self.window < 1:
            raise ValueError("window must be >= 1")


@dataclass(frozen=True)
class DatasetStats:
    """Cohort statistics for cold starts, computed on development students only."""

    target_mean: float
    week1_mean: float
    week1_values: tuple[float, ...]

    @classmethod
    def from_training(
        cls, all_values: Sequence[float], week1_values: Sequence[float]
    ) -> "DatasetStats":
        if len(all_values) == 0 or len(week1_values) == 0:
            raise MissingDatasetStats("empty training data for dataset stats")
        return cls(
            target_mean=float(np.mean(all_values)),
            week1_mean=float(np.mean(week1_values)),
            week1_values=tuple(float(v) for v in week1_values),
        )


def _clamp(value: float) -> float:
    return max(0.0, float(value))


def predict_heuristic(
    kind: str, history: Sequence[float], fallback_mean: float
) -> float:
    """One-step forecast from the student's own past values.

    ``history`` is chronological; an empty effective history falls back to
    the training-set target mean. Results are clamped at zero.
    """
    values = [float(v) for v in history]
    if kind == "LAST_VALUE":
        effective = values
    elif kind in ("MEDIAN_ALL", "MEAN_ALL"):
        effective = values
    elif kind in ("MEDIAN_NONZERO", "MEAN_NONZERO"):
        effective = [v for v in values if v > 0]
    else:
        raise ValueError(f"not a heuristic kind: {kind}")
    if not effective:
        return _clamp(fallback_mean)
    if kind == "LAST_VALUE":
        return _clamp(effective[-1])
    if kind.startswith("MEDIAN"):
        return _clamp(float(np.median(effective)))
    return _clamp(float(np.mean(effective)))


def percentile_of(values: Sequence[float], p: float) -> float:
    """Linear-interpolation percentile (rank p*(n-1)/100)."""
    return float(np.percentile(np.asarray(values, dtype=float), p))


def predict_adams(
    config: AdamsConfig, history: Sequence[float], stats: DatasetStats
) -> float:
    """Staged percentile forecast for the week after ``history`` ends."""
    if stats is None:
        raise MissingDatasetStats("Adams prediction requires dataset stats")
    values = [float(v) for v in history]
    p = config.percentile
    if len(values) >= config.window:
        return _clamp(percentile_of(values[-config.window:], p))
    if not values:
        return _clamp(stats.week1_mean)
    gap = percentile_of(stats.week1_values, p) - percentile_of(stats.week1_values, 50.0)
    pred = values[0] + gap
    for k in range(2, len(values) + 1):
        best = max(values[:k])
        pred = pred + (p / 100.0) * (best - pred)
    return _clamp(pred)
