"""Per student-week feature matrix with group tags.

Every feature at (student, week t) is a function of panel data at weeks
<= t only, so one-step forecasts trained on these rows are causal by
construction. Zero-minute weeks are real observations: they feed the gap
features and every lag/statistic sequence.

Groups: AFM (learner-state estimates), ACTIVITY (raw weekly measures, lags,
changes, summary stats), GAPS (zero-minute week patterns), PRIOR (early
achievement, consistency, improvement). Missing entries (insufficient
history, no practice that week) are imputed with 0 plus a per-feature
missingness indicator column.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from .afm import LearnerState
from .ingest import StudentWeek
from .weeks import WeekId


class FeatureError(Exception):
    pass


class InsufficientHistory(FeatureError):
    pass


class FeatureGroup(enum.Enum):
    AFM = "AFM"
    ACTIVITY = "ACTIVITY"
    GAPS = "GAPS"
    PRIOR = "PRIOR"


# Current-week raw measures; ablation treats these as an always-on base set
# outside the four removable groups.
BASE_FEATURES = (
    "minutes_current",
    "skills_current",
    "problems_current",
    "opportunities_current",
)

LAG_QUANTITIES = ("minutes", "problems", "opportunities", "skills")
CHANGE_QUANTITIES = ("minutes", "problems", "skills")


@dataclass
class FeatureConfig:
    lags: tuple[int, ...] = (1, 2, 3, 4, 8, 12, 16)
    gap_lookback: int = 3
    early_weeks: int = 3
    late_weeks: int = 3
    change_window: int = 4

    def __post_init__(self) -> None:
        if any(k <= 0 for k in self.lags) or list(self.lags) != sorted(self.lags):
            raise ValueError("lags must be positive and sorted")


@dataclass(frozen=True)
class FeatureSchema:
    """Fixed feature order plus group tags and missing-capability flags."""

    names: tuple[str, ...]
    groups: Mapping[str, FeatureGroup]
    missing_capable: frozenset[str]

    def imputed_names(self) -> tuple[str, ...]:
        out = list(self.names)
        for name in self.names:
            if name in self.missing_capable:
                out.append(f"{name}_missing")
        return tuple(out)

    def imputed_groups(self) -> dict[str, FeatureGroup]:
        groups = {n: self.groups[n] for n in self.names}
        for name in self.names:
            if name in self.missing_capable:
                # Indicator columns are bookkeeping about observed activity
                # history, hence tagged ACTIVITY.
                groups[f"{name}_missing"] = FeatureGroup.ACTIVITY
        return groups


def build_schema(config: FeatureConfig | None = None) -> FeatureSchema:
    config = config or FeatureConfig()
    names: list[str] = []
    groups: dict[str, FeatureGroup] = {}
    missing: set[str] = set()

    def add(name: str, group: FeatureGroup, can_miss: bool = False) -> None:
        names.append(name)
        groups[name] = group
        if can_miss:
            missing.add(name)

    for name in BASE_FEATURES:
        add(name, FeatureGroup.ACTIVITY)
    add("skills_cum_current", FeatureGroup.ACTIVITY)
    for quantity in LAG_QUANTITIES:
        for k in config.lags:
            add(f"{quantity}_lag{k}", FeatureGroup.ACTIVITY, can_miss=True)
    for quantity in CHANGE_QUANTITIES:
        add(f"recent_change_{quantity}", FeatureGroup.ACTIVITY, can_miss=True)
        add(f"recent_change_{quantity}_avg{config.change_window}",
            FeatureGroup.ACTIVITY, can_miss=True)
    for stat in ("mean", "std", "range", "iqr"):
        add(f"minutes_{stat}", FeatureGroup.ACTIVITY)
    for stat in ("mean", "sum", "std"):
        add(f"problems_{stat}", FeatureGroup.ACTIVITY)

    add("has_recent_gap", FeatureGroup.GAPS)
    add("weeks_since_gap", FeatureGroup.GAPS)
    add("gap_count", FeatureGroup.GAPS)

    add("start_quartile", FeatureGroup.PRIOR)
    add("consistency_score", FeatureGroup.PRIOR, can_miss=True)
    add("improvement", FeatureGroup.PRIOR, can_miss=True)

    add("student_ability", FeatureGroup.AFM, can_miss=True)
    add("student_learning_rate", FeatureGroup.AFM, can_miss=True)
    add("student_week_difficulty", FeatureGroup.AFM, can_miss=True)

    return FeatureSchema(tuple(names), groups, frozenset(missing))


@dataclass
class FeatureVector:
    """One x row; ``None`` marks a missing value prior to imputation."""

    student_id: str
    week: WeekId
    values: dict[str, float | None]


@dataclass
class FeatureMatrix:
    rows: list[FeatureVector]
    schema: FeatureSchema

    def imputed(self) -> tuple[np.ndarray, tuple[str, ...], dict[str, FeatureGroup]]:
        """Dense matrix with zero-imputation plus missingness indicators."""
        names = self.schema.imputed_names()
        col = {n: i for i, n in enumerate(names)}
        x = np.zeros((len(self.rows), len(names)))
        for r, row in enumerate(self.rows):
            for name in self.schema.names:
                v = row.values[name]
                if v is None:
                    x[r, col[f"{name}_missing"]] = 1.0
                else:
                    x[r, col[name]] = v
        return x, names, self.schema.imputed_groups()

    def index(self) -> dict[tuple[str, str], int]:
        return {(row.student_id, str(row.week)): i for i, row in enumerate(self.rows)}


def population_std(values: Sequence[float]) -> float:
    arr = np.asarray(values, dtype=float)
    return float(np.sqrt(np.mean((arr - arr.mean()) ** 2)))


def consistency_score(skill_history: Sequence[float]) -> float:
    """1/(1 + CV) of weekly new-skill counts; degenerate mean maps to 0.

    Needs at least two observed weeks (``InsufficientHistory`` otherwise);
    callers treat that as a missing value.
    """
    if len(skill_history) < 2:
        raise InsufficientHistory("consistency needs >= 2 observed weeks")
    mean = float(np.mean(skill_history))
    if mean == 0.0:
        return 0.0
    return 1.0 / (1.0 + population_std(skill_history) / mean)


def quartile_boundaries(totals: Sequence[float]) -> tuple[float, float, float]:
    q1, q2, q3 = np.percentile(np.asarray(totals, dtype=float), [25.0, 50.0, 75.0])
    return float(q1), float(q2), float(q3)


def assign_quartile(value: float, boundaries: tuple[float, float, float]) -> int:
    """Quartile index with ties going to the lower quartile."""
    q1, q2, q3 = boundaries
    if value <= q1:
        return 1
    if value <= q2:
        return 2
    if value <= q3:
        return 3
    return 4


def start_quartile(
    totals_by_student: Mapping[str, float],
    reference: Mapping[str, float] | None = None,
) -> dict[str, int]:
    """Cohort quartile of early skill totals, 1..4 per student.

    Boundaries come from ``reference`` (training students) when given, so
    holdout students are ranked against the development cohort.
    """
    ref_values = list((reference or totals_by_student).values())
    if not ref_values:
        raise FeatureError("no reference totals for quartile boundaries")
    bounds = quartile_boundaries(ref_values)
    return {s: assign_quartile(v, bounds) for s, v in totals_by_student.items()}


def early_skill_totals(
    panel: Sequence[StudentWeek], early_weeks: int = 3
) -> dict[str, float]:
    """Per student, new skills mastered over the first ``early_weeks`` observed weeks."""
    by_student: dict[str, list[StudentWeek]] = {}
    for row in panel:
        by_student.setdefault(row.student_id, []).append(row)
    totals: dict[str, float] = {}
    for student, rows in by_student.items():
        rows.sort(key=lambda r: r.week)
        totals[student] = float(sum(r.y_skill or 0 for r in rows[:early_weeks]))
    return totals


def _iqr(values: np.ndarray) -> float:
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(q3 - q1)


def build_matrix(
    panel: Sequence[StudentWeek],
    afm_by_week: Mapping[WeekId, Mapping[str, LearnerState]],
    config: FeatureConfig | None = None,
    quartile_reference: Mapping[str, float] | None = None,
) -> FeatureMatrix:
    """One feature row per panel row, ordered by (student, week).

    ``afm_by_week`` maps week -> student -> learner state for students who
    practiced that week. ``quartile_reference`` supplies the early-skill
    totals that fix the start-quartile boundaries (training students only in
    benchmark runs); by default the panel's own students are used.
    """
    config = config or FeatureConfig()
    schema = build_schema(config)
    if any(r.y_skill is None for r in panel):
        raise FeatureError("panel targets must be built before features")

    reference = dict(
        quartile_reference
        if quartile_reference is not None
        else early_skill_totals(panel, config.early_weeks)
    )
    bounds = quartile_boundaries(list(reference.values()))

    by_student: dict[str, list[StudentWeek]] = {}
    for row in panel:
        by_student.setdefault(row.student_id, []).append(row)

    rows: list[FeatureVector] = []
    for student in sorted(by_student):
        srows = sorted(by_student[student], key=lambda r: r.week)
        minutes = np.array([r.minutes for r in srows])
        problems = np.array([float(r.problems) for r in srows])
        opportunities = np.array([float(r.opportunities) for r in srows])
        skills = np.array([float(r.y_skill) for r in srows])
        skills_cum = np.array([float(r.skills_cum) for r in srows])
        series = {
            "minutes": minutes,
            "problems": problems,
            "opportunities": opportunities,
            "skills": skills,
        }
        zero_idx = [i for i, m in enumerate(minutes) if m == 0.0]

        for t in range(len(srows)):
            n = t + 1
            v: dict[str, float | None] = {}
            v["minutes_current"] = minutes[t]
            v["skills_current"] = skills[t]
            v["problems_current"] = problems[t]
            v["opportunities_current"] = opportunities[t]
            v["skills_cum_current"] = skills_cum[t]

            for quantity, arr in series.items():
                for k in config.lags:
                    v[f"{quantity}_lag{k}"] = arr[t - k] if t - k >= 0 else None

            for quantity in CHANGE_QUANTITIES:
                arr = series[quantity]
                if n < 2:
                    v[f"recent_change_{quantity}"] = None
                    v[f"recent_change_{quantity}_avg{config.change_window}"] = None
                else:
                    deltas = np.diff(arr[: t + 1])
                    v[f"recent_change_{quantity}"] = float(deltas[-1])
                    window = deltas[-config.change_window:]
                    v[f"recent_change_{quantity}_avg{config.change_window}"] = float(
                        np.mean(window)
                    )

            hist_m = minutes[: t + 1]
            v["minutes_mean"] = float(np.mean(hist_m))
            v["minutes_std"] = population_std(hist_m)
            v["minutes_range"] = float(np.max(hist_m) - np.min(hist_m))
            v["minutes_iqr"] = _iqr(hist_m)
            hist_p = problems[: t + 1]
            v["problems_mean"] = float(np.mean(hist_p))
            v["problems_sum"] = float(np.sum(hist_p))
            v["problems_std"] = population_std(hist_p)

            gaps_so_far = [i for i in zero_idx if i <= t]
            v["gap_count"] = float(len(gaps_so_far))
            if gaps_so_far:
                since = t - gaps_so_far[-1]
            else:
                since = n  # one beyond the longest possible within history
            v["weeks_since_gap"] = float(since)
            recent_lo = max(0, t - config.gap_lookback + 1)
            v["has_recent_gap"] = float(any(recent_lo <= i <= t for i in gaps_so_far))

            early_total = float(np.sum(skills[: min(config.early_weeks, n)]))
            v["start_quartile"] = float(assign_quartile(early_total, bounds))
            try:
                v["consistency_score"] = consistency_score(skills[: t + 1])
            except InsufficientHistory:
                v["consistency_score"] = None
            if n < 2:
                v["improvement"] = None
            else:
                early = skills[: min(config.early_weeks, n)]
                late = skills[max(0, n - config.late_weeks): n]
                v["improvement"] = float(np.mean(late) - np.mean(early))

            state = afm_by_week.get(srows[t].week, {}).get(student)
            v["student_ability"] = state.ability if state else None
            v["student_learning_rate"] = state.learning_rate if state else None
            v["student_week_difficulty"] = state.week_difficulty if state else None

            ordered = {name: v[name] for name in schema.names}
            rows.append(FeatureVector(student, srows[t].week, ordered))
    return FeatureMatrix(rows, schema)


def write_matrix(matrix: FeatureMatrix, stream: IO[str]) -> dict:
    """Imputed matrix as CSV; returns the sidecar schema dict."""
    x, names, groups = matrix.imputed()
    writer = csv.writer(stream)
    writer.writerow(["student_id", "week", *names])
    for row, values in zip(matrix.rows, x):
        writer.writerow([row.student_id, str(row.week), *[repr(float(v)) for v in values]])
    return {
        "features": {
            name: {
                "group": groups[name].value,
                "imputation_flag": name.endswith("_missing"),
            }
            for name in names
        },
        "order": list(names),
    }


@dataclass
class ImputedMatrix:
    """Matrix as consumed by supervised predictors."""

    student_ids: list[str]
    weeks: list[WeekId]
    x: np.ndarray
    feature_names: tuple[str, ...]
    groups: dict[str, FeatureGroup]
    row_index: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.row_index:
            self.row_index = {
                (s, str(w)): i for i, (s, w) in enumerate(zip(self.student_ids, self.weeks))
            }
        if not np.all(np.isfinite(self.x)):
            raise FeatureError("imputed matrix contains non-finite values")


def to_imputed(matrix: FeatureMatrix) -> ImputedMatrix:
    x, names, groups = matrix.imputed()
    return ImputedMatrix(
        student_ids=[r.student_id for r in matrix.rows],
        weeks=[r.week for r in matrix.rows],
        x=x,
        feature_names=names,
        groups=groups,
    )


def read_matrix(stream: IO[str], schema: Mapping) -> ImputedMatrix:
    reader = csv.reader(stream)
    header = next(reader)
    names = tuple(header[2:])
    if list(names) != list(schema["order"]):
        raise FeatureError("matrix columns do not match sidecar schema")
    students: list[str] = []
    weeks: list[WeekId] = []
    values: list[list[float]] = []
    for row in reader:
        students.append(row[0])
        weeks.append(WeekId.parse(row[1]))
        values.append([float(c) for c in row[2:]])
    groups = {
        name: FeatureGroup(schema["features"][name]["group"]) for name in names
    }
    return ImputedMatrix(
        student_ids=students,
        weeks=weeks,
        x=np.asarray(values, dtype=float) if values else np.zeros((0, len(names))),
        feature_names=names,
        groups=groups,
    )
