"""Loaded artifacts and per-student context assembly for the service."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .._util import read_json
from ..evaluation import panel_by_student, target_value
from ..features import ImputedMatrix, read_matrix
from ..ingest import StudentWeek, read_panel
from ..predictors import (
    SUPERVISED_KINDS,
    TrainedModel,
    model_from_json,
    predict_history,
    predict_supervised,
)
from ..weeks import WeekId
from .policy import DEFAULT_BLOCKED_PHRASES, StudentContext
from .scenarios import Scenario, default_scenarios, load_scenarios
from .schemas import GoalType
from .store import GoalStore


class UnknownStudent(KeyError):
    pass


class NoTrainedModel(RuntimeError):
    pass


@dataclass
class ServiceConfig:
    panel_path: str | None = None
    matrix_path: str | None = None
    matrix_schema_path: str | None = None
    model_paths: dict[str, str] = field(default_factory=dict)  # target -> path
    scenarios_path: str | None = None
    store_path: str | None = None
    static_dir: str | None = None
    blocked_phrases: tuple[str, ...] = DEFAULT_BLOCKED_PHRASES
    session_seed: int = 0


def _consistency(values: Sequence[float]) -> float:
    if len(values) < 2:
        return 0.0
    mean = float(np.mean(values))
    if mean == 0.0:
        return 0.0
    std = float(np.sqrt(np.mean((np.asarray(values) - mean) ** 2)))
    return 1.0 / (1.0 + std / mean)


def _recent_trend(values: Sequence[float], window: int = 4) -> float:
    if len(values) < 2:
        return 0.0
    deltas = np.diff(np.asarray(values, dtype=float))
    return float(np.mean(deltas[-window:]))


class AppState:
    """Immutable-after-load artifacts plus the mutable goal store."""

    def __init__(
        self,
        panel: Sequence[StudentWeek] = (),
        models: dict[GoalType, TrainedModel] | None = None,
        matrix: ImputedMatrix | None = None,
        store: GoalStore | None = None,
        scenarios: Sequence[Scenario] | None = None,
        blocked_phrases: tuple[str, ...] = DEFAULT_BLOCKED_PHRASES,
        session_seed: int = 0,
        static_dir: str | None = None,
    ) -> None:
        self.panel = list(panel)
        self.by_student = panel_by_student(self.panel)
        self.models = models or {}
        self.matrix = matrix
        self.store = store or GoalStore()
        self.scenarios = list(scenarios if scenarios is not None else default_scenarios())
        self.scenario_by_student = {s.student_id: s for s in self.scenarios}
        self.blocked_phrases = tuple(blocked_phrases)
        self.session_seed = session_seed
        self.static_dir = static_dir
        for scenario in self.scenarios:
            if not self.store.cycles_for(scenario.student_id):
                self.store.seed(list(scenario.model.cycles))
        self._consistency_cohort = {
            goal: np.sort(
                [
                    _consistency([target_value(r, goal.value) for r in rows])
                    for rows in self.by_student.values()
                    if len(rows) >= 2
                ]
            )
            for goal in GoalType
        }

    @classmethod
    def from_config(cls, config: ServiceConfig) -> "AppState":
        panel: list[StudentWeek] = []
        if config.panel_path:
            with open(config.panel_path, encoding="utf-8") as f:
                panel = read_panel(f)
        matrix = None
        if config.matrix_path and config.matrix_schema_path:
            schema = read_json(config.matrix_schema_path)
            with open(config.matrix_path, encoding="utf-8") as f:
                matrix = read_matrix(f, schema)
        models: dict[GoalType, TrainedModel] = {}
        for target, path in config.model_paths.items():
            models[GoalType(target)] = model_from_json(read_json(path))
        scenarios = (
            load_scenarios(config.scenarios_path)
            if config.scenarios_path
            else default_scenarios()
        )
        return cls(
            panel=panel,
            models=models,
            matrix=matrix,
            store=GoalStore(config.store_path),
            scenarios=scenarios,
            blocked_phrases=tuple(config.blocked_phrases),
            session_seed=config.session_seed,
            static_dir=config.static_dir,
        )

    # --- lookups -----------------------------------------------------------

    def knows_student(self, student_id: str) -> bool:
        return student_id in self.by_student or student_id in self.scenario_by_student

    def consistency_quantile(self, goal: GoalType, score: float) -> float:
        cohort = self._consistency_cohort.get(goal)
        if cohort is None or len(cohort) == 0:
            return 0.5
        return float(np.searchsorted(cohort, score, side="right") / len(cohort))

    def forecast(self, student_id: str, goal: GoalType) -> tuple[float, str, WeekId]:
        """(prediction, model kind, predicted week) for the next week."""
        scenario = self.scenario_by_student.get(student_id)
        if scenario is not None:
            if scenario.model.goal_type != goal and scenario.context is not None:
                pass  # scenario forecasts apply to their own goal type only
            week = WeekId.parse(scenario.model.cycles[-1].period_end).next()
            return float(scenario.context.forecast), "scenario_fixture", week
        rows = self.by_student.get(student_id)
        if rows is None:
            raise UnknownStudent(student_id)
        model = self.models.get(goal)
        if model is None:
            raise NoTrainedModel(f"no trained model loaded for {goal.value}")
        week = rows[-1].week.next()
        if model.kind in SUPERVISED_KINDS:
            if self.matrix is None:
                raise NoTrainedModel("supervised model loaded without a matrix")
            row = self.matrix.row_index[(student_id, str(rows[-1].week))]
            pred = predict_supervised(
                model, self.matrix.x[row], self.matrix.feature_names
            )[0]
        else:
            history = [target_value(r, goal.value) for r in rows]
            pred = predict_history(model, history)
        return float(pred), model.kind.value, week

    def policy_context(self, student_id: str, goal: GoalType) -> StudentContext | None:
        """Context for the mapping rule; ``None`` when no completed cycles."""
        cycles = [
            c
            for c in self.store.cycles_for(student_id)
            if c.completed and c.goal_type == goal
        ]
        if not cycles:
            return None
        last = cycles[-1]
        forecast, _, _ = self.forecast(student_id, goal)
        scenario = self.scenario_by_student.get(student_id)
        if scenario is not None:
            ctx = scenario.context
            return StudentContext(
                forecast=forecast,
                last_target=last.target_value,
                last_achieved=last.achieved_value,
                consistency_score=ctx.consistency_score,
                consistency_quantile=ctx.consistency_quantile,
                recent_trend=ctx.recent_trend,
                ability=ctx.ability,
                week_difficulty=ctx.week_difficulty,
            )
        rows = self.by_student[student_id]
        values = [target_value(r, goal.value) for r in rows]
        score = _consistency(values)
        ability = week_difficulty = None
        if self.matrix is not None:
            row = self.matrix.row_index[(student_id, str(rows[-1].week))]
            names = self.matrix.feature_names
            col = {n: i for i, n in enumerate(names)}
            if self.matrix.x[row, col["student_ability_missing"]] == 0.0:
                ability = float(self.matrix.x[row, col["student_ability"]])
                week_difficulty = float(
                    self.matrix.x[row, col["student_week_difficulty"]]
                )
        return StudentContext(
            forecast=forecast,
            last_target=last.target_value,
            last_achieved=last.achieved_value,
            consistency_score=score,
            consistency_quantile=self.consistency_quantile(goal, score),
            recent_trend=_recent_trend(values),
            ability=ability,
            week_difficulty=week_difficulty,
        )

    def next_goal_period(self, student_id: str) -> WeekId:
        cycles = self.store.cycles_for(student_id)
        if cycles:
            return WeekId.parse(cycles[-1].period_end).next()
        rows = self.by_student.get(student_id)
        if rows:
            return rows[-1].week.next()
        return WeekId.parse("2012-W20")
