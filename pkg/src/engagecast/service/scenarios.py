"""The four demo scenarios: goal type x (intuitive vs counter-intuitive).

Each scenario ships a synthetic student with seeded goal cycles plus the
feature context the recommendation policy needs. Counter-intuitive cells are
constructed so the policy's direction opposes the naive "exceeded the goal,
so raise it" heuristic; that invariant is asserted at load time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .policy import StudentContext, recommend
from .schemas import GoalCycleModel, GoalSource, GoalType, Intuition, ScenarioModel


@dataclass
class Scenario:
    model: ScenarioModel
    context: StudentContext

    @property
    def student_id(self) -> str:
        return self.model.student_id


def _cycles(student: str, goal_type: GoalType, specs: Sequence[tuple[float, float]],
            start_week: int = 8) -> list[GoalCycleModel]:
    out = []
    for i, (target, achieved) in enumerate(specs):
        week = f"2012-W{start_week + i:02d}"
        out.append(
            GoalCycleModel(
                student_id=student,
                cycle_index=i + 1,
                goal_type=goal_type,
                target_value=target,
                achieved_value=achieved,
                period_start=week,
                period_end=week,
                completed=True,
                source=GoalSource.MANUAL,
            )
        )
    return out


def default_scenarios() -> list[Scenario]:
    scenarios = [
        Scenario(
            ScenarioModel(
                scenario_id="minutes_intuitive",
                student_id="scenario:minutes-intuitive",
                title="Steady climber (minutes practiced)",
                goal_type=GoalType.MINUTES,
                intuition=Intuition.INTUITIVE,
                cycles=_cycles(
                    "scenario:minutes-intuitive",
                    GoalType.MINUTES,
                    [(45, 48), (50, 52), (55, 66)],
                ),
                expected_direction="raise",
            ),
            StudentContext(
                forecast=62.0,
                last_target=55.0,
                last_achieved=66.0,
                consistency_score=0.82,
                consistency_quantile=0.70,
                recent_trend=4.5,
                ability=0.6,
                week_difficulty=-0.2,
            ),
        ),
        Scenario(
            ScenarioModel(
                scenario_id="minutes_counter",
                student_id="scenario:minutes-counter",
                title="Streaky performer (minutes practiced)",
                goal_type=GoalType.MINUTES,
                intuition=Intuition.COUNTER_INTUITIVE,
                cycles=_cycles(
                    "scenario:minutes-counter",
                    GoalType.MINUTES,
                    [(50, 75), (50, 12), (50, 70)],
                ),
                expected_direction="lower",
            ),
            StudentContext(
                forecast=55.0,
                last_target=50.0,
                last_achieved=70.0,
                consistency_score=0.31,
                consistency_quantile=0.08,
                recent_trend=-1.0,
                ability=0.2,
                week_difficulty=0.1,
            ),
        ),
        Scenario(
            ScenarioModel(
                scenario_id="skills_intuitive",
                student_id="scenario:skills-intuitive",
                title="Consistent learner (skills mastered)",
                goal_type=GoalType.SKILLS,
                intuition=Intuition.INTUITIVE,
                cycles=_cycles(
                    "scenario:skills-intuitive",
                    GoalType.SKILLS,
                    [(3, 3), (4, 4), (4, 5)],
                ),
                expected_direction="raise",
            ),
            StudentContext(
                forecast=4.6,
                last_target=4.0,
                last_achieved=5.0,
                consistency_score=0.77,
                consistency_quantile=0.65,
                recent_trend=0.7,
                ability=0.9,
                week_difficulty=-0.4,
            ),
        ),
        Scenario(
            ScenarioModel(
                scenario_id="skills_counter",
                student_id="scenario:skills-counter",
                title="Boom-and-bust learner (skills mastered)",
                goal_type=GoalType.SKILLS,
                intuition=Intuition.COUNTER_INTUITIVE,
                cycles=_cycles(
                    "scenario:skills-counter",
                    GoalType.SKILLS,
                    [(5, 9), (6, 0), (6, 8)],
                ),
                expected_direction="lower",
            ),
            StudentContext(
                forecast=7.0,
                last_target=6.0,
                last_achieved=8.0,
                consistency_score=0.28,
                consistency_quantile=0.05,
                recent_trend=0.3,
                ability=1.1,
                week_difficulty=0.6,
            ),
        ),
    ]
    validate_scenarios(scenarios)
    return scenarios


def validate_scenarios(scenarios: Sequence[Scenario]) -> None:
    """Assert the 2x2 structure and the counter-intuition contract."""
    cells = {(s.model.goal_type, s.model.intuition) for s in scenarios}
    if len(scenarios) != 4 or len(cells) != 4:
        raise ValueError("scenario set must cover the 2x2 design exactly once")
    for s in scenarios:
        result = recommend(s.model.goal_type, s.context)
        if result.direction != s.model.expected_direction:
            raise ValueError(
                f"{s.model.scenario_id}: policy direction {result.direction!r} "
                f"!= expected {s.model.expected_direction!r}"
            )
        naive = "raise" if s.context.last_achieved >= s.context.last_target else "lower"
        if s.model.intuition is Intuition.COUNTER_INTUITIVE and result.direction == naive:
            raise ValueError(
                f"{s.model.scenario_id}: counter-intuitive cell agrees with the "
                "naive exceeded-goal heuristic"
            )


def scenario_order(n: int, session_seed: int) -> list[int]:
    return list(np.random.default_rng(session_seed).permutation(n))


def load_scenarios(path: str | Path) -> list[Scenario]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    scenarios = []
    for item in data:
        model = ScenarioModel.model_validate(item["scenario"])
        context = StudentContext(**item["context"])
        scenarios.append(Scenario(model, context))
    validate_scenarios(scenarios)
    return scenarios


def dump_scenarios(scenarios: Sequence[Scenario]) -> list[dict]:
    return [
        {
            "scenario": s.model.model_dump(mode="json"),
            "context": vars(s.context),
        }
        for s in scenarios
    ]
