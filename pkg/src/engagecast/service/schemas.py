"""Request/response models; the wire contract for service and dashboard."""

from __future__ import annotations

import enum

from pydantic import BaseModel, Field


class GoalType(str, enum.Enum):
    MINUTES = "minutes"
    SKILLS = "skills"


class Variant(str, enum.Enum):
    NONE = "none"
    VALUE_ONLY = "value_only"
    VALUE_PLUS_EXPLANATION = "value_plus_explanation"


class GoalSource(str, enum.Enum):
    ACCEPTED = "accepted"
    ADJUSTED = "adjusted"
    MANUAL = "manual"


class Intuition(str, enum.Enum):
    INTUITIVE = "intuitive"
    COUNTER_INTUITIVE = "counter_intuitive"


class ForecastResponse(BaseModel):
    student_id: str
    target: GoalType
    prediction: float = Field(ge=0)
    model_kind: str
    week: str


class GoalCycleModel(BaseModel):
    student_id: str
    cycle_index: int = Field(ge=1)
    goal_type: GoalType
    target_value: float = Field(gt=0)
    achieved_value: float = Field(ge=0)
    period_start: str
    period_end: str
    completed: bool
    source: GoalSource = GoalSource.MANUAL

    @property
    def percent_achieved(self) -> int:
        return round(self.achieved_value / self.target_value * 100)


class CitedFeature(BaseModel):
    feature_name: str
    value: float


class RecommendationRequest(BaseModel):
    student_id: str
    goal_type: GoalType
    variant: Variant


class RecommendationResponse(BaseModel):
    goal_type: GoalType
    variant: Variant
    value: float | None = None
    direction: str | None = None  # raise | lower | hold
    explanation: str | None = None
    cited_features: list[CitedFeature] = Field(default_factory=list)


class ScenarioModel(BaseModel):
    scenario_id: str
    student_id: str
    title: str
    goal_type: GoalType
    intuition: Intuition
    cycles: list[GoalCycleModel]
    expected_direction: str


class GoalRequest(BaseModel):
    student_id: str
    goal_type: GoalType
    value: float
    source: GoalSource


class StudentSummary(BaseModel):
    student_id: str
    first_week: str
    last_week: str
    weeks_observed: int
    minutes_recent: list[float]
    skills_recent: list[float]


class ErrorResponse(BaseModel):
    detail: str
