"""Forecast-to-recommendation mapping and student-safe phrasing.

The default rule (a pluggable policy, not a finding): when the student beat
their last target by 10% or more and their week-to-week stability sits at or
above the cohort median, nudge the goal up (at least one step above the last
target); when stability falls in the bottom cohort quartile, pull the goal
down a step even if the last target was exceeded; otherwise recommend the
forecast itself. Values round to a 5-minute / 1-skill grid. Explanations cite
the features that fired the rule and are filtered against a configurable
blocked-phrase list so nothing discouraging reaches a student-facing screen.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .schemas import CitedFeature, GoalType

RAISE_ACHIEVEMENT_RATIO = 1.10
STEP = {GoalType.MINUTES: 10.0, GoalType.SKILLS: 1.0}
GRANULARITY = {GoalType.MINUTES: 5.0, GoalType.SKILLS: 1.0}
DEFAULT_BLOCKED_PHRASES = ("low learning rate",)

UNIT = {GoalType.MINUTES: "minutes", GoalType.SKILLS: "skills"}


@dataclass
class StudentContext:
    """Everything the mapping rule needs about one student."""

    forecast: float
    last_target: float
    last_achieved: float
    consistency_score: float
    consistency_quantile: float  # cohort quantile in [0, 1]
    recent_trend: float  # mean week-over-week change of the goal quantity
    ability: float | None = None
    week_difficulty: float | None = None


@dataclass
class PolicyResult:
    value: float
    direction: str  # raise | lower | hold
    explanation: str
    cited_features: list[CitedFeature] = field(default_factory=list)


def round_to_grid(value: float, goal_type: GoalType) -> float:
    grid = GRANULARITY[goal_type]
    return max(grid, round(value / grid) * grid)


def recommend(goal_type: GoalType, ctx: StudentContext) -> PolicyResult:
    step = STEP[goal_type]
    unit = UNIT[goal_type]
    achieved_ratio = (
        ctx.last_achieved / ctx.last_target if ctx.last_target > 0 else 0.0
    )

    if ctx.consistency_quantile < 0.25:
        value = min(ctx.forecast, ctx.last_target - step)
        cited = [
            CitedFeature(feature_name="consistency_score", value=ctx.consistency_score),
            CitedFeature(feature_name="recent_trend", value=ctx.recent_trend),
        ]
        explanation = (
            f"The student reached {_fmt(ctx.last_achieved)} {unit} against a "
            f"target of {_fmt(ctx.last_target)}, but their weekly {unit} have "
            "been highly inconsistent across previous goal completion cycles. "
            "A smaller target can help stabilize study habits before raising "
            "the bar again."
        )
    elif achieved_ratio >= RAISE_ACHIEVEMENT_RATIO and ctx.consistency_quantile >= 0.5:
        value = max(ctx.forecast, ctx.last_target + step)
        cited = [
            CitedFeature(feature_name="recent_trend", value=ctx.recent_trend),
            CitedFeature(feature_name="consistency_score", value=ctx.consistency_score),
        ]
        explanation = (
            f"The student exceeded their last goal "
            f"({_fmt(ctx.last_achieved)} of {_fmt(ctx.last_target)} {unit}) and "
            "their weekly pattern has been steady, so a higher target keeps "
            "them challenged without overreaching."
        )
    else:
        value = ctx.forecast
        cited = [CitedFeature(feature_name="recent_trend", value=ctx.recent_trend)]
        if ctx.week_difficulty is not None and ctx.week_difficulty > 0:
            cited.append(
                CitedFeature(
                    feature_name="student_week_difficulty", value=ctx.week_difficulty
                )
            )
            explanation = (
                f"Next week's forecast is {_fmt(value)} {unit}. The student has "
                "been working on harder material than usual, so holding the "
                "goal near the forecast keeps it attainable."
            )
        elif ctx.ability is not None:
            cited.append(
                CitedFeature(feature_name="student_ability", value=ctx.ability)
            )
            explanation = (
                f"Next week's forecast is {_fmt(value)} {unit}, in line with "
                "the student's recent trajectory and estimated skill level."
            )
        else:
            explanation = (
                f"Next week's forecast is {_fmt(value)} {unit}, in line with "
                "the student's recent trajectory."
            )

    value = round_to_grid(value, goal_type)
    if value > ctx.last_target:
        direction = "raise"
    elif value < ctx.last_target:
        direction = "lower"
    else:
        direction = "hold"
    return PolicyResult(
        value=value, direction=direction, explanation=explanation,
        cited_features=cited,
    )


def _fmt(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.1f}"


def apply_phrase_filter(text: str, blocked: tuple[str, ...]) -> str:
    """Enforce the student-facing phrasing rule.

    Templates are written to avoid the blocked list; this guard backstops
    custom lists by excising any blocked phrase that still slips through.
    """
    lowered = text.lower()
    for phrase in blocked:
        if phrase.lower() in lowered:
            idx = lowered.index(phrase.lower())
            text = text[:idx] + "recent progress signals" + text[idx + len(phrase):]
            lowered = text.lower()
    return text
