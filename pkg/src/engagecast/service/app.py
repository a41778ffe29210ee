"""FastAPI application over the loaded artifacts."""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.staticfiles import StaticFiles

from ..evaluation import target_value
from .policy import apply_phrase_filter, recommend
from .scenarios import scenario_order
from .schemas import (
    ErrorResponse,
    ForecastResponse,
    GoalCycleModel,
    GoalRequest,
    GoalType,
    RecommendationRequest,
    RecommendationResponse,
    ScenarioModel,
    StudentSummary,
    Variant,
)
from .state import AppState, NoTrainedModel, UnknownStudent


def create_app(state: AppState) -> FastAPI:
    app = FastAPI(title="engagecast", version="0.1.0")
    app.state.engagecast = state

    @app.get(
        "/students/{student_id}/forecast",
        response_model=ForecastResponse,
        responses={404: {"model": ErrorResponse}, 409: {"model": ErrorResponse}},
    )
    def forecast(student_id: str, target: GoalType = Query(GoalType.MINUTES)):
        if not state.knows_student(student_id):
            raise HTTPException(404, f"unknown student {student_id!r}")
        try:
            prediction, kind, week = state.forecast(student_id, target)
        except NoTrainedModel as exc:
            raise HTTPException(409, str(exc)) from exc
        except UnknownStudent as exc:
            raise HTTPException(404, f"unknown student {student_id!r}") from exc
        return ForecastResponse(
            student_id=student_id,
            target=target,
            prediction=prediction,
            model_kind=kind,
            week=str(week),
        )

    @app.post(
        "/recommendation",
        response_model=RecommendationResponse,
        responses={404: {"model": ErrorResponse}, 422: {"model": ErrorResponse}},
    )
    def recommendation(request: RecommendationRequest):
        if not state.knows_student(request.student_id):
            raise HTTPException(404, f"unknown student {request.student_id!r}")
        if request.variant is Variant.NONE:
            return RecommendationResponse(
                goal_type=request.goal_type, variant=Variant.NONE
            )
        try:
            ctx = state.policy_context(request.student_id, request.goal_type)
        except NoTrainedModel as exc:
            raise HTTPException(409, str(exc)) from exc
        if ctx is None:
            raise HTTPException(
                422, "no completed goal cycles for this student and goal type"
            )
        result = recommend(request.goal_type, ctx)
        if request.variant is Variant.VALUE_ONLY:
            return RecommendationResponse(
                goal_type=request.goal_type,
                variant=Variant.VALUE_ONLY,
                value=result.value,
                direction=result.direction,
            )
        explanation = apply_phrase_filter(result.explanation, state.blocked_phrases)
        return RecommendationResponse(
            goal_type=request.goal_type,
            variant=Variant.VALUE_PLUS_EXPLANATION,
            value=result.value,
            direction=result.direction,
            explanation=explanation,
            cited_features=result.cited_features,
        )

    @app.get("/scenarios", response_model=list[ScenarioModel])
    def scenarios():
        order = scenario_order(len(state.scenarios), state.session_seed)
        return [state.scenarios[i].model for i in order]

    @app.post(
        "/goals",
        response_model=GoalCycleModel,
        responses={422: {"model": ErrorResponse}},
    )
    def post_goal(request: GoalRequest):
        if request.value <= 0:
            raise HTTPException(422, "goal value must be positive")
        period = state.next_goal_period(request.student_id)
        cycle = GoalCycleModel(
            student_id=request.student_id,
            cycle_index=state.store.next_index(request.student_id),
            goal_type=request.goal_type,
            target_value=request.value,
            achieved_value=0.0,
            period_start=str(period),
            period_end=str(period),
            completed=False,
            source=request.source,
        )
        return state.store.append(cycle)

    @app.get(
        "/students/{student_id}/cycles",
        response_model=list[GoalCycleModel],
        responses={404: {"model": ErrorResponse}},
    )
    def cycles(student_id: str):
        if not state.knows_student(student_id) and not state.store.cycles_for(
            student_id
        ):
            raise HTTPException(404, f"unknown student {student_id!r}")
        return state.store.cycles_for(student_id)

    @app.get(
        "/students/{student_id}/summary",
        response_model=StudentSummary,
        responses={404: {"model": ErrorResponse}},
    )
    def summary(student_id: str, recent_weeks: int = 8):
        rows = state.by_student.get(student_id)
        if rows is None:
            raise HTTPException(404, f"unknown student {student_id!r}")
        recent = rows[-recent_weeks:]
        return StudentSummary(
            student_id=student_id,
            first_week=str(rows[0].week),
            last_week=str(rows[-1].week),
            weeks_observed=len(rows),
            minutes_recent=[target_value(r, "minutes") for r in recent],
            skills_recent=[target_value(r, "skills") for r in recent],
        )

    @app.get("/schema")
    def schema():
        return {
            "forecast_response": ForecastResponse.model_json_schema(),
            "recommendation_request": RecommendationRequest.model_json_schema(),
            "recommendation_response": RecommendationResponse.model_json_schema(),
            "scenario": ScenarioModel.model_json_schema(),
            "goal_request": GoalRequest.model_json_schema(),
            "goal_cycle": GoalCycleModel.model_json_schema(),
            "student_summary": StudentSummary.model_json_schema(),
        }

    if state.static_dir and Path(state.static_dir).is_dir():
        app.mount(
            "/app", StaticFiles(directory=state.static_dir, html=True), name="app"
        )

    return app
