"""HTTP service: endpoints, variant contract, policy behavior, persistence."""

from __future__ import annotations

import json

import pytest
from fastapi.testclient import TestClient

from engagecast.evaluation import forecast_loop, training_rows
from engagecast.features import build_matrix, to_imputed
from engagecast.predictors import PredictorKind, fit_heuristic, fit_supervised
from engagecast.service import AppState, create_app
from engagecast.service.policy import StudentContext, recommend
from engagecast.service.schemas import GoalType
from engagecast.service.scenarios import default_scenarios, dump_scenarios, load_scenarios
from engagecast.service.store import GoalStore

from .panels import W0, make_panel


@pytest.fixture()
def panel():
    return make_panel(
        {
            "alice": {"minutes": [30, 40, 50, 30], "skills": [1, 2, 1, 3]},
            "bob": {"minutes": [10, 0, 20, 15], "skills": [0, 0, 1, 1]},
            "cara": {"minutes": [25, 25, 25, 25], "skills": [2, 2, 2, 2]},
        }
    )


def _client(panel, models=None, matrix=None, store=None, session_seed=0):
    state = AppState(
        panel=panel, models=models or {}, matrix=matrix, store=store,
        session_seed=session_seed,
    )
    return TestClient(create_app(state))


def _last_value_models(panel):
    model_min = fit_heuristic(
        PredictorKind.LAST_VALUE, [1.0], [1.0], target="minutes"
    )
    model_sk = fit_heuristic(PredictorKind.LAST_VALUE, [1.0], [1.0], target="skills")
    return {GoalType.MINUTES: model_min, GoalType.SKILLS: model_sk}


# --- forecasts ----------------------------------------------------------------

def test_forecast_last_value(panel):
    client = _client(panel, _last_value_models(panel))
    res = client.get("/students/alice/forecast", params={"target": "minutes"})
    assert res.status_code == 200
    body = res.json()
    assert body["prediction"] == 30.0
    assert body["model_kind"] == "last_value"
    assert body["week"] == str(W0.shift(4))


def test_forecast_unknown_student_404(panel):
    client = _client(panel, _last_value_models(panel))
    assert client.get("/students/ghost/forecast").status_code == 404


def test_forecast_no_model_409(panel):
    client = _client(panel)
    assert client.get("/students/alice/forecast").status_code == 409


def test_forecast_supervised_parity_with_offline_loop(panel):
    matrix = to_imputed(build_matrix(panel, {}))
    x, y = training_rows(panel, matrix, "minutes")
    model = fit_supervised(
        PredictorKind.GRADIENT_BOOST, {"n_trees": 15}, x, y,
        matrix.feature_names, seed=3, target="minutes",
    )
    offline = forecast_loop(model, panel, matrix, "minutes", include_final=True)
    finals = {f.student_id: f for f in offline if f.y_true is None}
    client = _client(panel, {GoalType.MINUTES: model}, matrix=matrix)
    for student, f in finals.items():
        res = client.get(f"/students/{student}/forecast", params={"target": "minutes"})
        assert res.status_code == 200
        body = res.json()
        assert body["prediction"] == pytest.approx(f.y_pred, abs=1e-12)
        assert body["week"] == str(f.week)


# --- recommendations -------------------------------------------------------------

def test_scenario_recommendation_fig1a_style():
    client = _client([])
    res = client.post(
        "/recommendation",
        json={
            "student_id": "scenario:minutes-intuitive",
            "goal_type": "minutes",
            "variant": "value_plus_explanation",
        },
    )
    assert res.status_code == 200
    body = res.json()
    assert body["value"] == 65.0
    assert body["direction"] == "raise"
    assert body["explanation"]
    assert len(body["cited_features"]) >= 1


def test_scenario_recommendation_fig1b_style_cites_consistency():
    client = _client([])
    res = client.post(
        "/recommendation",
        json={
            "student_id": "scenario:minutes-counter",
            "goal_type": "minutes",
            "variant": "value_plus_explanation",
        },
    )
    body = res.json()
    assert res.status_code == 200
    assert body["value"] == 40.0
    assert body["direction"] == "lower"
    cited = [c["feature_name"] for c in body["cited_features"]]
    assert "consistency_score" in cited
    assert "inconsistent" in body["explanation"]


def test_variant_contract():
    client = _client([])
    base = {"student_id": "scenario:skills-intuitive", "goal_type": "skills"}
    none = client.post("/recommendation", json=dict(base, variant="none")).json()
    assert none["value"] is None and none["explanation"] is None
    assert none["cited_features"] == []
    value_only = client.post(
        "/recommendation", json=dict(base, variant="value_only")
    ).json()
    assert value_only["value"] is not None and value_only["explanation"] is None
    full = client.post(
        "/recommendation", json=dict(base, variant="value_plus_explanation")
    ).json()
    assert full["value"] is not None and full["explanation"]
    assert len(full["cited_features"]) >= 1


def test_recommendation_422_without_completed_cycles(panel):
    client = _client(panel, _last_value_models(panel))
    res = client.post(
        "/recommendation",
        json={"student_id": "alice", "goal_type": "minutes",
              "variant": "value_plus_explanation"},
    )
    assert res.status_code == 422


def test_recommendation_panel_student_with_cycles(panel):
    store = GoalStore()
    client = _client(panel, _last_value_models(panel), store=store)
    post = client.post(
        "/goals",
        json={"student_id": "alice", "goal_type": "minutes", "value": 25,
              "source": "manual"},
    )
    assert post.status_code == 200
    # the open cycle is not completed, so recommendations still 422
    res = client.post(
        "/recommendation",
        json={"student_id": "alice", "goal_type": "minutes",
              "variant": "value_only"},
    )
    assert res.status_code == 422


def test_blocked_phrases_absent_in_all_scenarios():
    client = _client([])
    for scenario in client.get("/scenarios").json():
        res = client.post(
            "/recommendation",
            json={
                "student_id": scenario["student_id"],
                "goal_type": scenario["goal_type"],
                "variant": "value_plus_explanation",
            },
        )
        text = res.json()["explanation"].lower()
        assert "low learning rate" not in text


# --- scenarios ---------------------------------------------------------------------

def test_scenarios_2x2_and_seeded_order():
    client = _client([], session_seed=5)
    body = client.get("/scenarios").json()
    assert len(body) == 4
    cells = {(s["goal_type"], s["intuition"]) for s in body}
    assert len(cells) == 4
    again = _client([], session_seed=5).get("/scenarios").json()
    assert [s["scenario_id"] for s in body] == [s["scenario_id"] for s in again]
    orders = {
        tuple(s["scenario_id"] for s in _client([], session_seed=seed).get("/scenarios").json())
        for seed in range(6)
    }
    assert len(orders) > 1


def test_counter_intuitive_direction_opposes_naive_rule():
    for scenario in default_scenarios():
        result = recommend(scenario.model.goal_type, scenario.context)
        naive = (
            "raise"
            if scenario.context.last_achieved >= scenario.context.last_target
            else "lower"
        )
        if scenario.model.intuition.value == "counter_intuitive":
            assert result.direction != naive
        else:
            assert result.direction == naive


def test_scenarios_json_roundtrip(tmp_path):
    scenarios = default_scenarios()
    path = tmp_path / "scenarios.json"
    path.write_text(json.dumps(dump_scenarios(scenarios)), encoding="utf-8")
    back = load_scenarios(path)
    assert [s.model.scenario_id for s in back] == [
        s.model.scenario_id for s in scenarios
    ]


# --- goals ------------------------------------------------------------------------

def test_goal_roundtrip_and_validation(panel):
    client = _client(panel)
    res = client.post(
        "/goals",
        json={"student_id": "bob", "goal_type": "minutes", "value": 45,
              "source": "accepted"},
    )
    assert res.status_code == 200
    stored = res.json()
    assert stored["target_value"] == 45 and stored["source"] == "accepted"
    cycles = client.get("/students/bob/cycles").json()
    assert stored in cycles
    bad = client.post(
        "/goals",
        json={"student_id": "bob", "goal_type": "minutes", "value": 0,
              "source": "adjusted"},
    )
    assert bad.status_code == 422


def test_goal_journal_persists_and_tolerates_torn_tail(tmp_path, panel):
    path = tmp_path / "goals.jsonl"
    store = GoalStore(path)
    client = _client(panel, store=store)
    client.post(
        "/goals",
        json={"student_id": "cara", "goal_type": "skills", "value": 3,
              "source": "manual"},
    )
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"student_id": "cara", "cycle')  # simulated torn write
    reloaded = GoalStore(path)
    cycles = reloaded.cycles_for("cara")
    assert len(cycles) == 1 and cycles[0].target_value == 3


# --- misc -------------------------------------------------------------------------

def test_summary_and_schema(panel):
    client = _client(panel)
    body = client.get("/students/alice/summary").json()
    assert body["weeks_observed"] == 4
    assert body["minutes_recent"][-1] == 30.0
    schema = client.get("/schema").json()
    assert "recommendation_response" in schema
    assert client.get("/students/ghost/summary").status_code == 404


def test_static_dashboard_route(tmp_path):
    static = tmp_path / "dist"
    static.mkdir()
    (static / "index.html").write_text("<html><body>dashboard</body></html>")
    state = AppState(panel=[], static_dir=str(static))
    client = TestClient(create_app(state))
    res = client.get("/app/")
    assert res.status_code == 200
    assert "dashboard" in res.text


def test_static_route_serves_built_frontend_if_present():
    import pathlib

    dist = pathlib.Path(__file__).resolve().parents[1] / "frontend" / "dist"
    if not dist.is_dir():
        pytest.skip("frontend not built")
    state = AppState(panel=[], static_dir=str(dist))
    client = TestClient(create_app(state))
    res = client.get("/app/")
    assert res.status_code == 200
    assert "scenario-select" in res.text
    assert client.get("/app/main.js").status_code == 200
