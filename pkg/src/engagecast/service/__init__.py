"""HTTP service exposing forecasts and goal recommendations.

FastAPI wrapper over the core package: forecasts come from a loaded model
artifact plus the student-week panel, recommendations apply a pluggable
forecast-to-goal mapping policy, goal cycles persist to an append-only
journal, and the four demo scenarios (goal type x intuition) are served in
a session-seeded random order.
"""

from .app import create_app
from .state import AppState, ServiceConfig

__all__ = ["create_app", "AppState", "ServiceConfig"]
