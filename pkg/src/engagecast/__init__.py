"""Weekly engagement forecasting for tutoring-system interaction logs.

The package turns event-level practice logs into a student-week panel,
fits a logistic learner model on rolling windows, engineers a tagged
feature matrix, benchmarks heuristic and supervised one-step forecasters,
and serves forecasts as goal recommendations over HTTP.
"""

__version__ = "0.1.0"
