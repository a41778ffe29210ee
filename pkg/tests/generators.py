"""Test-side data generators with known ground truth.

The response generator samples correctness straight from the additive
logistic model with explicitly chosen parameters, so recovery tests have an
exact oracle that does not depend on package code beyond the event type.
"""

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import numpy as np

from engagecast.ingest import InteractionEvent, Outcome

WEEK0_MONDAY = datetime(2011, 1, 3, tzinfo=timezone.utc)  # 2011-W01


def ts(week_index: int, minute: int = 0) -> datetime:
    """Timestamp inside ISO week ``2011-W01 + week_index``."""
    day, rem = divmod(minute, 24 * 60)
    return WEEK0_MONDAY + timedelta(weeks=week_index, days=day % 7, minutes=rem)


def event(
    student: str,
    week_index: int,
    kcs: tuple[str, ...] = ("kc0",),
    outcome: Outcome = Outcome.CORRECT,
    minute: int = 0,
    duration: float = 60.0,
    problem: str = "p",
) -> InteractionEvent:
    return InteractionEvent(
        student_id=student,
        timestamp=ts(week_index, minute),
        duration_seconds=duration,
        outcome=outcome,
        kc_ids=kcs,
        problem_id=problem,
    )


def sample_afm_events(
    n_students: int,
    n_skills: int,
    opportunities_per_student: int,
    seed: int,
    theta_scale: float = 1.0,
    beta_scale: float = 0.5,
    gamma_low: float = 0.03,
    gamma_high: float = 0.12,
    n_weeks: int = 10,
):
    """Events sampled from known (theta*, beta*, gamma*).

    Each student cycles through the skill list so every (student, skill)
    accumulates opportunities evenly. Returns (events, theta*, beta*,
    gamma*) with parameters indexed by ``s{i}`` / ``kc{k}`` ids.
    """
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, theta_scale, n_students)
    beta = rng.normal(0.0, beta_scale, n_skills)
    gamma = rng.uniform(gamma_low, gamma_high, n_skills)

    events: list[InteractionEvent] = []
    for i in range(n_students):
        t_count = np.zeros(n_skills, dtype=int)
        order = rng.permutation(n_skills)
        for opp in range(opportunities_per_student):
            k = int(order[opp % n_skills])
            z = theta[i] + beta[k] + gamma[k] * t_count[k]
            p = 1.0 / (1.0 + math.exp(-z))
            correct = rng.random() < p
            week = (opp * n_weeks) // opportunities_per_student
            events.append(
                InteractionEvent(
                    student_id=f"s{i}",
                    timestamp=ts(week, minute=opp),
                    duration_seconds=90.0,
                    outcome=Outcome.CORRECT if correct else Outcome.INCORRECT,
                    kc_ids=(f"kc{k}",),
                    problem_id=f"p{i}-{opp}",
                )
            )
            t_count[k] += 1
    truth = {
        "theta": {f"s{i}": float(theta[i]) for i in range(n_students)},
        "beta": {f"kc{k}": float(beta[k]) for k in range(n_skills)},
        "gamma": {f"kc{k}": float(gamma[k]) for k in range(n_skills)},
    }
    return events, truth
