"""Synthetic event-level cohorts with known ground truth.

The generator samples weekly practice minutes from a cohort effort curve
(surge-then-plateau by default), injects zero-minute gap weeks, spreads the
minutes over problem-step events, and draws step correctness from a true
additive logistic learner model with evolving opportunity counts. Skill
starts follow a curriculum-rate curve (rise-then-decline by default) so the
pipeline's weekly mastery counts show the same qualitative dynamics. Both
the raw event stream (pipeline input) and the latent truth (test oracle)
come back; everything is deterministic for a fixed seed with per-student
derived substreams.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import asdict, dataclass
from datetime import timedelta
from typing import IO, Sequence

import numpy as np

from .ingest import InteractionEvent, Outcome
from .weeks import WeekId


class InvalidConfig(Exception):
    pass


class EffortRegime(enum.Enum):
    SURGE_PLATEAU = "surge_plateau"
    DECLINE = "decline"
    STATIONARY = "stationary"


class SkillRegime(enum.Enum):
    RISE_THEN_DECLINE = "rise_then_decline"
    STATIONARY = "stationary"


@dataclass
class RegimeConfig:
    n_students: int = 425
    n_weeks: int = 39
    n_skills: int = 60
    start_week: str = "2010-W40"
    effort_regime: EffortRegime = EffortRegime.SURGE_PLATEAU
    skill_regime: SkillRegime = SkillRegime.RISE_THEN_DECLINE
    # Effort curve shape
    plateau_minutes: float = 46.0
    ramp_weeks: int = 6
    ramp_start_fraction: float = 0.45
    decline_floor: float = 0.4
    # Gap process: weekly gap probability from week 2 on. At 0.1 over 38
    # remaining weeks ~98% of students hit at least one gap and the mean
    # count is about 4.
    gap_probability: float = 0.1
    # Per-student effort heterogeneity and weekly noise (minutes). Weekly
    # deviations from the regime mean follow an AR(1) chain with persistence
    # ``ar_phi``, so recent history carries real signal about next week.
    # Occasional binge weeks right-skew the marginal distribution, and the
    # week after a zero-minute week carries a catch-up rebound.
    effort_sd: float = 0.25
    minutes_noise_sd: float = 8.0
    ar_phi: float = 0.65
    binge_probability: float = 0.15
    binge_scale: float = 25.0
    rebound_boost: float = 0.5
    minutes_per_event: float = 2.0
    max_events_per_week: int = 60
    # Curriculum: weekly new-skill start rate, scaled by the skill curve.
    # A generous start rate keeps practice intensity (minutes) the binding
    # constraint on weekly mastery counts.
    start_rate: float = 3.5
    skill_trough_fraction: float = 0.03
    skill_peak_week: int = 12
    active_skill_window: int = 8
    # True learner-model parameter distributions
    theta_sd: float = 1.0
    beta_mean: float = 0.8
    beta_sd: float = 0.6
    gamma_low: float = 0.2
    gamma_high: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.n_students, self.n_weeks, self.n_skills) <= 0:
            raise InvalidConfig("counts must be positive")
        if not 0.0 <= self.gap_probability <= 1.0:
            raise InvalidConfig("gap_probability must be in [0, 1]")
        if not 0.0 <= self.ar_phi < 1.0:
            raise InvalidConfig("ar_phi must be in [0, 1)")
        if not 0.0 <= self.binge_probability <= 1.0:
            raise InvalidConfig("binge_probability must be in [0, 1]")
        if self.rebound_boost < 0 or self.binge_scale < 0:
            raise InvalidConfig("rebound_boost and binge_scale must be >= 0")
        if self.plateau_minutes <= 0 or self.minutes_per_event <= 0:
            raise InvalidConfig("minute scales must be positive")
        if self.ramp_weeks < 1 or self.active_skill_window < 1:
            raise InvalidConfig("window lengths must be >= 1")


def effort_curve(config: RegimeConfig) -> np.ndarray:
    """Cohort-level weekly effort multiplier (1.0 = plateau level)."""
    t = np.arange(config.n_weeks, dtype=float)
    if config.effort_regime is EffortRegime.STATIONARY:
        return np.ones(config.n_weeks)
    if config.effort_regime is EffortRegime.DECLINE:
        if config.n_weeks == 1:
            return np.ones(1)
        return 1.0 - (1.0 - config.decline_floor) * t / (config.n_weeks - 1)
    ramp = config.ramp_start_fraction + (1.0 - config.ramp_start_fraction) * np.minimum(
        t, config.ramp_weeks - 1
    ) / max(1, config.ramp_weeks - 1)
    return np.where(t < config.ramp_weeks, ramp, 1.0)


def skill_curve(config: RegimeConfig) -> np.ndarray:
    """Weekly new-skill start-rate multiplier (peak = 1.0)."""
    if config.skill_regime is SkillRegime.STATIONARY:
        return np.ones(config.n_weeks)
    t = np.arange(config.n_weeks, dtype=float)
    peak = float(min(config.skill_peak_week, config.n_weeks - 1))
    trough = config.skill_trough_fraction
    up = trough + (1.0 - trough) * np.where(peak > 0, t / max(peak, 1.0), 1.0)
    tail = max(1.0, config.n_weeks - 1 - peak)
    down = 1.0 - (1.0 - trough) * (t - peak) / tail
    return np.clip(np.where(t <= peak, up, down), trough, 1.0)


def _student_rng(
    config: RegimeConfig, index: int, stream: int
) -> np.random.Generator:
    # Separate substreams per process (minutes, curriculum, events) keep the
    # sampled minutes series invariant when unrelated knobs change.
    return np.random.default_rng([config.seed, index, stream])


def generate(config: RegimeConfig) -> tuple[list[InteractionEvent], dict]:
    """Sample one cohort; returns (events, truth record).

    The truth record carries the latent parameters, the regime curves, and
    the exact per-student-week minutes so tests can verify the pipeline
    round trip without re-deriving anything.
    """
    start = WeekId.parse(config.start_week)
    weeks = [start.shift(i) for i in range(config.n_weeks)]
    curve_m = effort_curve(config)
    curve_s = skill_curve(config)

    root = np.random.default_rng(config.seed)
    theta = root.normal(0.0, config.theta_sd, config.n_students)
    beta = root.normal(config.beta_mean, config.beta_sd, config.n_skills)
    gamma = root.uniform(config.gamma_low, config.gamma_high, config.n_skills)

    events: list[InteractionEvent] = []
    minutes_truth: dict[str, list[float]] = {}

    for i in range(config.n_students):
        rng_min = _student_rng(config, i, 0)
        rng_skill = _student_rng(config, i, 1)
        rng_event = _student_rng(config, i, 2)
        student = f"s{i:04d}"
        effort_mult = max(0.3, 1.0 + rng_min.normal(0.0, config.effort_sd))
        curriculum = rng_skill.permutation(config.n_skills)
        started: list[int] = []
        t_counts = np.zeros(config.n_skills, dtype=int)
        week_minutes: list[float] = []
        deviation = 0.0

        for w in range(config.n_weeks):
            gap = w > 0 and rng_min.random() < config.gap_probability
            deviation = config.ar_phi * deviation + rng_min.normal(
                0.0, config.minutes_noise_sd
            )
            binge = (
                rng_min.exponential(config.binge_scale)
                if rng_min.random() < config.binge_probability
                else 0.0
            )
            if gap:
                week_minutes.append(0.0)
                continue
            mean_minutes = config.plateau_minutes * curve_m[w] * effort_mult
            if week_minutes and week_minutes[-1] == 0.0:
                mean_minutes *= 1.0 + config.rebound_boost
            minutes = max(0.0, mean_minutes + deviation + binge)
            if minutes == 0.0:
                week_minutes.append(0.0)
                continue

            # Stochastic rounding keeps the curriculum rate curve crisp
            # (variance well below a Poisson draw of the same mean).
            rate = config.start_rate * curve_s[w]
            n_new = int(rate) + (1 if rng_skill.random() < rate - int(rate) else 0)
            for _ in range(n_new):
                if len(started) < config.n_skills:
                    started.append(int(curriculum[len(started)]))
            if not started:
                started.append(int(curriculum[0]))
            active = started[-config.active_skill_window:]

            n_events = int(
                np.clip(round(minutes / config.minutes_per_event), 1,
                        config.max_events_per_week)
            )
            lengths = rng_event.random(n_events) + 0.2
            durations = lengths * (minutes * 60.0 / lengths.sum())
            step_minutes = (7 * 24 * 60 - 1) / max(1, n_events)
            for j in range(n_events):
                k = active[j % len(active)]
                z = theta[i] + beta[k] + gamma[k] * t_counts[k]
                p = 1.0 / (1.0 + math.exp(-z))
                correct = rng_event.random() < p
                events.append(
                    InteractionEvent(
                        student_id=student,
                        timestamp=_week_timestamp(weeks[w], int(j * step_minutes)),
                        duration_seconds=float(durations[j]),
                        outcome=Outcome.CORRECT if correct else Outcome.INCORRECT,
                        kc_ids=(f"kc{k:03d}",),
                        opportunity=int(t_counts[k] + 1),
                        problem_id=f"p{i:04d}-{w:02d}-{j:02d}",
                    )
                )
                t_counts[k] += 1
            week_minutes.append(float(minutes))
        minutes_truth[student] = week_minutes

    truth = {
        "config": _config_dict(config),
        "weeks": [str(w) for w in weeks],
        "effort_curve": curve_m.tolist(),
        "skill_curve": curve_s.tolist(),
        "theta": {f"s{i:04d}": float(theta[i]) for i in range(config.n_students)},
        "beta": {f"kc{k:03d}": float(beta[k]) for k in range(config.n_skills)},
        "gamma": {f"kc{k:03d}": float(gamma[k]) for k in range(config.n_skills)},
        "minutes": minutes_truth,
    }
    return events, truth


def _week_timestamp(week: WeekId, minute_offset: int):
    from datetime import datetime, timezone

    monday = week.monday()
    base = datetime(monday.year, monday.month, monday.day, tzinfo=timezone.utc)
    return base + timedelta(minutes=minute_offset)


def _config_dict(config: RegimeConfig) -> dict:
    data = asdict(config)
    data["effort_regime"] = config.effort_regime.value
    data["skill_regime"] = config.skill_regime.value
    return data


EVENT_COLUMNS = (
    "student_id",
    "timestamp",
    "duration_seconds",
    "outcome",
    "kc_ids",
    "opportunity",
    "problem_id",
)


def write_events_csv(events: Sequence[InteractionEvent], stream: IO[str]) -> None:
    """Emit the ingest CSV format."""
    writer = csv.writer(stream)
    writer.writerow(EVENT_COLUMNS)
    for ev in events:
        writer.writerow(
            [
                ev.student_id,
                ev.timestamp.isoformat().replace("+00:00", "Z"),
                repr(float(ev.duration_seconds)),
                ev.outcome.value,
                ";".join(ev.kc_ids),
                "" if ev.opportunity is None else ev.opportunity,
                ev.problem_id,
            ]
        )
