"""Additive-factors learner model on rolling weekly windows.

Step correctness is modeled as
``logit^-1(theta_i + sum_k q.beta_k + sum_k q.gamma_k * T_ik)`` with student
ability ``theta``, skill easiness ``beta``, per-opportunity learning rate
``gamma >= 0``, and ``T_ik`` the number of prior practice opportunities the
student had on the skill. Fits maximize an L2-penalized Bernoulli
log-likelihood with projected gradient ascent and a monotone backtracking
line search, refit each week on a rolling window. The fitted parameters
yield mastery events (first week proficiency clears the threshold) and the
three learner-state features used downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ingest import InteractionEvent, Outcome
from .weeks import WeekId, week_range


class AfmError(Exception):
    pass


class NoGradedEvents(AfmError):
    pass


class NonFiniteObjective(AfmError):
    pass


class UnknownStudent(AfmError):
    pass


class UnknownSkill(AfmError):
    pass


@dataclass(frozen=True)
class QMatrix:
    """Skill registry mapping kc ids to dense column indices.

    Events carry their own kc sets, so the step-to-skill incidence is
    implicit; this object only fixes a stable skill ordering. Events with
    empty kc sets are skipped in fitting.
    """

    skills: tuple[str, ...]

    @classmethod
    def from_events(cls, events: Iterable[InteractionEvent]) -> "QMatrix":
        seen: set[str] = set()
        for ev in events:
            seen.update(ev.kc_ids)
        return cls(tuple(sorted(seen)))

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {kc: i for i, kc in enumerate(self.skills)}
        )

    def index(self, kc: str) -> int:
        try:
            return self._index[kc]  # type: ignore[attr-defined]
        except KeyError:
            raise UnknownSkill(f"skill not indexed: {kc!r}") from None

    def __contains__(self, kc: str) -> bool:
        return kc in self._index  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.skills)


@dataclass
class AfmConfig:
    l2_theta: float = 1.0
    l2_beta: float = 0.1
    l2_gamma: float = 0.1
    mastery_threshold: float = 0.95
    window_weeks: int = 5
    max_iters: int = 500
    tolerance: float = 1e-6
    # Aggregation for the learning-rate feature: opportunity-weighted mean
    # of gamma by default; "cumulative" switches to sum(gamma*T).
    learning_rate_form: str = "weighted_mean"

    def __post_init__(self) -> None:
        if not 0 < self.mastery_threshold < 1:
            raise ValueError("mastery_threshold must be in (0, 1)")
        if self.window_weeks < 1:
            raise ValueError("window_weeks must be >= 1")
        if min(self.l2_theta, self.l2_beta, self.l2_gamma) < 0:
            raise ValueError("L2 penalties must be nonnegative")
        if self.learning_rate_form not in ("weighted_mean", "cumulative"):
            raise ValueError("learning_rate_form: weighted_mean or cumulative")


@dataclass
class AfmParams:
    """Fitted abilities/easiness/learning rates for one window."""

    theta: dict[str, float]
    beta: dict[str, float]
    gamma: dict[str, float]
    window: tuple[WeekId, WeekId]
    n_events: int = 0
    n_iters: int = 0
    objective: float = 0.0

    def theta_of(self, student: str, strict: bool = False) -> float:
        if strict and student not in self.theta:
            raise UnknownStudent(f"student not in fit: {student!r}")
        return self.theta.get(student, 0.0)

    def beta_of(self, kc: str, strict: bool = False) -> float:
        if strict and kc not in self.beta:
            raise UnknownSkill(f"skill not in fit: {kc!r}")
        return self.beta.get(kc, 0.0)

    def gamma_of(self, kc: str, strict: bool = False) -> float:
        if strict and kc not in self.gamma:
            raise UnknownSkill(f"skill not in fit: {kc!r}")
        return self.gamma.get(kc, 0.0)

    def to_json_dict(self) -> dict:
        return {
            "window": [str(self.window[0]), str(self.window[1])],
            "theta": dict(sorted(self.theta.items())),
            "beta": dict(sorted(self.beta.items())),
            "gamma": dict(sorted(self.gamma.items())),
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "AfmParams":
        return cls(
            theta=dict(data["theta"]),
            beta=dict(data["beta"]),
            gamma=dict(data["gamma"]),
            window=(WeekId.parse(data["window"][0]), WeekId.parse(data["window"][1])),
        )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def predict_correct(
    params: AfmParams,
    student: str,
    kc_set: Sequence[str],
    opportunities: Mapping[str, int] | Sequence[int],
    strict: bool = True,
) -> float:
    """Probability of a correct response on a step requiring ``kc_set``.

    ``opportunities`` gives the prior practice count per kc. With
    ``strict=False`` unseen students/skills fall back to parameter 0 (the
    population prior under the L2 penalty).
    """
    if not isinstance(opportunities, Mapping):
        opportunities = dict(zip(kc_set, opportunities))
    z = params.theta_of(student, strict=strict)
    for kc in kc_set:
        t = opportunities.get(kc, 0)
        z += params.beta_of(kc, strict=strict) + params.gamma_of(kc, strict=strict) * t
    return float(_sigmoid(np.asarray(z)))


def event_sort_key(ev: InteractionEvent):
    # Total order over all fields so opportunity counting is invariant to
    # input permutation even under timestamp ties.
    return (
        ev.timestamp,
        ev.student_id,
        ev.problem_id,
        ev.kc_ids,
        ev.outcome.value,
        ev.duration_seconds,
    )


@dataclass
class _Design:
    """Dense arrays for one fitting window."""

    students: tuple[str, ...]
    qmatrix: QMatrix
    y: np.ndarray              # (n_events,) binarized outcomes
    weight: np.ndarray         # (n_events,) likelihood weights
    event_student: np.ndarray  # (n_events,) student index
    pair_event: np.ndarray     # (n_pairs,) event index
    pair_skill: np.ndarray     # (n_pairs,) skill index
    pair_t: np.ndarray         # (n_pairs,) prior-opportunity count


def _build_design(
    events: Sequence[InteractionEvent],
    qmatrix: QMatrix,
    sample_weight: Sequence[float] | None = None,
) -> _Design:
    if sample_weight is None:
        sample_weight = [1.0] * len(events)
    if len(sample_weight) != len(events):
        raise ValueError("sample_weight length must match events")
    graded = sorted(
        ((ev, w) for ev, w in zip(events, sample_weight) if ev.kc_ids),
        key=lambda pair: event_sort_key(pair[0]),
    )
    if not graded:
        raise NoGradedEvents("window contains no kc-tagged events")
    students = tuple(sorted({ev.student_id for ev, _ in graded}))
    s_index = {s: i for i, s in enumerate(students)}

    y = np.empty(len(graded))
    weight = np.empty(len(graded))
    event_student = np.empty(len(graded), dtype=np.int64)
    pair_event: list[int] = []
    pair_skill: list[int] = []
    pair_t: list[int] = []
    counter: dict[tuple[int, int], int] = {}
    for e_idx, (ev, w) in enumerate(graded):
        y[e_idx] = 1.0 if ev.outcome is Outcome.CORRECT else 0.0
        weight[e_idx] = w
        s = s_index[ev.student_id]
        event_student[e_idx] = s
        for kc in ev.kc_ids:
            k = qmatrix.index(kc)
            t = counter.get((s, k), 0)
            pair_event.append(e_idx)
            pair_skill.append(k)
            pair_t.append(t)
            counter[(s, k)] = t + 1
    return _Design(
        students=students,
        qmatrix=qmatrix,
        y=y,
        weight=weight,
        event_student=event_student,
        pair_event=np.asarray(pair_event, dtype=np.int64),
        pair_skill=np.asarray(pair_skill, dtype=np.int64),
        pair_t=np.asarray(pair_t, dtype=float),
    )


def _objective_and_grad(
    design: _Design,
    theta: np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    config: AfmConfig,
    want_grad: bool = True,
    want_curvature: bool = False,
):
    z = theta[design.event_student].copy()
    contrib = beta[design.pair_skill] + gamma[design.pair_skill] * design.pair_t
    np.add.at(z, design.pair_event, contrib)
    # log p = -log(1+e^-z), log(1-p) = -log(1+e^z)
    loglik_terms = np.where(
        design.y == 1.0, -np.logaddexp(0.0, -z), -np.logaddexp(0.0, z)
    )
    ll = float(design.weight @ loglik_terms)
    penalty = 0.5 * (
        config.l2_theta * float(theta @ theta)
        + config.l2_beta * float(beta @ beta)
        + config.l2_gamma * float(gamma @ gamma)
    )
    obj = ll - penalty
    if not want_grad:
        return obj, None, None, None, None
    p = _sigmoid(z)
    resid = design.weight * (design.y - p)
    g_theta = np.zeros_like(theta)
    np.add.at(g_theta, design.event_student, resid)
    g_theta -= config.l2_theta * theta
    pair_resid = resid[design.pair_event]
    g_beta = np.zeros_like(beta)
    np.add.at(g_beta, design.pair_skill, pair_resid)
    g_beta -= config.l2_beta * beta
    g_gamma = np.zeros_like(gamma)
    np.add.at(g_gamma, design.pair_skill, pair_resid * design.pair_t)
    g_gamma -= config.l2_gamma * gamma
    if not want_curvature:
        return obj, g_theta, g_beta, g_gamma, None
    # Diagonal of the negative Hessian: Bernoulli variance terms + penalty.
    var = design.weight * p * (1.0 - p)
    c_theta = np.zeros_like(theta)
    np.add.at(c_theta, design.event_student, var)
    c_theta += config.l2_theta + 1e-9
    pair_var = var[design.pair_event]
    c_beta = np.zeros_like(beta)
    np.add.at(c_beta, design.pair_skill, pair_var)
    c_beta += config.l2_beta + 1e-9
    c_gamma = np.zeros_like(gamma)
    np.add.at(c_gamma, design.pair_skill, pair_var * design.pair_t**2)
    c_gamma += config.l2_gamma + 1e-9
    return obj, g_theta, g_beta, g_gamma, (c_theta, c_beta, c_gamma)


def fit_afm(
    events: Sequence[InteractionEvent],
    qmatrix: QMatrix | None = None,
    config: AfmConfig | None = None,
    seed: int = 0,
    sample_weight: Sequence[float] | None = None,
) -> AfmParams:
    """Penalized MLE over a window of events.

    Outcomes binarize as CORRECT -> 1, everything else 0. ``gamma`` is kept
    nonnegative by projection after each step. The line search halves the
    step until the objective improves, so the objective is non-decreasing
    across iterations; convergence is a relative objective change below
    ``config.tolerance``. Zero initialization makes the fit deterministic
    (the seed is accepted for interface symmetry). ``sample_weight`` scales
    each event's likelihood contribution; weighting an event by 2 is the
    same as listing its design row twice.
    """
    del seed  # deterministic zero init; kept in the signature for parity
    config = config or AfmConfig()
    if qmatrix is None:
        qmatrix = QMatrix.from_events(events)
    design = _build_design(events, qmatrix, sample_weight)

    theta = np.zeros(len(design.students))
    beta = np.zeros(len(qmatrix))
    gamma = np.zeros(len(qmatrix))
    obj, g_t, g_b, g_g, curve = _objective_and_grad(
        design, theta, beta, gamma, config, want_curvature=True
    )
    if not math.isfinite(obj):
        raise NonFiniteObjective("objective non-finite at initialization")

    # Diagonal-Newton ascent: the negative-Hessian diagonal at the current
    # point rescales the gradient, so a unit step is in the right ballpark
    # regardless of window size; backtracking guarantees monotone progress.
    step = 1.0
    n_iters = 0
    for n_iters in range(1, config.max_iters + 1):
        c_t, c_b, c_g = curve
        improved = False
        while step > 1e-14:
            theta_new = theta + step * g_t / c_t
            beta_new = beta + step * g_b / c_b
            gamma_new = np.maximum(0.0, gamma + step * g_g / c_g)
            obj_new, *_ = _objective_and_grad(
                design, theta_new, beta_new, gamma_new, config, want_grad=False
            )
            if not math.isfinite(obj_new):
                raise NonFiniteObjective("objective became non-finite")
            if obj_new > obj:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rel_change = (obj_new - obj) / (abs(obj) + 1e-12)
        theta, beta, gamma = theta_new, beta_new, gamma_new
        obj = obj_new
        if rel_change < config.tolerance:
            break
        _, g_t, g_b, g_g, curve = _objective_and_grad(
            design, theta, beta, gamma, config, want_curvature=True
        )
        step = min(step * 2.0, 1.0)

    weeks = sorted({ev.week for ev in events})
    return AfmParams(
        theta={s: float(v) for s, v in zip(design.students, theta)},
        beta={kc: float(v) for kc, v in zip(qmatrix.skills, beta)},
        gamma={kc: float(v) for kc, v in zip(qmatrix.skills, gamma)},
        window=(weeks[0], weeks[-1]),
        n_events=len(design.y),
        n_iters=n_iters,
        objective=obj,
    )


def penalized_gradient(
    events: Sequence[InteractionEvent],
    qmatrix: QMatrix,
    config: AfmConfig,
    theta: np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
):
    """Objective and analytic gradient at an arbitrary point (test hook)."""
    design = _build_design(events, qmatrix)
    obj, g_t, g_b, g_g, _ = _objective_and_grad(design, theta, beta, gamma, config)
    return obj, g_t, g_b, g_g


def rolling_refit(
    events: Sequence[InteractionEvent],
    config: AfmConfig | None = None,
    qmatrix: QMatrix | None = None,
    seed: int = 0,
) -> dict[WeekId, AfmParams]:
    """Fit one parameter set per week over a trailing window.

    Week ``t`` fits on events in weeks ``[t - window + 1, t]``; early weeks
    use everything available so far. Weeks whose window holds no kc-tagged
    events reuse the previous week's fit (cold-start fallback).
    """
    config = config or AfmConfig()
    if qmatrix is None:
        qmatrix = QMatrix.from_events(events)
    all_weeks = sorted({ev.week for ev in events})
    if not all_weeks:
        raise NoGradedEvents("no events to fit")
    weeks = week_range(all_weeks[0], all_weeks[-1])
    by_week: dict[WeekId, list[InteractionEvent]] = {w: [] for w in weeks}
    for ev in events:
        by_week[ev.week].append(ev)

    fits: dict[WeekId, AfmParams] = {}
    previous: AfmParams | None = None
    for i, week in enumerate(weeks):
        lo = max(0, i - config.window_weeks + 1)
        window_events = [ev for w in weeks[lo : i + 1] for ev in by_week[w]]
        try:
            params = fit_afm(window_events, qmatrix, config, seed)
        except NoGradedEvents:
            if previous is None:
                params = AfmParams({}, {}, {}, window=(weeks[lo], week))
            else:
                params = AfmParams(
                    previous.theta, previous.beta, previous.gamma,
                    window=(weeks[lo], week),
                )
        fits[week] = params
        previous = params
    return fits


def opportunity_counts_by_week(
    events: Sequence[InteractionEvent],
) -> dict[WeekId, dict[tuple[str, str], int]]:
    """Cumulative (student, kc) opportunity counts through each week's end."""
    ordered = sorted((ev for ev in events if ev.kc_ids), key=event_sort_key)
    if not ordered:
        return {}
    weeks = sorted({ev.week for ev in events})
    weeks = week_range(weeks[0], weeks[-1])
    counter: dict[tuple[str, str], int] = {}
    out: dict[WeekId, dict[tuple[str, str], int]] = {}
    idx = 0
    for week in weeks:
        while idx < len(ordered) and ordered[idx].week <= week:
            ev = ordered[idx]
            for kc in ev.kc_ids:
                counter[(ev.student_id, kc)] = counter.get((ev.student_id, kc), 0) + 1
            idx += 1
        out[week] = dict(counter)
    return out


def mastery_sweep(
    events: Sequence[InteractionEvent],
    qmatrix: QMatrix | None = None,
    config: AfmConfig | None = None,
    fits: dict[WeekId, AfmParams] | None = None,
) -> list[tuple[str, str, WeekId]]:
    """First week each (student, skill) proficiency exceeds the threshold.

    Proficiency at week ``t`` is the single-skill predictor
    ``logit^-1(theta_i + beta_k + gamma_k * T_ik(t))`` under the rolling fit
    covering ``t``, with ``T_ik(t)`` counted through the end of ``t``. Pairs
    are only evaluated from their first practiced week on, so a mastery week
    can never precede first practice. At most one event per pair is emitted.
    """
    config = config or AfmConfig()
    if qmatrix is None:
        qmatrix = QMatrix.from_events(events)
    if fits is None:
        fits = rolling_refit(events, config, qmatrix)
    counts = opportunity_counts_by_week(events)
    if not counts:
        return []
    weeks = sorted(counts)

    first_practice: dict[tuple[str, str], WeekId] = {}
    for ev in sorted((e for e in events if e.kc_ids), key=event_sort_key):
        for kc in ev.kc_ids:
            first_practice.setdefault((ev.student_id, kc), ev.week)

    mastered: dict[tuple[str, str], WeekId] = {}
    for week in weeks:
        params = fits[week]
        t_map = counts[week]
        for key, first_week in first_practice.items():
            if key in mastered or week < first_week:
                continue
            student, kc = key
            z = (
                params.theta_of(student)
                + params.beta_of(kc)
                + params.gamma_of(kc) * t_map.get(key, 0)
            )
            if _sigmoid(np.asarray(z)) > config.mastery_threshold:
                mastered[key] = week
    return sorted(
        [(s, kc, w) for (s, kc), w in mastered.items()],
        key=lambda item: (item[0], item[1]),
    )


@dataclass(frozen=True)
class LearnerState:
    """Per-student AFM-derived feature values for one week."""

    ability: float
    learning_rate: float
    week_difficulty: float


def _states_for_week(
    params: AfmParams,
    practiced: Mapping[str, set[str]],
    counts: Mapping[tuple[str, str], int],
    config: AfmConfig,
) -> dict[str, LearnerState]:
    out: dict[str, LearnerState] = {}
    for student, kcs in practiced.items():
        t_total = 0.0
        beta_weighted = 0.0
        gamma_weighted = 0.0
        for kc in sorted(kcs):
            t = float(counts.get((student, kc), 0))
            t_total += t
            beta_weighted += params.beta_of(kc) * t
            gamma_weighted += params.gamma_of(kc) * t
        if t_total == 0:
            continue
        if config.learning_rate_form == "cumulative":
            rate = gamma_weighted
        else:
            rate = gamma_weighted / t_total
        out[student] = LearnerState(
            ability=params.theta_of(student),
            learning_rate=rate,
            week_difficulty=-beta_weighted / t_total,
        )
    return out


def afm_features(
    params_by_week: Mapping[WeekId, AfmParams],
    events: Sequence[InteractionEvent],
    week: WeekId,
    config: AfmConfig | None = None,
) -> dict[str, LearnerState]:
    """Learner-state features for every student who practiced in ``week``.

    ``week_difficulty`` is the negative ``T``-weighted mean of beta over the
    skills practiced that week; the learning rate is the ``T``-weighted mean
    of gamma (or the cumulative ``sum(gamma*T)`` when configured). ``T`` is
    the cumulative opportunity count through the end of the week. Students
    with no kc-tagged practice that week are absent from the result; the
    feature builder treats them as missing.
    """
    config = config or AfmConfig()
    params = params_by_week.get(week)
    if params is None:
        return {}
    practiced: dict[str, set[str]] = {}
    for ev in events:
        if ev.week == week and ev.kc_ids:
            practiced.setdefault(ev.student_id, set()).update(ev.kc_ids)
    if not practiced:
        return {}
    counts = opportunity_counts_by_week(events).get(week, {})
    return _states_for_week(params, practiced, counts, config)


def learner_states_by_week(
    params_by_week: Mapping[WeekId, AfmParams],
    events: Sequence[InteractionEvent],
    config: AfmConfig | None = None,
) -> dict[WeekId, dict[str, LearnerState]]:
    """Bulk form of :func:`afm_features` sharing one opportunity scan."""
    config = config or AfmConfig()
    counts_by_week = opportunity_counts_by_week(events)
    practiced_by_week: dict[WeekId, dict[str, set[str]]] = {}
    for ev in events:
        if ev.kc_ids:
            practiced_by_week.setdefault(ev.week, {}).setdefault(
                ev.student_id, set()
            ).update(ev.kc_ids)
    out: dict[WeekId, dict[str, LearnerState]] = {}
    for week, params in params_by_week.items():
        practiced = practiced_by_week.get(week)
        if not practiced:
            out[week] = {}
            continue
        out[week] = _states_for_week(
            params, practiced, counts_by_week.get(week, {}), config
        )
    return out


def export_params(fits: Mapping[WeekId, AfmParams]) -> dict:
    """JSON-able map of week id to fitted parameters."""
    return {str(week): fits[week].to_json_dict() for week in sorted(fits)}


def import_params(data: Mapping) -> dict[WeekId, AfmParams]:
    return {WeekId.parse(k): AfmParams.from_json_dict(v) for k, v in data.items()}
