"""Event-log ingestion and the ground-truth student-week panel.

Input is header-bearing delimited text (comma or tab, auto-detected) with
columns ``student_id,timestamp,duration_seconds,outcome,kc_ids,opportunity,
problem_id``; ``kc_ids`` is ``;``-separated. The pipeline aggregates events
into one row per student and ISO week, materializes interior inactive weeks
with zeros, derives the two weekly targets, and flags outliers with a Tukey
fence.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone, tzinfo
from typing import IO, Iterable, Sequence

import numpy as np

from .weeks import WeekId, to_iso_week, week_range


class IngestError(Exception):
    pass


class MissingColumn(IngestError):
    pass


class EmptyInput(IngestError):
    pass


class UnknownStudent(IngestError):
    pass


class Outcome(enum.Enum):
    CORRECT = "CORRECT"
    INCORRECT = "INCORRECT"
    HINT = "HINT"


REQUIRED_COLUMNS = (
    "student_id",
    "timestamp",
    "duration_seconds",
    "outcome",
    "kc_ids",
    "opportunity",
    "problem_id",
)


@dataclass(frozen=True)
class InteractionEvent:
    """One logged student-problem-step transaction."""

    student_id: str
    timestamp: datetime
    duration_seconds: float
    outcome: Outcome
    kc_ids: tuple[str, ...]
    opportunity: int | None = None
    problem_id: str = ""

    @property
    def week(self) -> WeekId:
        return to_iso_week(self.timestamp)


@dataclass
class StudentWeek:
    """One student x ISO-week row; the unit of analysis.

    ``y_min``/``y_skill`` stay ``None`` until :func:`build_targets` runs.
    """

    student_id: str
    week: WeekId
    minutes: float
    problems: int
    opportunities: int
    skills_cum: int = 0
    y_min: float | None = None
    y_skill: int | None = None
    excluded: bool = False


@dataclass
class IngestConfig:
    tukey_k: float = 1.5
    timezone: tzinfo = timezone.utc
    column_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.tukey_k > 0:
            raise ValueError("tukey_k must be positive")

    def source_column(self, logical: str) -> str:
        return self.column_map.get(logical, logical)


@dataclass
class ParseResult:
    events: list[InteractionEvent]
    n_rows: int
    n_rejected: int
    reject_reasons: dict[str, int]

    def report(self) -> dict:
        return {
            "rows": self.n_rows,
            "events": len(self.events),
            "rejected": self.n_rejected,
            "reject_reasons": dict(sorted(self.reject_reasons.items())),
        }


def _parse_timestamp(raw: str, tz: tzinfo) -> datetime:
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=tz)
    return ts.astimezone(timezone.utc)


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def parse_events(
    stream: IO[str] | IO[bytes] | str | bytes,
    config: IngestConfig | None = None,
) -> ParseResult:
    """Parse delimited event rows; bad rows are rejected and counted.

    A missing required column fails the whole file (``MissingColumn``);
    a malformed row (unparseable timestamp or number, negative duration,
    unknown outcome, duplicate kc within the event) is skipped and tallied.
    """
    config = config or IngestConfig()
    if isinstance(stream, bytes):
        stream = io.StringIO(stream.decode("utf-8"))
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, io.BytesIO) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8")

    header_line = stream.readline()
    if not header_line:
        raise MissingColumn("empty input: no header row")
    delimiter = _sniff_delimiter(header_line)
    header = next(csv.reader([header_line], delimiter=delimiter))
    header = [h.strip() for h in header]
    col_index: dict[str, int] = {}
    for logical in REQUIRED_COLUMNS:
        source = config.source_column(logical)
        if source not in header:
            raise MissingColumn(f"missing column {source!r} (for {logical})")
        col_index[logical] = header.index(source)

    events: list[InteractionEvent] = []
    reasons: dict[str, int] = {}
    n_rows = 0
    for row in csv.reader(stream, delimiter=delimiter):
        if not row or all(not cell.strip() for cell in row):
            continue
        n_rows += 1
        try:
            events.append(_parse_row(row, col_index, config))
        except (ValueError, KeyError, IndexError) as exc:
            reason = exc.args[0] if exc.args else type(exc).__name__
            reasons[str(reason)[:80]] = reasons.get(str(reason)[:80], 0) + 1
    n_rejected = n_rows - len(events)
    return ParseResult(events, n_rows, n_rejected, reasons)


def _parse_row(
    row: Sequence[str], col_index: dict[str, int], config: IngestConfig
) -> InteractionEvent:
    def cell(name: str) -> str:
        return row[col_index[name]].strip()

    student_id = cell("student_id")
    if not student_id:
        raise ValueError("empty student_id")
    timestamp = _parse_timestamp(cell("timestamp"), config.timezone)
    duration = float(cell("duration_seconds"))
    if not math.isfinite(duration) or duration < 0:
        raise ValueError("duration_seconds must be finite and >= 0")
    outcome = Outcome(cell("outcome").upper())
    kc_raw = cell("kc_ids")
    kc_ids = tuple(k.strip() for k in kc_raw.split(";") if k.strip()) if kc_raw else ()
    if len(set(kc_ids)) != len(kc_ids):
        raise ValueError("duplicate kc id within event")
    opp_raw = cell("opportunity")
    opportunity = None
    if opp_raw:
        opportunity = int(opp_raw)
        if opportunity <= 0:
            raise ValueError("opportunity must be positive")
    return InteractionEvent(
        student_id=student_id,
        timestamp=timestamp,
        duration_seconds=duration,
        outcome=outcome,
        kc_ids=kc_ids,
        opportunity=opportunity,
        problem_id=cell("problem_id"),
    )


def aggregate_weekly(events: Iterable[InteractionEvent]) -> list[StudentWeek]:
    """Roll events up to (student, week) rows; interior inactive weeks get zeros.

    ``minutes`` sums durations / 60, ``problems`` counts distinct problem
    ids, ``opportunities`` counts events that carry at least one kc. The
    result is sorted by (student, week) and is invariant to input order.
    """
    minutes: dict[tuple[str, WeekId], float] = {}
    problems: dict[tuple[str, WeekId], set[str]] = {}
    opportunities: dict[tuple[str, WeekId], int] = {}
    span: dict[str, tuple[WeekId, WeekId]] = {}

    for ev in events:
        key = (ev.student_id, ev.week)
        minutes[key] = minutes.get(key, 0.0) + ev.duration_seconds / 60.0
        problems.setdefault(key, set()).add(ev.problem_id)
        if ev.kc_ids:
            opportunities[key] = opportunities.get(key, 0) + 1
        lo, hi = span.get(ev.student_id, (ev.week, ev.week))
        span[ev.student_id] = (min(lo, ev.week), max(hi, ev.week))

    panel: list[StudentWeek] = []
    for student in sorted(span):
        first, last = span[student]
        for week in week_range(first, last):
            key = (student, week)
            panel.append(
                StudentWeek(
                    student_id=student,
                    week=week,
                    minutes=minutes.get(key, 0.0),
                    problems=len(problems.get(key, ())),
                    opportunities=opportunities.get(key, 0),
                )
            )
    return panel


def tukey_filter(values: Sequence[float], k: float) -> list[bool]:
    """Keep-mask under a Tukey fence: ``False`` marks an outlier.

    Quartiles use linear interpolation between order statistics (rank
    ``p*(n-1)/100``), so the mask is reproducible against any standard
    percentile routine.
    """
    if len(values) == 0:
        raise EmptyInput("tukey_filter needs at least one value")
    if not k > 0:
        raise ValueError("k must be positive")
    arr = np.asarray(values, dtype=float)
    q1, q3 = np.percentile(arr, [25.0, 75.0])
    iqr = q3 - q1
    lo, hi = q1 - k * iqr, q3 + k * iqr
    return [(lo <= v <= hi) for v in arr]


def build_targets(
    panel: list[StudentWeek],
    mastery_events: Iterable[tuple[str, str, WeekId]],
    config: IngestConfig | None = None,
) -> list[StudentWeek]:
    """Fill ``y_min``/``y_skill``/``skills_cum`` and apply the Tukey mask.

    ``mastery_events`` are ``(student, skill, first_mastery_week)`` triples.
    The fence is applied per target, pooled over all student-weeks; flagged
    rows stay in the panel with ``excluded=True`` so downstream stages can
    keep them out of training and scoring.
    """
    config = config or IngestConfig()
    students = {row.student_id for row in panel}
    new_by_key: dict[tuple[str, WeekId], int] = {}
    for student, _skill, week in mastery_events:
        if student not in students:
            raise UnknownStudent(f"mastery event for unknown student {student!r}")
        new_by_key[(student, week)] = new_by_key.get((student, week), 0) + 1

    out = [replace(row) for row in panel]
    out.sort(key=lambda r: (r.student_id, r.week))
    cum = 0
    current = None
    for row in out:
        if row.student_id != current:
            current, cum = row.student_id, 0
        row.y_min = row.minutes
        row.y_skill = new_by_key.get((row.student_id, row.week), 0)
        cum += row.y_skill
        row.skills_cum = cum

    keep_min = tukey_filter([r.y_min for r in out], config.tukey_k)
    keep_skill = tukey_filter([float(r.y_skill) for r in out], config.tukey_k)
    for row, km, ks in zip(out, keep_min, keep_skill):
        row.excluded = not (km and ks)
    return out


PANEL_COLUMNS = (
    "student_id",
    "week",
    "minutes",
    "problems",
    "opportunities",
    "y_min",
    "y_skill",
    "excluded",
)


def write_panel(panel: Sequence[StudentWeek], stream: IO[str]) -> None:
    writer = csv.writer(stream)
    writer.writerow(PANEL_COLUMNS)
    for row in panel:
        writer.writerow(
            [
                row.student_id,
                str(row.week),
                repr(row.minutes),
                row.problems,
                row.opportunities,
                "" if row.y_min is None else repr(row.y_min),
                "" if row.y_skill is None else row.y_skill,
                int(row.excluded),
            ]
        )


def read_panel(stream: IO[str]) -> list[StudentWeek]:
    reader = csv.DictReader(stream)
    panel: list[StudentWeek] = []
    for rec in reader:
        skills = int(rec["y_skill"]) if rec["y_skill"] != "" else None
        panel.append(
            StudentWeek(
                student_id=rec["student_id"],
                week=WeekId.parse(rec["week"]),
                minutes=float(rec["minutes"]),
                problems=int(rec["problems"]),
                opportunities=int(rec["opportunities"]),
                y_min=float(rec["y_min"]) if rec["y_min"] != "" else None,
                y_skill=skills,
                excluded=bool(int(rec["excluded"])),
            )
        )
    # Rebuild the cumulative-mastery column; it is derivable and not stored.
    current = None
    cum = 0
    for row in sorted(panel, key=lambda r: (r.student_id, r.week)):
        if row.student_id != current:
            current, cum = row.student_id, 0
        cum += row.y_skill or 0
        row.skills_cum = cum
    return panel


def ingest_report(
    parse_result: ParseResult, panel: Sequence[StudentWeek]
) -> dict:
    """JSON-able summary of one ingest run (row, reject, exclusion counts)."""
    targets_built = any(r.y_min is not None for r in panel)
    return {
        "parse": parse_result.report(),
        "students": len({r.student_id for r in panel}),
        "student_weeks": len(panel),
        "weeks": len({str(r.week) for r in panel}),
        "targets_built": targets_built,
        "excluded_rows": sum(1 for r in panel if r.excluded),
    }
