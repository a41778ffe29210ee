"""Ingestion: parsing, week mapping, weekly aggregation, Tukey fence, targets."""

from __future__ import annotations

import io
import random
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from engagecast.ingest import (
    EmptyInput,
    IngestConfig,
    MissingColumn,
    Outcome,
    StudentWeek,
    UnknownStudent,
    aggregate_weekly,
    build_targets,
    ingest_report,
    parse_events,
    read_panel,
    tukey_filter,
    write_panel,
)
from engagecast.weeks import WeekId, to_iso_week, week_range

from .oracles import tukey_keep_mask

HEADER = "student_id,timestamp,duration_seconds,outcome,kc_ids,opportunity,problem_id\n"


def _row(student="s1", ts="2011-06-09T10:00:00Z", dur="120", outcome="CORRECT",
         kcs="add;sub", opp="1", prob="p1"):
    return f"{student},{ts},{dur},{outcome},{kcs},{opp},{prob}\n"


# --- to_iso_week -----------------------------------------------------------
# Expected strings frozen from a hand-built ISO calendar table:
# 2011-01-03 was a Monday, so 2011-W01 spans Jan 3-9 and 2011-01-01 (Sat)
# belongs to 2010-W52; June 9 2011 falls 157 days after Jan 3, i.e. 22 full
# weeks after W01 -> W23.
CALENDAR_TABLE = [
    ("2011-06-09T10:00:00+00:00", "2011-W23"),
    ("2011-01-01T00:00:00+00:00", "2010-W52"),
    ("2011-01-03T00:00:00+00:00", "2011-W01"),
    ("2011-01-09T23:59:59+00:00", "2011-W01"),
    ("2010-01-01T12:00:00+00:00", "2009-W53"),  # 2009 is a 53-week ISO year
    ("2012-12-31T08:00:00+00:00", "2013-W01"),  # Monday belonging to next ISO year
]


@pytest.mark.parametrize("ts,expected", CALENDAR_TABLE)
def test_to_iso_week_calendar_table(ts, expected):
    assert str(to_iso_week(datetime.fromisoformat(ts))) == expected


def test_week_span_symmetry():
    monday = datetime(2011, 6, 6, 0, 0, tzinfo=timezone.utc)
    sunday = datetime(2011, 6, 12, 23, 59, tzinfo=timezone.utc)
    assert to_iso_week(monday) == to_iso_week(sunday) == WeekId(2011, 23)


def test_weekid_ordering_and_arithmetic():
    w = WeekId.parse("2010-W52")
    assert str(w.next()) == "2011-W01"
    assert w.next().diff(w) == 1
    assert sorted(["2011-W01", "2010-W52"]) == [str(x) for x in sorted([w.next(), w])]
    assert len(week_range(w, w.shift(3))) == 4


# --- parse_events ----------------------------------------------------------

def test_parse_empty_file_with_header():
    res = parse_events(io.StringIO(HEADER))
    assert res.events == [] and res.n_rejected == 0 and res.n_rows == 0


def test_parse_negative_duration_rejected():
    res = parse_events(io.StringIO(HEADER + _row(dur="-3")))
    assert res.events == [] and res.n_rejected == 1


def test_parse_three_valid_one_bad_timestamp():
    text = HEADER + _row() + _row(ts="not-a-time") + _row(student="s2") + _row(prob="p2")
    res = parse_events(io.StringIO(text))
    assert len(res.events) == 3
    assert res.n_rejected == 1
    assert res.n_rows == 4


def test_parse_missing_column_fails_whole_file():
    with pytest.raises(MissingColumn):
        parse_events(io.StringIO("student_id,timestamp\noops,2011-06-09T10:00:00Z\n"))


def test_parse_tab_delimited_autodetect():
    text = HEADER.replace(",", "\t") + _row().replace(",", "\t")
    res = parse_events(io.StringIO(text))
    assert len(res.events) == 1
    assert res.events[0].kc_ids == ("add", "sub")


def test_parse_rejects_duplicate_kc_and_bad_outcome():
    text = HEADER + _row(kcs="add;add") + _row(outcome="MEH")
    res = parse_events(io.StringIO(text))
    assert res.n_rejected == 2


def test_parse_naive_timestamp_gets_config_timezone():
    res = parse_events(io.StringIO(HEADER + _row(ts="2011-06-09T10:00:00")))
    assert res.events[0].timestamp.tzinfo == timezone.utc


def test_parse_column_mapping():
    cfg = IngestConfig(column_map={"student_id": "sid"})
    text = HEADER.replace("student_id", "sid") + _row()
    res = parse_events(io.StringIO(text), cfg)
    assert res.events[0].student_id == "s1"


# --- aggregate_weekly ------------------------------------------------------

def _events(text):
    return parse_events(io.StringIO(HEADER + text)).events


def test_single_event_minutes():
    panel = aggregate_weekly(_events(_row(dur="120")))
    assert len(panel) == 1
    assert panel[0].minutes == pytest.approx(2.0)


def test_interior_week_materialized_with_zeros():
    rows = _row(ts="2011-01-03T10:00:00Z") + _row(ts="2011-01-17T10:00:00Z")
    panel = aggregate_weekly(_events(rows))
    assert [str(r.week) for r in panel] == ["2011-W01", "2011-W02", "2011-W03"]
    middle = panel[1]
    assert middle.minutes == 0.0 and middle.problems == 0 and middle.opportunities == 0


# Hand-computed fixture: 10 events, 2 students, 3 weeks. Expected values
# worked out on paper from the rows below (spreadsheet-style).
FIXTURE_ROWS = (
    _row("a", "2011-01-03T09:00:00Z", "60", "CORRECT", "add", "1", "p1")
    + _row("a", "2011-01-04T09:00:00Z", "90", "INCORRECT", "add", "2", "p1")
    + _row("a", "2011-01-05T09:00:00Z", "30", "HINT", "", "", "p2")
    + _row("a", "2011-01-12T09:00:00Z", "120", "CORRECT", "sub", "1", "p3")
    + _row("a", "2011-01-18T09:00:00Z", "240", "CORRECT", "add;sub", "3", "p4")
    + _row("b", "2011-01-03T10:00:00Z", "600", "CORRECT", "mul", "1", "q1")
    + _row("b", "2011-01-09T10:00:00Z", "60", "INCORRECT", "mul", "2", "q2")
    + _row("b", "2011-01-17T10:00:00Z", "30", "HINT", "mul", "3", "q1")
    + _row("b", "2011-01-17T11:00:00Z", "30", "CORRECT", "mul", "4", "q1")
    + _row("b", "2011-01-17T12:00:00Z", "60", "CORRECT", "div", "1", "q3")
)


def test_aggregate_fixture_matches_hand_computation():
    panel = aggregate_weekly(_events(FIXTURE_ROWS))
    by_key = {(r.student_id, str(r.week)): r for r in panel}
    assert len(panel) == 6  # both students span W01..W03

    a1 = by_key[("a", "2011-W01")]
    assert a1.minutes == pytest.approx(3.0)  # (60+90+30)/60
    assert a1.problems == 2  # p1, p2
    assert a1.opportunities == 2  # kc-bearing events only

    a2 = by_key[("a", "2011-W02")]
    assert a2.minutes == pytest.approx(2.0) and a2.problems == 1 and a2.opportunities == 1

    b1 = by_key[("b", "2011-W01")]  # Jan 3 and Jan 9 are both W01
    assert b1.minutes == pytest.approx(11.0)
    assert b1.problems == 2 and b1.opportunities == 2

    b2 = by_key[("b", "2011-W02")]
    assert b2.minutes == 0.0 and b2.problems == 0

    b3 = by_key[("b", "2011-W03")]
    assert b3.minutes == pytest.approx(2.0)
    assert b3.problems == 2  # q1, q3
    assert b3.opportunities == 3


def test_aggregation_permutation_invariant():
    events = _events(FIXTURE_ROWS)
    shuffled = events[:]
    random.Random(7).shuffle(shuffled)
    assert aggregate_weekly(shuffled) == aggregate_weekly(events)


def test_minutes_mass_conservation():
    events = _events(FIXTURE_ROWS)
    panel = aggregate_weekly(events)
    total_panel = sum(r.minutes for r in panel)
    total_events = sum(e.duration_seconds for e in events) / 60.0
    assert total_panel == pytest.approx(total_events, rel=1e-9)


# --- tukey_filter ----------------------------------------------------------

def test_tukey_equal_values_all_kept():
    assert tukey_filter([5, 5, 5, 5], 1.5) == [True] * 4


def test_tukey_outlier_excluded_vs_oracle():
    values = [1, 2, 3, 4, 100]
    mask = tukey_filter(values, 1.5)
    assert mask == tukey_keep_mask(values, 1.5)
    assert mask == [True, True, True, True, False]


def test_tukey_huge_k_keeps_all():
    values = [1, 2, 3, 4, 1000]
    assert all(tukey_filter(values, 1e9))


def test_tukey_empty_raises():
    with pytest.raises(EmptyInput):
        tukey_filter([], 1.5)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=1000),
    st.floats(min_value=0.1, max_value=10.0),
)
def test_tukey_matches_bruteforce(values, k):
    assert tukey_filter(values, k) == tukey_keep_mask(values, k)


# --- build_targets ---------------------------------------------------------

def _bare_panel(student="s", n_weeks=4, minutes=None):
    w0 = WeekId(2011, 10)
    minutes = minutes or [10.0] * n_weeks
    return [
        StudentWeek(student, w0.shift(i), minutes[i], problems=1, opportunities=1)
        for i in range(n_weeks)
    ]


def test_first_mastery_counting():
    panel = _bare_panel()
    w10 = WeekId(2011, 10)
    out = build_targets(panel, [("s", "add", w10), ("s", "sub", w10)])
    assert [r.y_skill for r in out] == [2, 0, 0, 0]
    assert [r.skills_cum for r in out] == [2, 2, 2, 2]


def test_no_mastery_events_all_zero():
    out = build_targets(_bare_panel(), [])
    assert all(r.y_skill == 0 for r in out)


def test_unknown_student_raises():
    with pytest.raises(UnknownStudent):
        build_targets(_bare_panel(), [("ghost", "add", WeekId(2011, 10))])


def test_exclusion_count_matches_oracle():
    minutes = [10.0, 12.0, 11.0, 9.0, 10.5, 500.0, 11.5, 10.2]
    panel = _bare_panel(n_weeks=8, minutes=minutes)
    out = build_targets(panel, [])
    oracle_min = tukey_keep_mask([r.minutes for r in out], 1.5)
    oracle_skill = tukey_keep_mask([0.0] * len(out), 1.5)
    expected = [not (a and b) for a, b in zip(oracle_min, oracle_skill)]
    assert [r.excluded for r in out] == expected
    assert sum(r.excluded for r in out) == 1


def test_y_skill_sums_to_distinct_mastered_skills():
    panel = _bare_panel(n_weeks=5)
    w = WeekId(2011, 10)
    events = [("s", "add", w), ("s", "sub", w.shift(2)), ("s", "mul", w.shift(2))]
    out = build_targets(panel, events)
    assert sum(r.y_skill for r in out) == 3
    assert all(r.y_skill >= 0 for r in out)


# --- panel round trip ------------------------------------------------------

def test_panel_roundtrip_and_report():
    events = _events(FIXTURE_ROWS)
    res = parse_events(io.StringIO(HEADER + FIXTURE_ROWS))
    panel = build_targets(aggregate_weekly(events), [("a", "add", WeekId(2011, 2))])
    buf = io.StringIO()
    write_panel(panel, buf)
    buf.seek(0)
    back = read_panel(buf)
    assert back == panel
    report = ingest_report(res, panel)
    assert report["parse"]["events"] == 10
    assert report["students"] == 2
    assert report["targets_built"] is True
