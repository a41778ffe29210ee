"""ISO week identifiers and week arithmetic.

Weeks run Monday through Sunday and are keyed as ``YYYY-Www`` (e.g.
``2011-W23``). The string form sorts lexicographically in chronological
order, so week ids can double as sort keys in flat files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from functools import total_ordering

_WEEK_RE = re.compile(r"^(\d{4})-W(\d{2})$")


@total_ordering
@dataclass(frozen=True)
class WeekId:
    """One ISO-8601 week (Monday to Sunday)."""

    iso_year: int
    iso_week: int

    def __post_init__(self) -> None:
        if not 1 <= self.iso_week <= 53:
            raise ValueError(f"iso_week out of range: {self.iso_week}")
        # Reject week numbers the ISO calendar does not contain (e.g. W53
        # in a 52-week year).
        monday = date.fromisocalendar(self.iso_year, self.iso_week, 1)
        if monday.isocalendar()[:2] != (self.iso_year, self.iso_week):
            raise ValueError(f"no such ISO week: {self.iso_year}-W{self.iso_week:02d}")

    @classmethod
    def parse(cls, text: str) -> "WeekId":
        m = _WEEK_RE.match(text.strip())
        if m is None:
            raise ValueError(f"not a week id: {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))

    @classmethod
    def from_date(cls, d: date) -> "WeekId":
        iso = d.isocalendar()
        return cls(iso[0], iso[1])

    @classmethod
    def from_datetime(cls, ts: datetime) -> "WeekId":
        return cls.from_date(ts.date())

    def monday(self) -> date:
        return date.fromisocalendar(self.iso_year, self.iso_week, 1)

    def shift(self, weeks: int) -> "WeekId":
        return WeekId.from_date(self.monday() + timedelta(weeks=weeks))

    def next(self) -> "WeekId":
        return self.shift(1)

    def diff(self, other: "WeekId") -> int:
        """Number of weeks from ``other`` to ``self`` (signed)."""
        return (self.monday() - other.monday()).days // 7

    def __str__(self) -> str:
        return f"{self.iso_year:04d}-W{self.iso_week:02d}"

    def __lt__(self, other: "WeekId") -> bool:
        return (self.iso_year, self.iso_week) < (other.iso_year, other.iso_week)


def to_iso_week(ts: datetime) -> WeekId:
    """Map a timestamp to its ISO week (Monday is the first weekday)."""
    return WeekId.from_datetime(ts)


def week_range(first: WeekId, last: WeekId) -> list[WeekId]:
    """Contiguous inclusive run of weeks from ``first`` to ``last``."""
    if last < first:
        raise ValueError(f"week range reversed: {first}..{last}")
    return [first.shift(i) for i in range(last.diff(first) + 1)]
