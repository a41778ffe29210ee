"""Append-only journaled store for goal cycles.

One JSON document per line, flushed and fsynced on every append, so a crash
can lose at most the in-flight record and never corrupts earlier ones.
Loading replays the journal; a trailing partial line (torn write) is
tolerated and dropped.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .schemas import GoalCycleModel


class GoalStore:
    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._cycles: dict[str, list[GoalCycleModel]] = {}
        if self.path is not None and self.path.exists():
            self._replay()

    def _replay(self) -> None:
        text = self.path.read_text(encoding="utf-8")
        for line in text.splitlines():
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                # torn tail write from a crash; everything before it is good
                break
            cycle = GoalCycleModel.model_validate(record)
            self._cycles.setdefault(cycle.student_id, []).append(cycle)

    def cycles_for(self, student_id: str) -> list[GoalCycleModel]:
        with self._lock:
            return list(self._cycles.get(student_id, []))

    def seed(self, cycles: list[GoalCycleModel]) -> None:
        """Install fixture cycles in memory without journaling them."""
        with self._lock:
            for cycle in cycles:
                self._cycles.setdefault(cycle.student_id, []).append(cycle)

    def next_index(self, student_id: str) -> int:
        with self._lock:
            return len(self._cycles.get(student_id, [])) + 1

    def append(self, cycle: GoalCycleModel) -> GoalCycleModel:
        # Writes per student are serialized by the store lock.
        with self._lock:
            if self.path is not None:
                line = json.dumps(
                    cycle.model_dump(mode="json"), sort_keys=True
                )
                with open(self.path, "a", encoding="utf-8") as f:
                    f.write(line + "\n")
                    f.flush()
                    os.fsync(f.fileno())
            self._cycles.setdefault(cycle.student_id, []).append(cycle)
            return cycle
