"""Cooperative wall-clock limits for long-running learners."""

from __future__ import annotations

import time


class LearningTimeout(RuntimeError):
    pass


class Deadline:
    """Call :meth:`check` at safe points; raises once the budget is spent."""

    def __init__(self, seconds: float | None = None):
        self.seconds = seconds
        self._end = None if seconds is None else time.monotonic() + seconds

    def check(self) -> None:
        if self._end is not None and time.monotonic() > self._end:
            raise LearningTimeout(f"time limit of {self.seconds:g}s exceeded")

    @property
    def remaining(self) -> float:
        if self._end is None:
            return float("inf")
        return self._end - time.monotonic()


NO_DEADLINE = Deadline(None)
