"""Clock abstraction separating simulated time from wall-clock time.

Virtual time lets a 30-day experiment finish in seconds: sleeps advance
the counter instead of blocking. The system clock is used by the live
device loop and the service.
"""
from __future__ import annotations

import time


class VirtualClock:
    """Manually advanced clock; sleep() jumps forward instantly."""

    __slots__ = ("_t",)

    def __init__(self, start: float = 0.0):
        self._t = float(start)

    def now(self) -> float:
        return self._t

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot sleep a negative duration")
        self._t += seconds

    def advance_to(self, t: float) -> None:
        if t < self._t:
            raise ValueError("virtual time cannot move backwards")
        self._t = t


class SystemClock:
    """Wall-clock passthrough."""

    __slots__ = ()

    def now(self) -> float:
        return time.time()

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)
