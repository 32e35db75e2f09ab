"""Wall-clock bookkeeping per pipeline stage."""

from __future__ import annotations

import threading
import time
from contextlib import contextmanager


class StageTimer:
    """Accumulates seconds per named stage; safe to share between threads.

    With several workers, per-stage totals add up time spent in parallel
    and may exceed the elapsed wall-clock time.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.seconds: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            dt = time.perf_counter() - t0
            with self._lock:
                self.seconds[name] = self.seconds.get(name, 0.0) + dt

    def total(self) -> float:
        return sum(self.seconds.values())


@contextmanager
def _noop():
    yield


def stage(timer: StageTimer | None, name: str):
    """``timer.stage(name)`` or a no-op context when ``timer`` is None."""
    return timer.stage(name) if timer is not None else _noop()
