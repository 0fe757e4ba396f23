"""Monotonic time sources used by the transmitters and the jammer."""
from __future__ import annotations

import time

import numpy as np


class ClockError(RuntimeError):
    """The time source went backwards."""


class MonotonicClock:
    """Wall-clock scheduling on ``time.monotonic``."""

    def now(self) -> float:
        return time.monotonic()

    def sleep_until(self, deadline: float) -> None:
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return
            # coarse sleep, then spin the last millisecond
            if remaining > 2e-3:
                time.sleep(remaining - 1e-3)

    def sleep(self, seconds: float) -> None:
        self.sleep_until(self.now() + seconds)


class SimulatedClock:
    """Virtual time that advances only when slept on.

    ``jitter`` adds a uniform [0, jitter) wake-up latency to every sleep,
    standing in for OS scheduler slop.
    """

    def __init__(self, start: float = 0.0, jitter: float = 0.0, seed: int | None = None):
        self._t = float(start)
        self.jitter = float(jitter)
        self._rng = np.random.default_rng(seed)

    def now(self) -> float:
        return self._t

    def sleep_until(self, deadline: float) -> None:
        self._t = max(self._t, float(deadline))
        if self.jitter:
            self._t += self._rng.uniform(0.0, self.jitter)

    def sleep(self, seconds: float) -> None:
        self.sleep_until(self._t + seconds)

    def advance(self, seconds: float) -> None:
        """Move time forward without jitter (work that takes time, e.g. a send)."""
        self._t += seconds


class MonotonicGuard:
    """Wraps a clock and raises ClockError if a reading goes backwards."""

    def __init__(self, clock):
        self.clock = clock
        self._last = None

    def now(self) -> float:
        t = self.clock.now()
        if self._last is not None and t < self._last:
            raise ClockError(f"clock went backwards: {t} < {self._last}")
        self._last = t
        return t

    def sleep_until(self, deadline: float) -> None:
        self.clock.sleep_until(deadline)
