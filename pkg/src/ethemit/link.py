"""NIC link controllers for the speed-toggling transmitter.

Speeds are in Mbps; speed 0 means the link is down.
"""
from __future__ import annotations

import math
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

DOWN = 0
SPEEDS = (10, 100, 1000)


class LinkControlError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinkEvent:
    timestamp: float
    kind: str  # "up" | "down" | "speed"
    new_speed: int | None = None

    def to_line(self) -> str:
        if self.new_speed is None:
            return f"{self.timestamp:.9f} {self.kind}"
        return f"{self.timestamp:.9f} {self.kind} {self.new_speed}"

    @classmethod
    def from_line(cls, line: str) -> "LinkEvent":
        parts = line.split()
        if len(parts) not in (2, 3) or parts[1] not in ("up", "down", "speed"):
            raise ValueError(f"bad link event line: {line!r}")
        speed = int(parts[2]) if len(parts) == 3 else None
        return cls(float(parts[0]), parts[1], speed)


def write_events(path, events: Iterable[LinkEvent]) -> None:
    Path(path).write_text("".join(e.to_line() + "\n" for e in events))


def read_events(path) -> list[LinkEvent]:
    return [LinkEvent.from_line(line) for line in Path(path).read_text().splitlines()
            if line.strip() and not line.startswith("#")]


@dataclass(frozen=True)
class LinkProfile:
    """Transition latencies keyed by ``(from_speed, to_speed)``."""

    name: str
    latency: dict[tuple[int, int], float] = field(hash=False)

    def transition(self, frm: int, to: int) -> float:
        if frm == to:
            return 0.0
        try:
            return self.latency[(frm, to)]
        except KeyError:
            raise LinkControlError(f"{self.name}: no {frm}->{to} Mbps transition") from None

    def up_down(self, speed: int = 100, off: int = DOWN) -> tuple[float, float]:
        """(latency off->speed, latency speed->off)."""
        return self.transition(off, speed), self.transition(speed, off)


def _table(up_down: dict[int, tuple[float, float]], changes: dict[tuple[int, int], tuple[float, float]]):
    lat = {}
    for speed, (up, down) in up_down.items():
        lat[(DOWN, speed)] = up
        lat[(speed, DOWN)] = down
    for (lo, hi), (up, down) in changes.items():
        lat[(lo, hi)] = up
        lat[(hi, lo)] = down
    return lat


def device_profile(name: str, gige_up: float = 4.0) -> LinkProfile:
    """Measured link transition latencies for the reference devices.

    ``gige_up`` selects the 0->1000 Mbps bring-up time on pc, measured
    anywhere from 4 to 6 seconds.
    """
    if name == "pc":
        if not 4.0 <= gige_up <= 6.0:
            raise ValueError("pc gige_up latency must lie in [4, 6] s")
        lat = _table({10: (4.0, 0.013), 100: (4.0, 0.013), 1000: (gige_up, 0.013)},
                     {(10, 100): (4.0, 4.0), (100, 1000): (4.0, 4.0)})
    elif name == "laptop":
        lat = _table({10: (4.0, 0.02), 100: (4.0, 0.024), 1000: (4.0, 0.024)},
                     {(10, 100): (4.0, 4.0), (100, 1000): (4.0, 4.0)})
    elif name == "embedded":
        lat = _table({10: (0.095, 0.17), 100: (0.095, 0.17)}, {(10, 100): (0.081, 0.072)})
    elif name == "ideal":
        lat = {(a, b): 0.0 for a in (DOWN, *SPEEDS) for b in (DOWN, *SPEEDS) if a != b}
    else:
        raise ValueError(f"unknown device profile {name!r}; choose from pc, laptop, embedded, ideal")
    return LinkProfile(name, lat)


class SimulatedLinkController:
    """In-process NIC model: each transition blocks for the profile latency."""

    def __init__(self, profile: LinkProfile, clock, initial_speed: int = DOWN):
        self.profile = profile
        self.clock = clock
        self.speed = initial_speed
        self.events: list[LinkEvent] = []

    def latency(self, frm: int, to: int) -> float:
        return self.profile.transition(frm, to)

    def set_speed(self, speed: int) -> float:
        if speed != DOWN and speed not in SPEEDS:
            raise LinkControlError(f"unsupported speed {speed}")
        if speed == self.speed:
            return self.clock.now()
        lat = self.profile.transition(self.speed, speed)
        self.clock.sleep_until(self.clock.now() + lat)
        done = self.clock.now()
        kind = "down" if speed == DOWN else ("up" if self.speed == DOWN else "speed")
        self.events.append(LinkEvent(done, kind, None if speed == DOWN else speed))
        self.speed = speed
        return done

    def link_up(self, speed: int = 1000) -> float:
        return self.set_speed(speed)

    def link_down(self) -> float:
        return self.set_speed(DOWN)

    def query_state(self) -> int:
        return self.speed


class ExternalCommandController:
    """Drives a real NIC through an ethtool-style wrapper command.

    The command is invoked as ``<cmd> up``, ``<cmd> down`` or
    ``<cmd> speed <mbps>`` and must exit 0 on success. ``profile`` supplies
    the worst-case latencies used for feasibility checks.
    """

    def __init__(self, cmd: str, clock, profile: LinkProfile, timeout: float = 30.0,
                 initial_speed: int = DOWN):
        self.argv = shlex.split(cmd)
        self.clock = clock
        self.profile = profile
        self.timeout = timeout
        self.speed = initial_speed
        self.events: list[LinkEvent] = []

    def latency(self, frm: int, to: int) -> float:
        return self.profile.transition(frm, to)

    def _run(self, *args: str) -> None:
        try:
            proc = subprocess.run([*self.argv, *args], capture_output=True, text=True,
                                  timeout=self.timeout)
        except subprocess.TimeoutExpired as exc:
            raise LinkControlError(f"{' '.join(args)}: timed out after {self.timeout} s") from exc
        except OSError as exc:
            raise LinkControlError(f"cannot run link command: {exc}") from exc
        if proc.returncode != 0:
            raise LinkControlError(f"{' '.join(args)}: exit {proc.returncode}: {proc.stderr.strip()}")

    def set_speed(self, speed: int) -> float:
        if speed == self.speed:
            return self.clock.now()
        if speed == DOWN:
            self._run("down")
            kind = "down"
        else:
            if self.speed == DOWN:
                self._run("up")
            self._run("speed", str(speed))
            kind = "up" if self.speed == DOWN else "speed"
        done = self.clock.now()
        self.events.append(LinkEvent(done, kind, None if speed == DOWN else speed))
        self.speed = speed
        return done

    def link_up(self, speed: int = 1000) -> float:
        return self.set_speed(speed)

    def link_down(self) -> float:
        return self.set_speed(DOWN)

    def query_state(self) -> int:
        return self.speed


def max_feasible_bitrate(profile: LinkProfile, on_speed: int = 100, off_speed: int = DOWN,
                         cap: float = 1000.0) -> float:
    """Highest toggling bit rate: each of the two chips absorbs one transition."""
    up, down = profile.up_down(on_speed, off_speed)
    total = up + down
    if total <= 0 or not math.isfinite(total):
        return cap
    return min(cap, 1.0 / (2.0 * total))
