"""Transmitters: turn a chip stream into network activity.

Two carriers of the on/off keying:

* ``modulate_udp`` floods UDP datagrams during on-chips and stays silent
  during off-chips.
* ``modulate_toggle`` drives a link controller between an "on" speed and
  an "off" speed (or link down).

Both schedule every chip against an absolute deadline computed from the
stream start, so sleep overshoot never accumulates.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .framing import Frame
from .link import DOWN, LinkEvent
from .linecode import ON, ChipStream, manchester_encode
from .sinks import DEFAULT_DESTINATION
from .timing import MonotonicGuard

MAX_PAYLOAD = 1480
DEFAULT_GAP_BITS = 3


class InfeasibleRate(ValueError):
    pass


class TransmissionAborted(RuntimeError):
    def __init__(self, message: str, report: "TxReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class UdpBurstConfig:
    payload_size: int = MAX_PAYLOAD
    payload_byte: int = 0x55  # 'U' = 01010101
    destination: tuple[str, int] = DEFAULT_DESTINATION
    packets_per_second: float = 100.0

    def __post_init__(self):
        if not 0 < self.payload_size <= MAX_PAYLOAD:
            raise ValueError(f"payload_size must be in 1..{MAX_PAYLOAD}")
        if not 0 <= self.payload_byte <= 0xFF:
            raise ValueError("payload_byte must be a byte")
        if not self.packets_per_second > 0:
            raise ValueError("packets_per_second must be positive")

    @property
    def payload(self) -> bytes:
        return bytes([self.payload_byte]) * self.payload_size


def merge_intervals(intervals: Sequence[tuple[float, float]], eps: float = 1e-9) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in sorted(intervals):
        if b <= a:
            continue
        if out and a <= out[-1][1] + eps:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


@dataclass(frozen=True)
class TxSchedule:
    """Nominal (activity, duration) plan; time 0 is the first chip edge."""

    entries: tuple[tuple[bool, float], ...]

    @classmethod
    def from_chips(cls, stream: ChipStream) -> "TxSchedule":
        return cls(tuple((c == ON, stream.chip_duration) for c in stream.chips))

    @property
    def duration(self) -> float:
        return sum(d for _, d in self.entries)

    def on_intervals(self) -> list[tuple[float, float]]:
        t, spans = 0.0, []
        for on, d in self.entries:
            if on:
                spans.append((t, t + d))
            t += d
        return merge_intervals(spans)


@dataclass
class ChipRecord:
    index: int
    on: bool
    nominal_start: float
    actual_start: float
    packets: int = 0
    transition_issued: float | None = None
    transition_done: float | None = None


@dataclass
class TxReport:
    """What a transmitter actually did. All times are relative to stream start."""

    method: str
    chip_duration: float
    duration: float
    chips: list[ChipRecord] = field(default_factory=list)
    packets: list[tuple[float, int]] = field(default_factory=list)
    events: list[LinkEvent] = field(default_factory=list)
    activity: list[tuple[float, float]] = field(default_factory=list)
    start_clock: float = 0.0

    def on_intervals(self) -> list[tuple[float, float]]:
        return merge_intervals(self.activity)

    def chip_counts(self) -> list[int]:
        return [c.packets for c in self.chips]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "chip_duration": self.chip_duration,
            "duration": self.duration,
            "start_clock": self.start_clock,
            "chips": [asdict(c) for c in self.chips],
            "packets": [list(p) for p in self.packets],
            "events": [asdict(e) for e in self.events],
            "activity": [list(a) for a in self.activity],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TxReport":
        return cls(
            method=d["method"],
            chip_duration=d["chip_duration"],
            duration=d["duration"],
            start_clock=d.get("start_clock", 0.0),
            chips=[ChipRecord(**c) for c in d.get("chips", [])],
            packets=[(float(t), int(n)) for t, n in d.get("packets", [])],
            events=[LinkEvent(**e) for e in d.get("events", [])],
            activity=[(float(a), float(b)) for a, b in d.get("activity", [])],
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "TxReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def message_stream(frames: Sequence[Frame], bit_time: float,
                   gap_bits: int = DEFAULT_GAP_BITS) -> tuple[ChipStream, list[int]]:
    """Chip stream for a run of frames, each preceded by ``gap_bits`` of silence.

    A trailing gap follows the last frame. Returns the stream and the chip
    index where each frame's enable byte begins.
    """
    if not frames:
        raise ValueError("no frames to send")
    gap = ChipStream.idle(gap_bits, bit_time / 2).chips
    chips: list[int] = []
    starts = []
    for frame in frames:
        chips.extend(gap)
        starts.append(len(chips))
        chips.extend(manchester_encode(frame.to_bits(), bit_time).chips)
    chips.extend(gap)
    return ChipStream(tuple(chips), bit_time / 2), starts


def modulate_udp(chips: ChipStream, cfg: UdpBurstConfig, clock, sink) -> TxReport:
    """Send datagrams at ``cfg.packets_per_second`` during on-chips only."""
    clock = MonotonicGuard(clock)
    d = chips.chip_duration
    gap = 1.0 / cfg.packets_per_second
    payload = cfg.payload
    t0 = clock.now()
    report = TxReport("udp", d, chips.duration, start_clock=t0)
    activity = []
    for i, chip in enumerate(chips.chips):
        start = t0 + i * d
        end = start + d
        clock.sleep_until(start)
        rec = ChipRecord(i, chip == ON, i * d, clock.now() - t0)
        report.chips.append(rec)
        if chip != ON:
            continue
        first = last = None
        k = 0
        while True:
            due = start + k * gap
            if due >= end:
                break
            clock.sleep_until(due)
            now = clock.now()
            if now >= end:
                break
            try:
                sink.send(payload, now - t0)
            except OSError as exc:
                report.activity = merge_intervals(activity)
                raise TransmissionAborted(f"sink failed at chip {i}: {exc}", report) from exc
            report.packets.append((now - t0, len(payload)))
            rec.packets += 1
            first = now if first is None else first
            last = now
            k += 1
        if first is not None:
            activity.append((first - t0, min(last + gap, end) - t0))
    clock.sleep_until(t0 + chips.duration)
    report.activity = merge_intervals(activity)
    return report


def check_toggle_feasible(chip_duration: float, controller, on_speed: int, off_speed: int) -> None:
    up = controller.latency(off_speed, on_speed)
    down = controller.latency(on_speed, off_speed)
    worst = max(up, down)
    if chip_duration < worst:
        which = "up" if up >= down else "down"
        raise InfeasibleRate(
            f"chip duration {chip_duration:g} s is shorter than the {which} transition "
            f"latency {worst:g} s ({off_speed}->{on_speed} Mbps); "
            f"max rate is {1 / (2 * (up + down)):.4g} bit/s")


def modulate_toggle(chips: ChipStream, controller, on_speed: int = 100, off_speed: int = DOWN) -> TxReport:
    """Key the link between ``on_speed`` (on-chips) and ``off_speed`` (off-chips).

    Emission is modelled as present while the link sits at ``on_speed``;
    a transition counts from when the controller reports it complete.
    """
    d = chips.chip_duration
    check_toggle_feasible(d, controller, on_speed, off_speed)
    clock = MonotonicGuard(controller.clock)
    if controller.query_state() != off_speed:
        controller.set_speed(off_speed)
    n_events = len(controller.events)
    t0 = clock.now()
    report = TxReport("toggle", d, chips.duration, start_clock=t0)
    activity = []
    on_since = None

    def finish():
        report.events = [LinkEvent(e.timestamp - t0, e.kind, e.new_speed)
                         for e in controller.events[n_events:]]
        report.activity = merge_intervals(activity)

    for i, chip in enumerate(chips.chips):
        start = t0 + i * d
        end = start + d
        clock.sleep_until(start)
        now = clock.now()
        rec = ChipRecord(i, chip == ON, i * d, now - t0)
        report.chips.append(rec)
        target = on_speed if chip == ON else off_speed
        current = controller.query_state()
        if current == target:
            continue
        lat = controller.latency(current, target)
        if lat > end - now:
            finish()
            raise InfeasibleRate(f"chip {i}: {lat:g} s transition does not fit the "
                                 f"{end - now:g} s left in the chip")
        rec.transition_issued = now - t0
        done = controller.set_speed(target)
        rec.transition_done = done - t0
        if target == on_speed:
            on_since = done
        elif on_since is not None:
            activity.append((on_since - t0, done - t0))
            on_since = None
    clock.sleep_until(t0 + chips.duration)
    if on_since is not None:
        done = controller.set_speed(off_speed)
        activity.append((on_since - t0, done - t0))
    finish()
    return report


def nominal_frame_times(frame_chip_starts: Sequence[int], chip_duration: float) -> list[float]:
    return [s * chip_duration for s in frame_chip_starts]


def packets_in(report: TxReport, a: float, b: float) -> int:
    return sum(1 for t, _ in report.packets if a <= t < b)


def chip_drift(report: TxReport) -> float:
    """Largest |actual - nominal| chip start offset in seconds."""
    return max((abs(c.actual_start - c.nominal_start) for c in report.chips), default=0.0)

