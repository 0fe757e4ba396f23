"""Defender-side tools: link-flap alerts, OOK traffic detection, random-traffic jammer."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import welch

from .link import LinkEvent, read_events, write_events  # noqa: F401  (re-exported)
from .sinks import read_trace, write_trace  # noqa: F401
from .timing import MonotonicClock

TrafficTrace = list[tuple[float, int]]

DEFAULT_LINK_WINDOW = 300.0
DEFAULT_MAX_CHANGES = 4
DEFAULT_BIN = 0.01
DEFAULT_OOK_SCORE = 12.0
CHIP_RATE_BAND = (0.5, 50.0)


class InsufficientData(ValueError):
    pass


class JamAborted(RuntimeError):
    def __init__(self, message: str, trace: TrafficTrace):
        super().__init__(message)
        self.trace = trace


@dataclass
class Alert:
    kind: str  # "link-toggling" | "ook-traffic"
    start: float
    end: float
    score: float
    evidence: dict = field(default_factory=dict)

    def describe(self) -> str:
        ev = " ".join(f"{k}={v}" for k, v in self.evidence.items())
        return f"ALERT {self.kind} [{self.start:.3f}, {self.end:.3f}] score={self.score:.2f} {ev}"


def detect_link_toggling(events: Sequence[LinkEvent], window: float = DEFAULT_LINK_WINDOW,
                         max_changes: int = DEFAULT_MAX_CHANGES) -> list[Alert]:
    """Alert wherever more than ``max_changes`` link changes fall inside ``window`` seconds.

    Overlapping offending windows are merged into one alert whose score is
    the largest change count seen in any single window.
    """
    ts = [e.timestamp for e in events]
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ValueError("link events must be sorted by timestamp")
    alerts: list[Alert] = []
    i = 0
    for j, t in enumerate(ts):
        while ts[i] <= t - window:
            i += 1
        count = j - i + 1
        if count <= max_changes:
            continue
        if alerts and ts[i] <= alerts[-1].end:
            a = alerts[-1]
            a.end = t
            a.score = max(a.score, count)
        else:
            alerts.append(Alert("link-toggling", ts[i], t, count))
    for a in alerts:
        a.evidence = {"changes": sum(1 for t in ts if a.start <= t <= a.end),
                      "window_s": window, "max_changes": max_changes}
    return alerts


def busy_series(trace: TrafficTrace, bin: float, burst_factor: float = 3.0) -> np.ndarray:
    """Fraction of each bin spent inside a packet burst.

    Two consecutive datagrams belong to the same burst when their gap is at
    most ``burst_factor`` times the median gap.
    """
    t = np.sort(np.asarray([p[0] for p in trace], dtype=float))
    t0 = t[0]
    n = int(np.floor((t[-1] - t0) / bin)) + 1
    gaps = np.diff(t)
    busy = np.zeros(n + 1)
    if not len(gaps):
        return busy[:n]
    limit = burst_factor * np.median(gaps)
    keep = gaps <= limit
    a, b = t[:-1][keep] - t0, t[1:][keep] - t0  # sorted, non-overlapping busy spans
    if not len(a):
        return busy[:n]
    # busy time before each bin edge, then differenced into per-bin occupancy
    edges = np.arange(n + 1) * bin
    done = np.concatenate([[0.0], np.cumsum(b - a)])
    k = np.searchsorted(b, edges, side="left")
    partial = np.where(k < len(a), np.clip(edges - a[np.minimum(k, len(a) - 1)], 0, None), 0.0)
    return np.diff(done[k] + partial) / bin


def ook_score(trace: TrafficTrace, bin: float = DEFAULT_BIN,
              band: tuple[float, float] = CHIP_RATE_BAND) -> tuple[float, float]:
    """(score, peak frequency) of the strongest periodic burst-edge component.

    On/off keyed bursts put their edges on a chip grid, which shows up as a
    spectral line in the edge train; random or steady traffic does not.
    """
    if len(trace) < 2:
        raise InsufficientData("need at least two datagrams")
    t = sorted(p[0] for p in trace)
    if (t[-1] - t[0]) < 16 * bin:
        raise InsufficientData(f"trace spans {t[-1] - t[0]:.3g} s, fewer than 16 bins of {bin} s")
    edges = np.abs(np.diff(busy_series(trace, bin)))
    edges[edges < 1e-6] = 0.0  # rounding residue from bin-edge arithmetic
    if edges.sum() < 4:  # fewer than two bursts starting and stopping
        return 0.0, 0.0
    fs = 1.0 / bin
    # about seven averaged segments on long traces, but never shorter than 5.12 s
    nperseg = int(min(4096, max(512, 2 ** np.floor(np.log2(max(len(edges) / 4, 1))))))
    freqs, psd = welch(edges, fs=fs, nperseg=min(nperseg, len(edges)), detrend="constant")
    lo, hi = band[0], min(band[1], fs / 2)
    sel = (freqs >= lo) & (freqs <= hi)
    if sel.sum() < 3:
        raise InsufficientData("trace too short to resolve the chip-rate band")
    p = psd[sel]
    floor = np.median(p)
    if floor <= 0:
        return (float("inf"), float(freqs[sel][np.argmax(p)])) if p.max() > 0 else (0.0, 0.0)
    k = int(np.argmax(p))
    # a short trace averages few segments, so its noise peaks run higher
    n_avg = (len(edges) - nperseg) // (nperseg // 2) + 1 if len(edges) > nperseg else 1
    shrink = max(1.0, math.sqrt(4 / n_avg))
    return float(p[k] / floor / shrink), float(freqs[sel][k])


def detect_ook_traffic(trace: TrafficTrace, bin: float = DEFAULT_BIN,
                       min_score: float = DEFAULT_OOK_SCORE) -> list[Alert]:
    score, peak = ook_score(trace, bin)
    if score < min_score:
        return []
    ts = [p[0] for p in trace]
    return [Alert("ook-traffic", min(ts), max(ts), score,
                  {"peak_hz": round(peak, 3), "packets": len(trace), "bin_s": bin})]


@dataclass(frozen=True)
class JamProfile:
    """Uniform ranges for the jammer's random traffic."""

    gap: tuple[float, float] = (0.01, 0.5)  # idle time between bursts, s
    burst: tuple[float, float] = (0.01, 0.3)  # burst length, s
    rate: tuple[float, float] = (50.0, 500.0)  # datagrams per second inside a burst
    size: tuple[int, int] = (64, 1472)  # datagram size, bytes

    def __post_init__(self):
        for name in ("gap", "burst", "rate", "size"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} range must satisfy 0 < low <= high")


def jam(duration: float, profile: JamProfile, sink, seed: int | None = None, clock=None) -> TrafficTrace:
    """Emit randomly timed, randomly sized UDP bursts for ``duration`` seconds."""
    clock = MonotonicClock() if clock is None else clock
    rng = np.random.default_rng(seed)
    trace: TrafficTrace = []
    if duration <= 0:
        return trace
    t0 = clock.now()
    t = rng.uniform(*profile.gap)
    while t < duration:
        burst_end = min(t + rng.uniform(*profile.burst), duration)
        step = 1.0 / rng.uniform(*profile.rate)
        while t < burst_end:
            size = int(rng.integers(profile.size[0], profile.size[1] + 1))
            clock.sleep_until(t0 + t)
            now = clock.now() - t0
            try:
                sink.send(bytes(size), now)
            except OSError as exc:
                raise JamAborted(f"sink failed after {len(trace)} datagrams: {exc}", trace) from exc
            trace.append((now, size))
            t += step
        t = burst_end + rng.uniform(*profile.gap)
    return trace
