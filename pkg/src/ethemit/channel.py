"""Baseband model of the cable emanation as seen by an SDR.

Activity (on-intervals from a schedule or a transmit report) keys a complex
tone at ``carrier_offset`` from the tuner frequency. White Gaussian noise is
scaled so the in-band SNR, measured as tone-bin power over noise-bin power
of the demodulator's Welch estimate, equals ``snr_db``.

No RF effects are modelled; distance maps onto the SNR knob only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

import numpy as np

from . import spectral
from .iqfile import IqBuffer
from .tx import merge_intervals

DEFAULT_SAMPLE_RATE = 2.4e6
DEFAULT_OFFSET = 10e3
DEFAULT_WINDOW = 2400

# Absolute frequency of the strongest emission line per device.
DEVICE_CARRIERS = {
    "pc": 250.000e6,
    "laptop": 249.99488e6,
    "embedded": 250.00285e6,
}

# (multiple of the 250 MHz band, level relative to it in dB). Only the 0 dB
# base band level is grounded in measurement; the weaker bands are placeholders.
PC_HARMONICS = ((1.0, 0.0), (0.5, -9.0), (1.5, -6.0), (2.5, -12.0))


class ChannelConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelParams:
    center_frequency: float = DEVICE_CARRIERS["pc"] - DEFAULT_OFFSET
    carrier_offset: float = DEFAULT_OFFSET
    sample_rate: float = DEFAULT_SAMPLE_RATE
    snr_db: float = math.inf
    harmonics: tuple[tuple[float, float], ...] = ((1.0, 0.0),)
    on_amplitude: float = 1.0
    seed: int = 0
    window_size: int = DEFAULT_WINDOW
    n_segments: int = spectral.DEFAULT_SEGMENTS
    band: float = 1.0  # which harmonic multiple the tuner sits on

    def __post_init__(self):
        if not self.sample_rate > 2 * abs(self.carrier_offset):
            raise ChannelConfigError(
                f"sample rate {self.sample_rate:g} cannot represent a {self.carrier_offset:g} Hz offset")
        if any(rel > 0 for _, rel in self.harmonics):
            raise ChannelConfigError("harmonic levels are relative to the strongest band and must be <= 0 dB")
        if not self.on_amplitude > 0:
            raise ChannelConfigError("on_amplitude must be positive")
        if math.isnan(self.snr_db):
            raise ChannelConfigError("snr_db is NaN")
        spectral.segment_length(self.window_size, self.n_segments)

    @property
    def carrier(self) -> float:
        """Absolute frequency of the line the tuner is centred near."""
        return self.center_frequency + self.carrier_offset

    @property
    def fundamental(self) -> float:
        return self.carrier / self.band

    @property
    def noise_sigma(self) -> float:
        """RMS magnitude of the complex noise."""
        if math.isinf(self.snr_db) and self.snr_db > 0:
            return 0.0
        gain = spectral.coherent_gain_ratio(self.window_size, self.n_segments)
        return math.sqrt(self.on_amplitude ** 2 * gain / 10 ** (self.snr_db / 10))

    def lines(self) -> list[tuple[float, float]]:
        """In-band emission lines as (baseband Hz, linear amplitude)."""
        out = []
        for mult, rel in self.harmonics:
            f = mult * self.fundamental - self.center_frequency
            if abs(f) < self.sample_rate / 2:
                out.append((f, self.on_amplitude * 10 ** (rel / 20)))
        return out

    def tuned_to(self, multiple: float) -> "ChannelParams":
        """Same emitter, tuner moved onto another harmonic band."""
        return replace(self, center_frequency=multiple * self.fundamental - self.carrier_offset, band=multiple)


def device_preset(name: str, **overrides) -> ChannelParams:
    if name not in DEVICE_CARRIERS:
        raise ChannelConfigError(f"unknown preset {name!r}; valid presets: {', '.join(DEVICE_CARRIERS)}")
    offset = overrides.pop("carrier_offset", DEFAULT_OFFSET)
    harmonics = PC_HARMONICS if name == "pc" else ((1.0, 0.0),)
    params = dict(center_frequency=DEVICE_CARRIERS[name] - offset, carrier_offset=offset, harmonics=harmonics)
    params.update(overrides)
    return ChannelParams(**params)


@dataclass(frozen=True)
class Activity:
    """Bare on-interval list; anything with ``on_intervals()`` and ``duration`` works."""

    intervals: tuple[tuple[float, float], ...]
    duration: float

    def on_intervals(self) -> list[tuple[float, float]]:
        return list(self.intervals)


def activity_from_trace(records: Sequence[tuple[float, int]], hold: float,
                        duration: float | None = None) -> Activity:
    """Treat the link as emitting for ``hold`` seconds after each datagram."""
    spans = merge_intervals([(t, t + hold) for t, _ in records])
    end = max((b for _, b in spans), default=0.0)
    return Activity(tuple(spans), end if duration is None else duration)


@dataclass(frozen=True)
class Interference:
    """Extra emission on the same band, e.g. from jamming traffic."""

    intervals: tuple[tuple[float, float], ...]
    relative_amplitude: float = 1.0
    seed: int = 0


def interference_from_trace(records: Sequence[tuple[float, int]], hold: float,
                            relative_amplitude: float = 1.0, seed: int = 0) -> Interference:
    spans = merge_intervals([(t, t + hold) for t, _ in records])
    return Interference(tuple(spans), relative_amplitude, seed)


def _fill(env: np.ndarray, starts: np.ndarray, stops: np.ndarray, lo: int, hi: int, values=None) -> None:
    """Add each [start, stop) index span (clipped to [lo, hi)) into env."""
    first = np.searchsorted(stops, lo, side="right")
    last = np.searchsorted(starts, hi, side="left")
    for k in range(first, last):
        a, b = max(starts[k], lo), min(stops[k], hi)
        if b > a:
            env[a - lo:b - lo] += 1.0 if values is None else values[k]


def _index_spans(intervals, fs):
    iv = sorted(intervals)
    starts = np.array([math.ceil(a * fs - 1e-9) for a, _ in iv], dtype=np.int64)
    stops = np.array([math.ceil(b * fs - 1e-9) for _, b in iv], dtype=np.int64)
    return starts, stops


def synthesize_chunks(activity, params: ChannelParams, interference: Interference | None = None,
                      chunk_size: int = 1 << 20) -> Iterator[np.ndarray]:
    """Yield the capture in consecutive chunks; concatenation equals ``synthesize``."""
    duration = float(activity.duration)
    if not duration > 0:
        raise ValueError("activity must have positive duration")
    fs = params.sample_rate
    n_total = int(round(duration * fs))
    noise_ss, phase_ss = np.random.SeedSequence(params.seed).spawn(2)
    noise_rng = np.random.default_rng(noise_ss)
    phase_rng = np.random.default_rng(phase_ss)
    lines = [(f, a, phase_rng.uniform(0, 2 * np.pi)) for f, a in params.lines()]
    starts, stops = _index_spans(merge_intervals(activity.on_intervals()), fs)
    if interference is not None:
        jrng = np.random.default_rng(interference.seed)
        j_starts, j_stops = _index_spans(interference.intervals, fs)
        j_phase = np.exp(1j * jrng.uniform(0, 2 * np.pi, len(j_starts)))
        j_amp = params.on_amplitude * interference.relative_amplitude
    sigma = params.noise_sigma
    w_off = 2 * np.pi * params.carrier_offset / fs
    for lo in range(0, n_total, chunk_size):
        hi = min(lo + chunk_size, n_total)
        n = np.arange(lo, hi)
        env = np.zeros(hi - lo)
        _fill(env, starts, stops, lo, hi)
        x = np.zeros(hi - lo, dtype=np.complex128)
        for f, amp, phase in lines:
            x += amp * env * np.exp(1j * (2 * np.pi * f / fs * n + phase))
        if interference is not None and len(j_starts):
            jenv = np.zeros(hi - lo, dtype=np.complex128)
            _fill(jenv, j_starts, j_stops, lo, hi, j_phase)
            x += j_amp * jenv * np.exp(1j * w_off * n)
        if sigma > 0:
            g = noise_rng.standard_normal((hi - lo, 2))
            x += (sigma / math.sqrt(2)) * (g[:, 0] + 1j * g[:, 1])
        yield x


def synthesize(activity, params: ChannelParams, interference: Interference | None = None) -> IqBuffer:
    chunks = list(synthesize_chunks(activity, params, interference))
    samples = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.complex128)
    return IqBuffer(samples, params.sample_rate, params.center_frequency)


def snr_sweep(activity, base: ChannelParams, snrs: Sequence[float]) -> list[IqBuffer]:
    if not len(snrs):
        raise ValueError("snr list is empty")
    return [synthesize(activity, replace(base, snr_db=float(s))) for s in snrs]


def suggested_gain(params: ChannelParams, fmt: str) -> float:
    """Fixed capture gain for chunked cu8 writing (about 4.5 sigma headroom)."""
    if fmt != "cu8":
        return 1.0
    peak = sum(a for _, a in params.lines()) + 4.5 * params.noise_sigma / math.sqrt(2)
    return 0.98 / peak
