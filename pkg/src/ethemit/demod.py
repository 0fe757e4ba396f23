"""Receiver: IQ windows -> tone amplitudes -> preamble sync -> Manchester bits -> frames.

The capture is cut into windows of ``window_size`` samples. Each window is
reduced to one number, the Welch PSD at the tone bin. Until a preamble is
found the amplitude history is correlated against the chip template of the
enable byte; once found, the next 48 bits are decided two half-bit averages
at a time and handed to ``parse_frame``. The detector then re-arms for the
next frame.
"""
from __future__ import annotations

import json
import math
import queue
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.signal import correlate

from . import spectral
from .framing import ENABLE, FRAME_BITS, Frame, FrameError, bytes_to_bits, parse_frame
from .iqfile import IqBuffer, iter_iq, read_sidecar
from .linecode import OFF, SoftErrors, manchester_decode_pair, manchester_encode

MIN_WINDOWS_PER_BIT = 4


class DemodConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DemodConfig:
    """Receiver settings.

    ``freq`` is the absolute frequency of the line to track; the tone offset
    is ``freq - center_frequency``. With ``center_frequency == 0`` (raw
    sample streams) ``freq`` is simply the baseband offset.
    """

    freq: float
    sample_rate: float
    bit_time: float
    window_size: int = 2400
    enable_threshold: float = 0.7
    center_frequency: float = 0.0
    n_segments: int = spectral.DEFAULT_SEGMENTS
    band_bins: int = 0
    guard_bits: int = 2
    lookahead_bits: int = 4

    def __post_init__(self):
        if not (self.sample_rate > 0 and self.bit_time > 0 and self.window_size > 0):
            raise DemodConfigError("sample_rate, bit_time and window_size must be positive")
        exact = self.bit_time * self.sample_rate / self.window_size
        if abs(exact - round(exact)) > 1e-6 * max(1.0, exact):
            raise DemodConfigError(
                f"bit_time*sample_rate ({self.bit_time * self.sample_rate:g} samples) is not a whole "
                f"number of {self.window_size}-sample windows")
        if round(exact) < MIN_WINDOWS_PER_BIT:
            raise DemodConfigError(f"{round(exact)} windows per bit; need at least {MIN_WINDOWS_PER_BIT}")
        if not 0 < self.enable_threshold <= 1:
            raise DemodConfigError("enable_threshold must be in (0, 1]")
        spectral.segment_length(self.window_size, self.n_segments)

    @property
    def windows_per_bit(self) -> int:
        return int(round(self.bit_time * self.sample_rate / self.window_size))

    @property
    def freq_offset(self) -> float:
        return self.freq - self.center_frequency

    @property
    def window_duration(self) -> float:
        return self.window_size / self.sample_rate


def window_amplitude(window: np.ndarray, freq_offset: float, sample_rate: float,
                     n_segments: int = spectral.DEFAULT_SEGMENTS, band_bins: int = 0,
                     window_size: int | None = None) -> float:
    """Welch PSD of one window at the bin nearest ``freq_offset``."""
    x = np.asarray(window)
    if window_size is not None and len(x) != window_size:
        raise ValueError(f"window has {len(x)} samples, expected {window_size}")
    spectral.segment_length(len(x), n_segments)  # raises if too short
    _, psd = spectral.welch_psd(x, sample_rate, n_segments)
    k = spectral.tone_bin(freq_offset, sample_rate, len(psd))
    ks = (k + np.arange(-band_bins, band_bins + 1)) % len(psd)
    return float(psd[ks].sum())


def enable_chips(guard_bits: int = 2) -> list[int]:
    """Chip pattern the detector looks for: silence then the Manchester enable byte."""
    return [OFF] * (2 * guard_bits) + list(manchester_encode(bytes_to_bits(bytes([ENABLE]))).chips)


def enable_template(windows_per_bit: int, guard_bits: int = 2) -> np.ndarray:
    chips = enable_chips(guard_bits)
    n = len(chips) * windows_per_bit // 2
    idx = (2 * np.arange(n)) // windows_per_bit
    return np.asarray(chips, dtype=float)[idx]


def normalized_correlation(x: np.ndarray, template: np.ndarray) -> np.ndarray:
    """Pearson correlation of ``template`` against every full-overlap slice of ``x``.

    Constant slices (no variance) score 0.
    """
    x = np.asarray(x, dtype=float)
    m = len(template)
    if len(x) < m:
        return np.zeros(0)
    t = template - template.mean()
    tn = np.sqrt((t ** 2).sum())
    num = correlate(x, t, mode="valid")
    c1 = np.concatenate([[0.0], np.cumsum(x)])
    c2 = np.concatenate([[0.0], np.cumsum(x * x)])
    s1 = c1[m:] - c1[:-m]
    s2 = c2[m:] - c2[:-m]
    var = s2 - s1 * s1 / m
    floor = 1e-9 * np.maximum(s2, np.finfo(float).tiny)
    ok = var > floor
    r = np.zeros(len(num))
    r[ok] = num[ok] / (tn * np.sqrt(var[ok]))
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class EnableMatch:
    offset: int  # window index where the enable byte starts
    score: float


def _pick(r: np.ndarray, threshold: float, span: int) -> tuple[int, int] | None:
    """First threshold crossing and the best score within ``span`` after it."""
    hits = np.flatnonzero(r >= threshold)
    if not len(hits):
        return None
    s0 = int(hits[0])
    seg = r[s0:s0 + span + 1]
    return s0, s0 + int(np.argmax(seg))


def detect_enable(amplitudes: Sequence[float], windows_per_bit: int, threshold: float = 0.7,
                  guard_bits: int = 2, lookahead_bits: int = 4) -> EnableMatch | None:
    """Locate the enable byte in an amplitude history, or None.

    The correlation peak is taken within ``lookahead_bits`` of the first
    threshold crossing: 0xAA repeats every two bits, so the first crossing
    can sit a bit pair early.
    """
    a = np.asarray(amplitudes, dtype=float)
    if len(a) < 8 * windows_per_bit:
        return None
    tpl = enable_template(windows_per_bit, guard_bits)
    r = normalized_correlation(a, tpl)
    pick = _pick(r, threshold, lookahead_bits * windows_per_bit)
    if pick is None:
        return None
    _, peak = pick
    return EnableMatch(peak + guard_bits * windows_per_bit, float(r[peak]))


def samples_to_bit_manchester(amplitudes: Sequence[float], windows_per_bit: int,
                              stats: SoftErrors | None = None) -> int:
    """Decide one bit from its windows: mean of first half vs mean of second half.

    With an odd window count the middle window is ignored.
    """
    a = np.asarray(amplitudes, dtype=float)
    if len(a) != windows_per_bit:
        raise ValueError(f"expected {windows_per_bit} amplitudes, got {len(a)}")
    h = windows_per_bit // 2
    return manchester_decode_pair(float(a[:h].mean()), float(a[windows_per_bit - h:].mean()), stats)


@dataclass
class FrameAttempt:
    start_window: int
    start_time: float
    score: float
    bits: list[int]
    status: str  # "ok", "bad-preamble", "bad-crc", "truncated"
    payload_hex: str | None = None
    one_level: float = 0.0
    zero_level: float = 0.0
    snr_db: float | None = None

    @property
    def crc_ok(self) -> bool:
        return self.status == "ok"


@dataclass
class DemodReport:
    windows: int = 0
    enables: int = 0
    soft_errors: int = 0
    attempts: list[FrameAttempt] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def frames_ok(self) -> int:
        return sum(a.crc_ok for a in self.attempts)

    def to_dict(self) -> dict:
        return {
            "windows": self.windows,
            "enables": self.enables,
            "soft_errors": self.soft_errors,
            "frames_ok": self.frames_ok,
            "config": self.config,
            "frames": [
                {"start_time": a.start_time, "start_window": a.start_window, "score": a.score,
                 "status": a.status, "crc_ok": a.crc_ok, "payload": a.payload_hex,
                 "snr_db": a.snr_db, "one_level": a.one_level, "zero_level": a.zero_level}
                for a in self.attempts
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, default=float))


class Demodulator:
    """Single-consumer receive state machine.

    Feed samples (any chunking) or precomputed window amplitudes; completed
    frame attempts are returned as they are decided.
    """

    def __init__(self, config: DemodConfig, keep_trace: bool = False):
        self.config = config
        self.W = config.windows_per_bit
        self.template = enable_template(self.W, config.guard_bits)
        self.report = DemodReport(config=asdict(config))
        self.stats = SoftErrors()
        self.trace: list[np.ndarray] | None = [] if keep_trace else None
        self._pending = np.zeros(0, dtype=np.complex128)
        self._hist = np.zeros(0)
        self._base = 0  # global window index of _hist[0]
        self._scan = 0  # next template start to test
        self._offset: int | None = None  # enable position once synced
        self._score = 0.0
        # on/off mask of the enable byte's windows, for level estimates
        self._pre_mask = self.template[config.guard_bits * self.W:] > 0.5

    @property
    def enabled(self) -> bool:
        return self._offset is not None

    def feed_samples(self, samples: np.ndarray) -> list[FrameAttempt]:
        x = np.concatenate([self._pending, np.asarray(samples, dtype=np.complex128)])
        n = len(x) // self.config.window_size
        self._pending = x[n * self.config.window_size:]
        if n == 0:
            return []
        windows = x[: n * self.config.window_size].reshape(n, self.config.window_size)
        amps = spectral.bin_power(windows, self.config.freq_offset, self.config.sample_rate,
                                  self.config.n_segments, self.config.band_bins)
        return self.feed_amplitudes(amps)

    def feed_amplitudes(self, amps: np.ndarray) -> list[FrameAttempt]:
        amps = np.asarray(amps, dtype=float)
        if self.trace is not None:
            self.trace.append(amps.copy())
        self._hist = np.concatenate([self._hist, amps])
        self.report.windows += len(amps)
        return self._run(final=False)

    def finish(self) -> list[FrameAttempt]:
        out = self._run(final=True)
        if self._offset is not None:
            out.append(self._truncated())
        self.report.soft_errors = self.stats.ties
        return out

    def amplitude_trace(self) -> np.ndarray:
        if self.trace is None:
            raise RuntimeError("Demodulator was created without keep_trace")
        return np.concatenate(self.trace) if self.trace else np.zeros(0)

    def _end(self) -> int:
        return self._base + len(self._hist)

    def _slice(self, a: int, b: int) -> np.ndarray:
        return self._hist[a - self._base:b - self._base]

    def _run(self, final: bool) -> list[FrameAttempt]:
        out = []
        while True:
            if self._offset is None and not self._sync(final):
                break
            if self._offset is not None:
                if self._offset + FRAME_BITS * self.W > self._end():
                    break
                out.append(self._decode())
        self._trim()
        self.report.soft_errors = self.stats.ties
        return out

    def _sync(self, final: bool) -> bool:
        m = len(self.template)
        span = self.config.lookahead_bits * self.W
        r = normalized_correlation(self._slice(self._scan, self._end()), self.template)
        if not len(r):
            return False
        pick = _pick(r, self.config.enable_threshold, span)
        if pick is None:
            self._scan += len(r)
            return False
        s0, peak = pick
        if not final and self._scan + s0 + span + m > self._end():
            self._scan += s0  # wait for the full lookahead
            return False
        self._offset = self._scan + peak + self.config.guard_bits * self.W
        self._score = float(r[peak])
        self.report.enables += 1
        return True

    def _decode(self) -> FrameAttempt:
        W, off = self.W, self._offset
        block = self._slice(off, off + FRAME_BITS * W).reshape(FRAME_BITS, W)
        bits = [samples_to_bit_manchester(row, W, self.stats) for row in block]
        pre = block[:8].ravel()
        one = float(pre[self._pre_mask].mean())
        zero = float(pre[~self._pre_mask].mean())
        snr = 10 * math.log10((one - zero) / zero) if zero > 0 and one > zero else None
        try:
            frame = parse_frame(bits)
            status, payload = "ok", frame.payload.hex()
        except FrameError as exc:
            status, payload = exc.reason, None
        att = FrameAttempt(off, off * self.config.window_duration, self._score, bits, status,
                           payload, one, zero, snr)
        self.report.attempts.append(att)
        self._scan = off + FRAME_BITS * W
        self._offset = None
        return att

    def _truncated(self) -> FrameAttempt:
        off = self._offset
        att = FrameAttempt(off, off * self.config.window_duration, self._score, [], "truncated")
        self.report.attempts.append(att)
        self._offset = None
        return att

    def _trim(self) -> None:
        keep = self._scan if self._offset is None else min(self._scan, self._offset)
        drop = max(0, keep - self._base)
        if drop:
            self._hist = self._hist[drop:]
            self._base += drop


class SampleQueue:
    """Bounded hand-off between a capture thread and the demodulator.

    ``put`` blocks when full, giving back-pressure; iteration blocks until
    data arrives and stops after ``close``.
    """

    _DONE = object()

    def __init__(self, maxsize: int = 16):
        self._q: queue.Queue = queue.Queue(maxsize)

    def put(self, samples: np.ndarray, timeout: float | None = None) -> None:
        self._q.put(samples, timeout=timeout)

    def close(self) -> None:
        self._q.put(self._DONE)

    def __iter__(self) -> Iterator[np.ndarray]:
        while True:
            item = self._q.get()
            if item is self._DONE:
                return
            yield item


def _resolve(source, config: DemodConfig) -> tuple[Iterable[np.ndarray], DemodConfig]:
    if isinstance(source, IqBuffer):
        if not math.isclose(source.sample_rate, config.sample_rate):
            raise DemodConfigError(
                f"capture sample rate {source.sample_rate:g} != configured {config.sample_rate:g}")
        config = replace(config, center_frequency=source.center_frequency)
        chunk = 1 << 20
        return (source.samples[i:i + chunk] for i in range(0, len(source.samples), chunk)), config
    if isinstance(source, (str, Path)):
        meta = read_sidecar(source)
        if not math.isclose(meta["sample_rate"], config.sample_rate):
            config = replace(config, sample_rate=meta["sample_rate"])
        config = replace(config, center_frequency=meta["center_frequency"])
        return iter_iq(source), config
    return source, config


def iter_frames(source, config: DemodConfig, report: list | None = None) -> Iterator[Frame]:
    """Yield valid frames as they are decoded; the DemodReport is appended to ``report``."""
    chunks, config = _resolve(source, config)
    if abs(config.freq_offset) >= config.sample_rate / 2:
        raise DemodConfigError(
            f"target {config.freq:g} Hz lies outside the captured band around {config.center_frequency:g} Hz")
    demod = Demodulator(config)
    if report is not None:
        report.append(demod.report)
    for chunk in chunks:
        for att in demod.feed_samples(chunk):
            if att.crc_ok:
                yield Frame(bytes.fromhex(att.payload_hex), _attempt_crc(att))
    for att in demod.finish():
        if att.crc_ok:
            yield Frame(bytes.fromhex(att.payload_hex), _attempt_crc(att))


def _attempt_crc(att: FrameAttempt) -> int:
    value = 0
    for b in att.bits[-8:]:
        value = (value << 1) | b
    return value


def demodulate(source, config: DemodConfig) -> tuple[list[Frame], DemodReport]:
    """Decode every frame in ``source`` (IqBuffer, capture path, or iterable of sample chunks)."""
    holder: list[DemodReport] = []
    frames = list(iter_frames(source, config, holder))
    return frames, holder[0]
