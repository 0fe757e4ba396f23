"""Seeded end-to-end BER/FER experiments over the simulated channel.

Each grid point (rate, SNR) draws random payloads, runs them through the
transmitter into a recording sink (or a simulated link controller), keys the
channel model with the resulting activity, demodulates, and compares payload
bits against what was sent.

Bit times are real; only the sample rate is reduced. Because the channel's
SNR is defined per Welch bin, the per-window tone statistic has the same
distribution at any window size, so a small window and a matching low
sample rate give the same error rates as a full-rate capture at a fraction
of the cost. The sample rate is chosen so every rate in the grid gets an
integral number of windows per bit, with the fastest rate at
``min_windows_per_bit``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import __version__
from .channel import DEVICE_CARRIERS, device_preset, interference_from_trace, synthesize_chunks
from .defense import JamProfile, jam
from .demod import DemodConfig, Demodulator, samples_to_bit_manchester
from .framing import FRAME_BITS, PAYLOAD_BITS, build_frame, bytes_to_bits
from .link import DOWN, SimulatedLinkController, device_profile, max_feasible_bitrate
from .sinks import RecordingSink
from .spectral import segment_length
from .timing import SimulatedClock
from .tx import DEFAULT_GAP_BITS, InfeasibleRate, UdpBurstConfig, message_stream, modulate_toggle, modulate_udp

METHODS = ("udp", "toggle")
DEFAULT_SNRS = (5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 24.0)

# Measured in-band SNR (dB) against cable distance (cm), per transmission
# method and device, for relating the SNR axis to a physical setup.
DISTANCES_CM = (0, 50, 100, 150, 200, 250, 300, 350, 400, 450)
_ = None
SNR_AT_DISTANCE = {
    ("toggle", "pc"): (27, 15, 18, 14, 13, 7, 7, 6, 7, _),
    ("toggle", "laptop"): (8, 2.6, _, _, _, _, _, _, _, _),
    ("toggle", "embedded"): (12, 6.5, 6, 7, 5.5, 5, 5, 4.5, 3, 3),
    ("udp", "pc"): (24, 12, 13.5, 11, 11, 10, 8, 6, 9, 5),
    ("udp", "laptop"): (5.5, 5, 4.77, _, _, _, _, _, _, _),
    ("udp", "embedded"): (20, 11, 10, 8, _, _, _, _, _, _),
}
del _


class ExperimentError(ValueError):
    pass


def _fraction(x: float) -> Fraction:
    return Fraction(str(x)).limit_denominator(10 ** 6)


def _lcm(values: Sequence[Fraction]) -> Fraction:
    num = den = None
    for f in values:
        if num is None:
            num, den = f.numerator, f.denominator
        else:
            num = num * f.numerator // math.gcd(num, f.numerator)
            den = math.gcd(den, f.denominator)
    return Fraction(num, den)


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str = "pc"
    method: str = "udp"
    bit_rates: tuple[float, ...] = (1.0, 5.0, 10.0)
    snr_points: tuple[float, ...] = DEFAULT_SNRS
    bits_per_point: int = 1000
    seed: int = 0
    window_size: int = 64
    min_windows_per_bit: int = 10
    tone_bin: int = 4  # tone position in Welch sub-segment bins
    packets_per_second: float = 100.0
    gap_bits: int = DEFAULT_GAP_BITS
    on_speed: int = 100
    gige_up: float = 4.0
    jam: JamProfile | None = None
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "bit_rates", tuple(float(r) for r in self.bit_rates))
        object.__setattr__(self, "snr_points", tuple(float(s) for s in self.snr_points))
        if self.preset not in DEVICE_CARRIERS:
            raise ExperimentError(f"unknown preset {self.preset!r}")
        if self.method not in METHODS:
            raise ExperimentError(f"method must be one of {METHODS}")
        if not self.bit_rates or not self.snr_points:
            raise ExperimentError("need at least one rate and one SNR point")
        if any(not r > 0 for r in self.bit_rates):
            raise ExperimentError("bit rates must be positive")
        if any(math.isnan(s) for s in self.snr_points):
            raise ExperimentError("SNR points must be numbers")
        if len(set(self.bit_rates)) != len(self.bit_rates) or len(set(self.snr_points)) != len(self.snr_points):
            raise ExperimentError("duplicate rate or SNR point")
        if self.bits_per_point < 1000:
            raise ExperimentError("bits_per_point must be at least 1000")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")
        if self.method == "toggle":
            profile = device_profile(self.preset, self.gige_up)
            limit = max_feasible_bitrate(profile, self.on_speed, DOWN)
            up, down = profile.up_down(self.on_speed, DOWN)
            for r in self.bit_rates:
                if r > limit:
                    raise InfeasibleRate(
                        f"{r:g} bit/s exceeds the {limit:.4g} bit/s toggle limit of the {self.preset} "
                        f"link (up {up:g} s + down {down:g} s per bit)")

    @property
    def frames_per_point(self) -> int:
        return math.ceil(self.bits_per_point / PAYLOAD_BITS)

    @property
    def windows_per_second(self) -> Fraction:
        base = _lcm([_fraction(r) for r in self.bit_rates])
        need = Fraction(self.min_windows_per_bit) * max(_fraction(r) for r in self.bit_rates)
        return base * math.ceil(need / base)

    @property
    def sample_rate(self) -> float:
        return float(self.windows_per_second * self.window_size)

    @property
    def carrier_offset(self) -> float:
        return self.tone_bin * self.sample_rate / segment_length(self.window_size)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["jam"] = None if self.jam is None else asdict(self.jam)
        return d


@dataclass(frozen=True)
class Cell:
    bits: int
    bit_errors: int
    frames: int
    frame_errors: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0


@dataclass
class BerReport:
    method: str
    seed: int
    rates: tuple[float, ...]
    snrs: tuple[float, ...]
    cells: dict[tuple[float, float], Cell]
    metadata: dict = field(default_factory=dict)

    def cell(self, rate: float, snr: float) -> Cell:
        return self.cells[(float(rate), float(snr))]

    def ber_curve(self, rate: float) -> list[float]:
        return [self.cell(rate, s).ber for s in self.snrs]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BerReport):
            return NotImplemented
        return (self.method, self.seed, self.rates, self.snrs, self.cells) == \
            (other.method, other.seed, other.rates, other.snrs, other.cells)


def _point_seeds(seed: int, i: int, j: int):
    payload, channel, jammer = np.random.SeedSequence([seed, i, j]).spawn(3)
    return (np.random.default_rng(payload), int(channel.generate_state(1)[0]),
            int(jammer.generate_state(1)[0]))


def _transmit(spec: ExperimentSpec, frames, rate: float):
    chips, starts = message_stream(frames, 1.0 / rate, spec.gap_bits)
    if spec.method == "udp":
        cfg = UdpBurstConfig(packets_per_second=spec.packets_per_second)
        report = modulate_udp(chips, cfg, SimulatedClock(), RecordingSink())
    else:
        ctrl = SimulatedLinkController(device_profile(spec.preset, spec.gige_up), SimulatedClock())
        report = modulate_toggle(chips, ctrl, spec.on_speed, DOWN)
    return report, [s * chips.chip_duration for s in starts]


def forced_bits(trace: np.ndarray, start_window: int, windows_per_bit: int, count: int) -> list[int]:
    """Decide ``count`` bits at a known position, ignoring preamble detection."""
    out = []
    for k in range(count):
        a = start_window + k * windows_per_bit
        seg = trace[a:a + windows_per_bit]
        out.append(samples_to_bit_manchester(seg, windows_per_bit) if len(seg) == windows_per_bit else 0)
    return out


def run_point(spec: ExperimentSpec, i: int, j: int) -> Cell:
    """One grid cell: rate index ``i``, SNR index ``j``."""
    rate, snr = spec.bit_rates[i], spec.snr_points[j]
    rng, channel_seed, jam_seed = _point_seeds(spec.seed, i, j)
    payloads = rng.integers(0, 256, (spec.frames_per_point, 4), dtype=np.uint8)
    frames = [build_frame(bytes(p)) for p in payloads]
    report, frame_times = _transmit(spec, frames, rate)

    fs = spec.sample_rate
    params = device_preset(spec.preset, sample_rate=fs, carrier_offset=spec.carrier_offset, snr_db=snr,
                           seed=channel_seed, window_size=spec.window_size)
    interference = None
    if spec.jam is not None:
        jam_trace = jam(report.duration, spec.jam, RecordingSink(), seed=jam_seed, clock=SimulatedClock())
        interference = interference_from_trace(jam_trace, 1.0 / spec.jam.rate[0], seed=jam_seed)
    cfg = DemodConfig(freq=params.carrier, sample_rate=fs, bit_time=1.0 / rate, window_size=spec.window_size,
                      center_frequency=params.center_frequency)
    demod = Demodulator(cfg, keep_trace=True)
    for chunk in synthesize_chunks(report, params, interference):
        demod.feed_samples(chunk)
    demod.finish()
    trace = demod.amplitude_trace()
    W = cfg.windows_per_bit

    attempts = [a for a in demod.report.attempts if a.bits]
    used = set()
    bit_errors = frame_errors = 0
    tol = 0.5 / rate
    for frame, t_tx in zip(frames, frame_times):
        match = None
        for k, att in enumerate(attempts):
            if k not in used and abs(att.start_time - t_tx) <= tol:
                match = k
                break
        if match is not None:
            used.add(match)
            att = attempts[match]
            rx = att.bits
            ok = att.crc_ok and att.payload_hex == frame.payload.hex()
        else:
            rx = forced_bits(trace, int(round(t_tx / cfg.window_duration)), W, FRAME_BITS)
            ok = False
        tx_payload = bytes_to_bits(frame.payload)
        bit_errors += sum(a != b for a, b in zip(rx[8:8 + PAYLOAD_BITS], tx_payload))
        frame_errors += not ok
    return Cell(len(frames) * PAYLOAD_BITS, int(bit_errors), len(frames), int(frame_errors))


def _run_point_args(args):
    return run_point(*args)


def run_experiment(spec: ExperimentSpec) -> BerReport:
    jobs = [(spec, i, j) for i in range(len(spec.bit_rates)) for j in range(len(spec.snr_points))]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            results = list(pool.map(_run_point_args, jobs))
    else:
        results = [run_point(*job) for job in jobs]
    cells = {(spec.bit_rates[i], spec.snr_points[j]): cell for (_, i, j), cell in zip(jobs, results)}
    meta = {"spec": spec.to_dict(), "seed": spec.seed, "version": __version__,
            "sample_rate": spec.sample_rate, "carrier_offset": spec.carrier_offset}
    return BerReport(spec.method, spec.seed, spec.bit_rates, spec.snr_points, cells, meta)


CSV_COLUMNS = ("method", "rate_bps", "snr_db", "bits", "bit_errors", "ber", "frames", "frame_errors", "fer", "seed")


def _pct(x: float) -> str:
    return "0% (no errors)" if x == 0 else f"{100 * x:.1f}%"


def render_report(report: BerReport, fmt: str = "table") -> str:
    if not report.cells or not report.rates or not report.snrs:
        raise ExperimentError("report is empty")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in report.rates:
            for s in report.snrs:
                c = report.cell(r, s)
                w.writerow([report.method, repr(r), repr(s), c.bits, c.bit_errors, repr(c.ber),
                            c.frames, c.frame_errors, repr(c.fer), report.seed])
        return buf.getvalue()
    if fmt != "table":
        raise ExperimentError(f"unknown format {fmt!r}; use 'table' or 'csv'")
    header = [f"{report.method} BER"] + [f"{s:g} dB" for s in report.snrs]
    rows = [[f"{r:g} bit/s"] + [_pct(report.cell(r, s).ber) for s in report.snrs] for r in report.rates]
    widths = [max(len(row[k]) for row in [header] + rows) for k in range(len(header))]
    fmt_row = lambda row: " | ".join(cell.ljust(w) for cell, w in zip(row, widths))  # noqa: E731
    lines = [fmt_row(header), "-+-".join("-" * w for w in widths)] + [fmt_row(r) for r in rows]
    return "\n".join(lines) + "\n"


def parse_csv(text: str) -> BerReport:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ExperimentError("CSV has no data rows")
    if tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ExperimentError(f"unexpected CSV columns {tuple(rows[0].keys())}")
    rates, snrs, cells = [], [], {}
    for row in rows:
        r, s = float(row["rate_bps"]), float(row["snr_db"])
        rates.append(r) if r not in rates else None
        snrs.append(s) if s not in snrs else None
        cells[(r, s)] = Cell(int(row["bits"]), int(row["bit_errors"]), int(row["frames"]), int(row["frame_errors"]))
    return BerReport(rows[0]["method"], int(rows[0]["seed"]), tuple(rates), tuple(snrs), cells)


def distance_table() -> str:
    """Measured SNR-at-distance reference; rows = method/device, columns = cm, '-' = no signal."""
    lines = ["method/device | " + " | ".join(f"{d} cm" for d in DISTANCES_CM)]
    for (method, dev), row in SNR_AT_DISTANCE.items():
        lines.append(f"{method}/{dev} | " + " | ".join("-" if v is None else f"{v:g} dB" for v in row))
    return "\n".join(lines) + "\n"
