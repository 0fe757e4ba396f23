"""Command-line entry point.

Stages talk through files: ``tx`` writes a transmit report and datagram
trace, ``simulate`` turns either into an IQ capture, ``rx`` decodes a
capture, ``evaluate`` runs BER grids, ``detect`` and ``jam`` cover the
defender side.

Exit codes: 0 success, 1 usage or configuration error, 2 no data
(nothing decoded, trace too short), 3 runtime failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_NO_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _pair(cast):
    def parse(text: str):
        parts = text.split(",")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"expected LOW,HIGH, got {text!r}")
        return cast(parts[0]), cast(parts[1])
    return parse


def _hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected HOST:PORT, got {text!r}")
    return host, int(port)


def _positive(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ethemit", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("tx", help="frame, encode and transmit a message")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--message", help="message text (UTF-8)")
    src.add_argument("--hex", help="message bytes as hex")
    src.add_argument("--file", type=Path, help="read message bytes from a file")
    t.add_argument("--method", choices=("udp", "toggle"), default="udp")
    t.add_argument("--rate", type=_positive, default=10.0, help="bit rate in bit/s (default 10)")
    t.add_argument("--preset", choices=("pc", "laptop", "embedded", "ideal"), default="pc",
                   help="link latency profile for toggling (default pc)")
    t.add_argument("--gige-up", type=_positive, default=4.0, help="pc link-up latency at 1000 Mbps")
    t.add_argument("--on-speed", type=int, choices=(10, 100, 1000), default=100)
    t.add_argument("--pps", type=_positive, default=100.0, help="datagrams per second during on-chips")
    t.add_argument("--gap-bits", type=int, default=3, help="idle bits between frames")
    t.add_argument("--send", type=_hostport, help="really send UDP to HOST:PORT in real time")
    t.add_argument("--link-cmd", help="external command run as '<cmd> up|down|speed N' for toggling")
    t.add_argument("--record", type=Path, help="write the datagram trace here")
    t.add_argument("--events", type=Path, help="write the link event log here")
    t.add_argument("--report", type=Path, help="write the transmit report (JSON) here")
    t.add_argument("--jitter", type=float, default=0.0, help="simulated scheduling jitter, seconds")
    t.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("simulate", help="synthesize an IQ capture from a transmit report or trace")
    act = s.add_mutually_exclusive_group(required=True)
    act.add_argument("--report", type=Path, help="transmit report JSON from 'tx'")
    act.add_argument("--trace", type=Path, help="datagram trace; each datagram emits for --hold s")
    s.add_argument("--hold", type=_positive, default=0.01, help="emission time per datagram for --trace")
    s.add_argument("--tail", type=float, default=1.0, help="idle seconds appended after the last datagram")
    s.add_argument("--out", type=Path, required=True, help="output capture path")
    s.add_argument("--format", choices=("cu8", "cf32"), default="cf32")
    s.add_argument("--preset", choices=("pc", "laptop", "embedded"), default="pc")
    s.add_argument("--snr", type=float, default=math.inf, help="in-band SNR in dB (default: noiseless)")
    s.add_argument("--sample-rate", type=_positive, default=2.4e6)
    s.add_argument("--offset", type=float, default=10e3, help="tone offset from the tuner, Hz")
    s.add_argument("--window-size", type=int, default=2400)
    s.add_argument("--band", type=float, default=1.0, help="tune to this multiple of the 250 MHz line")
    s.add_argument("--jam-trace", type=Path, help="jammer trace added as interference")
    s.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("rx", help="demodulate an IQ capture")
    r.add_argument("capture", type=Path, help="cu8/cf32 capture with .meta sidecar")
    r.add_argument("--preset", choices=("pc", "laptop", "embedded"), default="pc")
    r.add_argument("--freq", type=float, help="absolute frequency of the line (default: preset carrier)")
    r.add_argument("--rate", type=_positive, default=10.0, help="bit rate in bit/s (default 10)")
    r.add_argument("--window-size", type=int, default=2400)
    r.add_argument("--threshold", type=float, default=0.7, help="preamble correlation threshold")
    r.add_argument("--band-bins", type=int, default=0, help="sum the PSD over +/- this many bins")
    r.add_argument("--report", type=Path, help="write the demodulation report (JSON) here")

    e = sub.add_parser("evaluate", help="BER/FER grid over rates and SNRs")
    e.add_argument("--preset", choices=("pc", "laptop", "embedded"), default="pc")
    e.add_argument("--method", choices=("udp", "toggle"), default="udp")
    e.add_argument("--rates", type=_floats, default=[1.0, 5.0, 10.0], help="comma-separated bit/s (default 1,5,10)")
    e.add_argument("--snrs", type=_floats, default=[5.0, 8.0, 11.0, 14.0, 17.0, 20.0, 24.0],
                   help="comma-separated dB (default 5,8,...,24)")
    e.add_argument("--bits", type=int, default=1000, help="payload bits per grid point (>= 1000)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--workers", type=int, default=1)
    e.add_argument("--format", choices=("csv", "table"), default="csv")
    e.add_argument("--jam", action="store_true", help="add default jammer interference")
    e.add_argument("--out", type=Path, help="write here instead of stdout")
    e.add_argument("--distances", action="store_true", help="also print the SNR-at-distance reference")

    d = sub.add_parser("detect", help="scan link-event logs or traffic traces for covert signalling")
    what = d.add_mutually_exclusive_group(required=True)
    what.add_argument("--link", type=Path, help="link event log")
    what.add_argument("--traffic", type=Path, help="datagram trace")
    d.add_argument("--window", type=_positive, default=300.0, help="link sliding window, seconds")
    d.add_argument("--max-changes", type=int, default=4, help="link changes tolerated per window")
    d.add_argument("--bin", type=_positive, default=0.01, help="traffic bin width, seconds")
    d.add_argument("--min-score", type=_positive, default=None, help="traffic periodicity threshold")

    j = sub.add_parser("jam", help="emit random UDP traffic to mask a covert transmission")
    j.add_argument("--duration", type=float, required=True, help="seconds")
    j.add_argument("--gap", type=_pair(float), default=(0.01, 0.5), help="LOW,HIGH idle between bursts, s")
    j.add_argument("--burst", type=_pair(float), default=(0.01, 0.3), help="LOW,HIGH burst length, s")
    j.add_argument("--pps", type=_pair(float), default=(50.0, 500.0), help="LOW,HIGH datagrams/s in a burst")
    j.add_argument("--size", type=_pair(int), default=(64, 1472), help="LOW,HIGH datagram bytes")
    j.add_argument("--send", type=_hostport, help="really send to HOST:PORT in real time")
    j.add_argument("--out", type=Path, help="write the jammer trace here")
    j.add_argument("--seed", type=int, default=0)
    return p


def _message(args) -> bytes:
    if args.message is not None:
        data = args.message.encode()
    elif args.hex is not None:
        try:
            data = bytes.fromhex(args.hex)
        except ValueError:
            raise UsageError(f"--hex is not valid hex: {args.hex!r}") from None
    else:
        try:
            data = args.file.read_bytes()
        except OSError as exc:
            raise UsageError(f"cannot read {args.file}: {exc}") from None
    if not data:
        raise UsageError("message is empty")
    return data


def cmd_tx(args) -> int:
    from .framing import chunk_message
    from .link import ExternalCommandController, SimulatedLinkController, device_profile, write_events
    from .sinks import RecordingSink, UdpSink, write_trace
    from .timing import MonotonicClock, SimulatedClock
    from .tx import InfeasibleRate, UdpBurstConfig, check_toggle_feasible, message_stream, modulate_toggle, modulate_udp

    data = _message(args)
    if args.gap_bits < 0:
        raise UsageError("--gap-bits must be >= 0")
    if args.method == "udp" and args.link_cmd:
        raise UsageError("--link-cmd only applies to --method toggle")
    if args.method == "toggle" and args.send:
        raise UsageError("--send only applies to --method udp")
    frames = chunk_message(data)
    chips, _ = message_stream(frames, 1.0 / args.rate, args.gap_bits)
    real = args.send is not None or args.link_cmd is not None
    clock = MonotonicClock() if real else SimulatedClock(jitter=args.jitter, seed=args.seed)

    if args.method == "udp":
        cfg = UdpBurstConfig(packets_per_second=args.pps)
        if chips.chip_duration * args.pps < 1:
            raise UsageError(f"--pps {args.pps:g} sends no datagram inside a {chips.chip_duration:g} s chip")
        sink = UdpSink(args.send) if args.send else RecordingSink()
        with sink:
            report = modulate_udp(chips, cfg, clock, sink)
    else:
        profile = device_profile(args.preset, args.gige_up)
        if args.link_cmd:
            ctrl = ExternalCommandController(args.link_cmd, clock, profile)
        else:
            ctrl = SimulatedLinkController(profile, clock)
        try:
            check_toggle_feasible(chips.chip_duration, ctrl, args.on_speed, 0)
        except InfeasibleRate as exc:
            raise UsageError(str(exc)) from None
        report = modulate_toggle(chips, ctrl, args.on_speed, 0)

    if args.record:
        write_trace(args.record, report.packets)
    if args.events:
        write_events(args.events, report.events)
    if args.report:
        report.save(args.report)
    print(f"sent {len(frames)} frame(s), {len(chips.chips)} chips, {report.duration:.3f} s, "
          f"{len(report.packets)} datagrams, {len(report.events)} link events")
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .channel import activity_from_trace, device_preset, interference_from_trace, suggested_gain, synthesize_chunks
    from .iqfile import IqWriter
    from .sinks import read_trace
    from .tx import TxReport

    if args.report:
        activity = TxReport.load(args.report)
    else:
        records = read_trace(args.trace)
        if not records:
            raise UsageError(f"{args.trace} holds no datagrams")
        if args.tail < 0:
            raise UsageError("--tail must be >= 0")
        last = max(t for t, _ in records) + args.hold
        activity = activity_from_trace(records, args.hold, last + args.tail)
    params = device_preset(args.preset, sample_rate=args.sample_rate, carrier_offset=args.offset,
                           snr_db=args.snr, seed=args.seed, window_size=args.window_size)
    if args.band != 1.0:
        params = params.tuned_to(args.band)
    interference = None
    if args.jam_trace:
        interference = interference_from_trace(read_trace(args.jam_trace), args.hold, seed=args.seed)
    gain = suggested_gain(params, args.format)
    with IqWriter(args.out, params.sample_rate, params.center_frequency, args.format, gain) as w:
        for chunk in synthesize_chunks(activity, params, interference):
            w.write(chunk)
    print(f"wrote {args.out} ({args.format}, {params.sample_rate:g} S/s, "
          f"center {params.center_frequency:.0f} Hz, {activity.duration:.3f} s)")
    return EXIT_OK


def cmd_rx(args) -> int:
    from .channel import DEVICE_CARRIERS
    from .demod import DemodConfig, iter_frames
    from .iqfile import read_sidecar

    meta = read_sidecar(args.capture)
    freq = DEVICE_CARRIERS[args.preset] if args.freq is None else args.freq
    cfg = DemodConfig(freq=freq, sample_rate=meta["sample_rate"], bit_time=1.0 / args.rate,
                      window_size=args.window_size, enable_threshold=args.threshold,
                      center_frequency=meta["center_frequency"], band_bins=args.band_bins)
    holder = []
    found = 0
    for frame in iter_frames(args.capture, cfg, holder):
        print(frame.payload.hex(), flush=True)
        found += 1
    if args.report:
        holder[0].save(args.report)
    return EXIT_OK if found else EXIT_NO_DATA


def cmd_evaluate(args) -> int:
    from .defense import JamProfile
    from .harness import ExperimentSpec, distance_table, render_report, run_experiment

    spec = ExperimentSpec(preset=args.preset, method=args.method, bit_rates=tuple(args.rates),
                          snr_points=tuple(args.snrs), bits_per_point=args.bits, seed=args.seed,
                          workers=args.workers, jam=JamProfile() if args.jam else None)
    text = render_report(run_experiment(spec), args.format)
    if args.distances:
        text += "\n" + distance_table()
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_detect(args) -> int:
    from .defense import DEFAULT_OOK_SCORE, detect_link_toggling, detect_ook_traffic, read_events, read_trace

    if args.link:
        alerts = detect_link_toggling(read_events(args.link), args.window, args.max_changes)
    else:
        score = DEFAULT_OOK_SCORE if args.min_score is None else args.min_score
        alerts = detect_ook_traffic(read_trace(args.traffic), args.bin, score)
    for a in alerts:
        print(a.describe())
    if not alerts:
        print("no alerts")
    return EXIT_OK


def cmd_jam(args) -> int:
    from .defense import JamProfile, jam, write_trace
    from .sinks import RecordingSink, UdpSink
    from .timing import MonotonicClock, SimulatedClock

    if args.duration < 0:
        raise UsageError("--duration must be >= 0")
    profile = JamProfile(args.gap, args.burst, args.pps, args.size)
    if args.send:
        with UdpSink(args.send) as sink:
            trace = jam(args.duration, profile, sink, args.seed, MonotonicClock())
    else:
        trace = jam(args.duration, profile, RecordingSink(), args.seed, SimulatedClock())
    if args.out:
        write_trace(args.out, trace)
    print(f"jammed {args.duration:g} s: {len(trace)} datagrams, {sum(n for _, n in trace)} bytes")
    return EXIT_OK


COMMANDS = {"tx": cmd_tx, "simulate": cmd_simulate, "rx": cmd_rx, "evaluate": cmd_evaluate,
            "detect": cmd_detect, "jam": cmd_jam}


def main(argv=None) -> int:
    from .channel import ChannelConfigError
    from .defense import InsufficientData, JamAborted
    from .demod import DemodConfigError
    from .harness import ExperimentError
    from .iqfile import IqFormatError
    from .tx import InfeasibleRate, TransmissionAborted

    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InsufficientData as exc:
        print(f"ethemit {args.command}: no data: {exc}", file=sys.stderr)
        return EXIT_NO_DATA
    except (UsageError, InfeasibleRate, ChannelConfigError, DemodConfigError, ExperimentError,
            IqFormatError, ValueError) as exc:
        print(f"ethemit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransmissionAborted, JamAborted) as exc:
        if args.command == "tx" and getattr(args, "report", None):
            exc.report.save(args.report)
        print(f"ethemit {args.command}: aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, RuntimeError) as exc:
        print(f"ethemit {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
